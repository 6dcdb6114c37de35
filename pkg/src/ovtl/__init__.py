"""Operator-valued Littlewood-Paley / Triebel-Lizorkin toolkit on periodic lattices."""

from .lattice import Grid, DyadicCube, ConeIndex, dyadic_cubes_at_level, subcube_order, cone_index
from .opfield import (
    OperatorField,
    StripField,
    PSDAccumulator,
    modulus,
    sqrt_psd,
    trace_lp_norm,
    op_cauchy_schwarz_gap,
    pairing,
)
from .spectral import (
    Symbol,
    LPFamily,
    HomLPFamily,
    fft_forward,
    fft_inverse,
    apply_symbol,
    make_lp_family,
    make_hom_lp_family,
    bessel_symbol,
    riesz_symbol,
    derivative_symbol,
    poisson_symbol,
    poisson_dk_symbol,
    hsigma_norm,
)

__version__ = "0.1.0"
