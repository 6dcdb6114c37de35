"""Multiplier-hypothesis verification and empirical boundedness.

Computes the sup-of-dilated potential-Sobolev quantities that control
square-function multipliers, the three Calderon-Zygmund kernel estimates of
a symbol sequence, and Monte-Carlo operator-norm ratios that exercise the
square-function and conic multiplier bounds at desk scale.  Pass/fail
thresholds are configuration, never asserted theory constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import HypothesisError, ResolutionError
from .lattice import ConeIndex, Grid
from .opfield import OperatorField
from .sqfn import SquareFunctionSpec, radial_accumulator
from .normsuite import _eig_norm
from .spectral import (
    Profile,
    Symbol,
    bessel_profile,
    constant_profile,
    default_window,
    hsigma_norm_profile,
    lp_base_profile,
    lp_zero_profile,
    symbol_from_profile,
)

DILATE_SHIFTS = (-2, -1, 0, 1, 2)


@dataclass(frozen=True)
class SymbolSequence:
    """Sequence (phi_j)_{0<=j<=j_max} with companion (rho_j), profile-backed.

    ``phi_profiles[j]`` and ``rho_profiles[j]`` are Profiles on R^d; lattice
    values are sampled on demand.  ``rho_is_dilate_family`` marks the extra
    shape hypothesis needed at p = 1 (rho_j = rho(2^-j .), rho > 0 inside
    its annulus and rho_0 > 0 inside the ball).
    """

    grid: Grid
    phi_profiles: tuple[Profile, ...]
    rho_profiles: tuple[Profile, ...]
    name: str = "custom"
    rho_is_dilate_family: bool = False

    @property
    def j_max(self) -> int:
        return len(self.phi_profiles) - 1

    def phi_symbol(self, j: int) -> Symbol:
        return symbol_from_profile(self.grid, self.phi_profiles[j], tag=f"{self.name}.phi{j}")

    def rho_symbol(self, j: int) -> Symbol:
        return symbol_from_profile(self.grid, self.rho_profiles[j], tag=f"{self.name}.rho{j}")

    def product_symbol(self, j: int) -> Symbol:
        return symbol_from_profile(
            self.grid, self.phi_profiles[j] * self.rho_profiles[j], tag=f"{self.name}.prod{j}"
        )

    def check_support(self, tol: float = 1e-12) -> None:
        """Verify supp(phi_j rho_j) inside the dyadic annuli on the lattice."""
        r = self.grid.freq_norm
        for j in range(self.j_max + 1):
            vals = np.abs(self.product_symbol(j).values)
            scale = float(np.max(vals))
            if scale == 0.0:
                continue
            if j == 0:
                outside = r > 2.0 + 1e-12
            else:
                outside = (r < 2.0 ** (j - 1) - 1e-12) | (r > 2.0 ** (j + 1) + 1e-12)
            leak = float(np.max(vals[outside])) if np.any(outside) else 0.0
            if leak > tol * scale:
                raise HypothesisError(
                    f"support certificate fails at j={j}: leak {leak:.3e} vs scale {scale:.3e}"
                )


def lp_sequence(grid: Grid, kind: str = "default") -> tuple[Profile, ...]:
    """The LP family itself as a profile sequence (rho_j = phi^(j))."""
    base = lp_base_profile(kind)
    profs = [lp_zero_profile(kind)]
    from .spectral import lp_family_j_max

    for j in range(1, lp_family_j_max(grid) + 1):
        profs.append(base.dilate(2.0**-j))
    return tuple(profs)


def identity_sequence(grid: Grid, kind: str = "default") -> SymbolSequence:
    """phi_j = 1 with rho_j the LP family: the identity multiplier."""
    rho = lp_sequence(grid, kind)
    phi = tuple(constant_profile(1.0) for _ in rho)
    return SymbolSequence(grid, phi, rho, name="identity", rho_is_dilate_family=True)


def bessel_dilate_sequence(grid: Grid, beta: float, kind: str = "default") -> SymbolSequence:
    """phi_j = 2^{-j beta} J_beta (phi_0 = J_beta), rho_j the LP family.

    This is the sequence behind the lifting property: the dilates
    phi_j(2^{j+k} .) phi stay uniformly in the potential Sobolev space.
    """
    rho = lp_sequence(grid, kind)
    phi = [bessel_profile(beta)]
    for j in range(1, len(rho)):
        phi.append(bessel_profile(beta).scale(2.0 ** (-j * beta)))
    return SymbolSequence(grid, tuple(phi), rho, name=f"bessel_dilate({beta})",
                          rho_is_dilate_family=True)


def scaled_sequence(seq: SymbolSequence, c: float) -> SymbolSequence:
    return SymbolSequence(
        seq.grid,
        tuple(p.scale(c) for p in seq.phi_profiles),
        seq.rho_profiles,
        name=f"{seq.name}*{c}",
        rho_is_dilate_family=seq.rho_is_dilate_family,
    )


@dataclass
class MultiplierCertificate:
    """Hypothesis constant, empirical ratio, and the verdict of one run."""

    name: str
    hypothesis_constant: float
    empirical_ratio: float
    trials: int
    sigma: float
    alpha: float
    p: float
    margin: float
    window: float
    passed: bool
    per_trial: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [
            "[certificate]",
            f"name = {self.name}",
            f"hypothesis_constant = {self.hypothesis_constant:.15e}",
            f"empirical_ratio = {self.empirical_ratio:.15e}",
            f"trials = {self.trials}",
            f"sigma = {self.sigma}",
            f"alpha = {self.alpha}",
            f"p = {self.p}",
            f"margin = {self.margin}",
            f"window = {self.window}",
            f"passed = {self.passed}",
        ]
        for k, v in self.flags.items():
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


def _dilate_resolvable(grid: Grid, window: float) -> None:
    # the hypothesis terms live in |xi| <= 4 (phi^(0)+phi^(1) reaches 4);
    # the window must frame that radius
    half_extent = grid.N / (2.0 * window)
    if half_extent < 4.0 - 1e-12:
        raise ResolutionError(
            f"window W={window} leaves half-extent {half_extent:.3g} < 4; dilates unresolvable"
        )


def hypothesis_window(grid: Grid) -> float:
    """Window framing |xi| <= 4, the widest support among hypothesis terms."""
    return grid.N / 8.0


def hypothesis_components(seq: SymbolSequence, sigma: float,
                          family_kind: str = "default",
                          window: Optional[float] = None) -> tuple[float, float]:
    """(dilate_sup, low_term) making up the hypothesis constant:
    sup_{j>=1, |k|<=2} ||phi_j(2^{j+k}.) phi||_{H^sigma_2} and
    ||phi_0 (phi^(0)+phi^(1))||_{H^sigma_2}."""
    grid = seq.grid
    if sigma <= grid.d / 2:
        raise ValueError(f"sigma must exceed d/2, got {sigma}")
    W = hypothesis_window(grid) if window is None else window
    _dilate_resolvable(grid, W)
    base = lp_base_profile(family_kind)
    sup = 0.0
    for j in range(1, seq.j_max + 1):
        for k in DILATE_SHIFTS:
            prof = seq.phi_profiles[j].dilate(2.0 ** (j + k)) * base
            try:
                val = hsigma_norm_profile(prof, grid, sigma, window=W)
            except ResolutionError as exc:
                raise ResolutionError(f"dilate (j={j}, k={k}) unresolvable: {exc}") from exc
            sup = max(sup, val)
    zero = lp_zero_profile(family_kind)
    low_prof = seq.phi_profiles[0] * _profile_sum(zero, base.dilate(0.5))
    low = hsigma_norm_profile(low_prof, grid, sigma, window=W)
    return sup, low


def hypothesis_constant(seq: SymbolSequence, sigma: float,
                        family_kind: str = "default",
                        window: Optional[float] = None) -> float:
    """max of the dilate sup and the low-frequency term; see
    :func:`hypothesis_components`."""
    sup, low = hypothesis_components(seq, sigma, family_kind, window)
    return max(sup, low)


def _profile_sum(a: Profile, b: Profile) -> Profile:
    rads = [r for r in (a.support_radius, b.support_radius) if r is not None]
    rad = max(rads) if len(rads) == 2 else None
    return Profile(lambda xi: a.fn(xi) + b.fn(xi), rad)


# ---------------------------------------------------------------------------
# Calderon-Zygmund kernel estimates
# ---------------------------------------------------------------------------

def phi_two_sigma(profiles: Sequence[Profile], grid: Grid, sigma: float,
                  family_kind: str = "default", window: Optional[float] = None,
                  k_extra: int = 2) -> float:
    """||phi||_{2,sigma} = max{ sup_{k>=1} ||phi(2^k.) phi_base||_{H^sigma(l2)},
    ||phi phi^(0)||_{H^sigma(l2)} } for the l2-valued sequence."""
    W = default_window(grid) if window is None else window
    base = lp_base_profile(family_kind)
    zero = lp_zero_profile(family_kind)

    def l2_norm(dilate_pow: Optional[int]) -> float:
        total = 0.0
        for prof in profiles:
            if dilate_pow is None:
                p = prof * zero
            else:
                p = prof.dilate(2.0**dilate_pow) * base
            total += hsigma_norm_profile(p, grid, sigma, window=W) ** 2
        return math.sqrt(total)

    sup = l2_norm(None)
    for k in range(1, len(profiles) + k_extra + 1):
        sup = max(sup, l2_norm(k))
    return sup


@dataclass
class CZEstimates:
    e1: float
    e2: float
    e3: float
    phi_2_sigma: float
    e3_max_shift: tuple
    window: float

    def ratios(self) -> tuple[float, float, float]:
        if self.phi_2_sigma == 0.0:
            return (0.0, 0.0, 0.0)
        return (self.e1 / self.phi_2_sigma, self.e2 / self.phi_2_sigma,
                self.e3 / self.phi_2_sigma)


def cz_kernel_estimates(profiles: Sequence[Profile], grid: Grid, sigma: float,
                        family_kind: str = "default",
                        window: Optional[float] = None,
                        shift_stride: int = 1) -> CZEstimates:
    """Calderon-Zygmund estimates of the l2-valued kernel with symbol sequence
    ``profiles``:

    E1 = sup_xi l2-norm over j of phi_j(xi)   (lattice frequencies);
    E2 = tail integral of ||k(s)||_l2 over |s| >= 1/2 (window quadrature);
    E3 = sampled sup over shifts |t| <= 1/4 of the shifted-difference tail.

    All-zero sequences return (0, 0, 0).
    """
    W = default_window(grid) if window is None else window
    # E1 on the integer lattice
    sq = np.zeros(grid.shape)
    for prof in profiles:
        sq = sq + np.abs(prof(grid.freqs)) ** 2
    e1 = float(np.sqrt(np.max(sq)))

    # spatial kernels on the window: k_j sampled at s = (W/N) m
    spacing = W / grid.N
    kernels = []
    for prof in profiles:
        vals = np.asarray(prof(grid.freqs / W), dtype=np.complex128)
        kernels.append(np.fft.ifftn(vals, axes=grid.spatial_axes))
    knorm_sq = np.zeros(grid.shape)
    for k in kernels:
        knorm_sq = knorm_sq + np.abs(k) ** 2

    s_axis = grid.signed_index_axis * spacing
    s_sq = np.zeros(grid.shape)
    for ax in range(grid.d):
        sh = [1] * grid.d
        sh[ax] = grid.N
        s_sq = s_sq + (s_axis**2).reshape(sh)
    s_abs = np.sqrt(s_sq)
    # E2: discrete s-measure is 1 per point (matches the l2 normalization,
    # equal to the continuum tail integral up to the fixed window factor)
    e2 = float(np.sum(np.sqrt(knorm_sq)[s_abs >= 0.5]))

    # E3: sampled shifts t on the window lattice with 0 < |t| <= 1/4
    max_cells = max(1, int(math.floor(0.25 / spacing)))
    shifts = []
    rng_axis = range(-max_cells, max_cells + 1, shift_stride)
    if grid.d == 1:
        shifts = [(m,) for m in rng_axis if m != 0]
    else:
        import itertools

        for tup in itertools.product(rng_axis, repeat=grid.d):
            if any(tup) and math.sqrt(sum(x * x for x in tup)) * spacing <= 0.25 + 1e-12:
                shifts.append(tup)
    e3 = 0.0
    e3_arg = (0,) * grid.d
    for t in shifts:
        t_abs = math.sqrt(sum(x * x for x in t)) * spacing
        diff_sq = np.zeros(grid.shape)
        for k in kernels:
            shifted = np.roll(k, t, axis=tuple(range(grid.d)))
            diff_sq = diff_sq + np.abs(shifted - k) ** 2
        val = float(np.sum(np.sqrt(diff_sq)[s_abs > 2.0 * t_abs]))
        if val > e3:
            e3, e3_arg = val, t
    p2s = phi_two_sigma(profiles, grid, sigma, family_kind, window=W)
    return CZEstimates(e1=e1, e2=e2, e3=e3, phi_2_sigma=p2s,
                       e3_max_shift=tuple(float(x * spacing) for x in e3_arg),
                       window=W)


# ---------------------------------------------------------------------------
# empirical square-function bounds
# ---------------------------------------------------------------------------

def _check_p1_shape(seq: SymbolSequence, p: float) -> None:
    if p == 1.0 and not seq.rho_is_dilate_family:
        raise HypothesisError(
            "p = 1 requires rho_j = rho(2^-j .) with rho > 0 inside its annulus"
        )


def _square_norm(f: OperatorField, symbols: list[np.ndarray], alpha: float,
                 p: float) -> float:
    spec_symbols = tuple(
        Symbol(f.grid, v, tag=f"seq{j}") for j, v in enumerate(symbols[1:], start=1)
    )
    zero = Symbol(f.grid, symbols[0], tag="seq0")
    spec = SquareFunctionSpec(kernel_kind="phi", alpha=alpha, level_symbols=spec_symbols,
                              zero_symbol=zero, include_zero_term=True)
    return _eig_norm(radial_accumulator(f, spec), p)


def _conic_norm(f: OperatorField, symbols: list[np.ndarray], alpha: float,
                p: float, cone: ConeIndex) -> float:
    grid = f.grid
    from .opfield import PSDAccumulator, gram, herm
    from .sqfn import _ball_indicator_ffts, ball_average
    from .spectral import apply_symbol_data

    acc = PSDAccumulator(grid, f.n)
    ind_ffts = _ball_indicator_ffts(grid, cone)
    h_d = grid.cell_volume
    # j = 0 term: radial (B_0 would exceed the torus; the cone starts at j=1)
    g0 = apply_symbol_data(symbols[0], f.data, grid)
    acc.add_gram(g0, 1.0)
    for j in range(1, len(symbols)):
        g = apply_symbol_data(symbols[j], f.data, grid)
        avg = ball_average(gram(g), ind_ffts[j], grid)
        acc.add_psd(avg, 2.0 ** (j * (2 * alpha + grid.d)) * h_d)
    acc.S = 0.5 * (acc.S + herm(acc.S))
    return _eig_norm(acc, p)


def empirical_square_bound(seq: SymbolSequence, f_gen: Callable[[int], OperatorField],
                           alpha: float, p: float, trials: int,
                           sigma: Optional[float] = None, margin: float = 100.0,
                           window: Optional[float] = None,
                           family_kind: str = "default") -> MultiplierCertificate:
    """Empirical check of the square-function multiplier bound.

    The certificate passes iff the worst trial ratio

        ||(sum_j 4^{j alpha} |phi_j rho_j f|^2)^(1/2)||_p
        / ||(sum_j 4^{j alpha} |rho_j f|^2)^(1/2)||_p

    stays below margin * hypothesis_constant.  Pass/fail refers only to the
    ratio being bounded and stable, never to a theorem's unstated constant.
    """
    grid = seq.grid
    sigma = grid.d / 2.0 + 0.5 if sigma is None else sigma
    seq.check_support()
    _check_p1_shape(seq, p)
    W = hypothesis_window(grid) if window is None else window
    chyp = hypothesis_constant(seq, sigma, family_kind=family_kind, window=W)
    rho_vals = [seq.rho_symbol(j).values for j in range(seq.j_max + 1)]
    prod_vals = [seq.product_symbol(j).values for j in range(seq.j_max + 1)]
    ratios = []
    for t in range(trials):
        f = f_gen(t)
        out = _square_norm(f, prod_vals, alpha, p)
        inp = _square_norm(f, rho_vals, alpha, p)
        ratios.append(out / inp if inp > 0 else 0.0)
    r_emp = max(ratios) if ratios else 0.0
    return MultiplierCertificate(
        name=f"square[{seq.name}]",
        hypothesis_constant=chyp,
        empirical_ratio=r_emp,
        trials=trials,
        sigma=sigma,
        alpha=alpha,
        p=p,
        margin=margin,
        window=W,
        passed=bool(r_emp <= margin * chyp),
        per_trial=ratios,
    )


def empirical_conic_bound(seq: SymbolSequence, f_gen: Callable[[int], OperatorField],
                          alpha: float, p: float, cone: ConeIndex, trials: int,
                          sigma: Optional[float] = None, margin: float = 100.0,
                          window: Optional[float] = None,
                          family_kind: str = "default") -> MultiplierCertificate:
    """Conic counterpart of :func:`empirical_square_bound`."""
    grid = seq.grid
    sigma = grid.d / 2.0 + 0.5 if sigma is None else sigma
    seq.check_support()
    _check_p1_shape(seq, p)
    W = hypothesis_window(grid) if window is None else window
    chyp = hypothesis_constant(seq, sigma, family_kind=family_kind, window=W)
    j_top = min(seq.j_max, cone.j_max)
    rho_vals = [seq.rho_symbol(j).values for j in range(j_top + 1)]
    prod_vals = [seq.product_symbol(j).values for j in range(j_top + 1)]
    ratios = []
    for t in range(trials):
        f = f_gen(t)
        out = _conic_norm(f, prod_vals, alpha, p, cone)
        inp = _conic_norm(f, rho_vals, alpha, p, cone)
        ratios.append(out / inp if inp > 0 else 0.0)
    r_emp = max(ratios) if ratios else 0.0
    return MultiplierCertificate(
        name=f"conic[{seq.name}]",
        hypothesis_constant=chyp,
        empirical_ratio=r_emp,
        trials=trials,
        sigma=sigma,
        alpha=alpha,
        p=p,
        margin=margin,
        window=W,
        passed=bool(r_emp <= margin * chyp),
        per_trial=ratios,
    )


def exact_p2_operator_norm(seq: SymbolSequence) -> float:
    """Exact operator norm of the multiplier at p = 2, alpha = 0:
    sup_xi sqrt( sum_j |phi_j rho_j|^2 / sum_j |rho_j|^2 )."""
    grid = seq.grid
    num = np.zeros(grid.shape)
    den = np.zeros(grid.shape)
    for j in range(seq.j_max + 1):
        num = num + np.abs(seq.product_symbol(j).values) ** 2
        den = den + np.abs(seq.rho_symbol(j).values) ** 2
    mask = den > 0
    if not np.any(mask):
        return 0.0
    return float(np.sqrt(np.max(num[mask] / den[mask])))
