"""Matrix-valued fields on the lattice and on the dyadic strip.

An :class:`OperatorField` assigns an n x n complex matrix to every lattice
point; a :class:`StripField` assigns one to every (point, dyadic scale)
pair.  The module also provides the operator-algebra primitives used
throughout: adjoints, the operator modulus |x| = (x*x)^(1/2), pointwise PSD
accumulation with Hermitian square roots, trace L_p norms, and the
operator Cauchy-Schwarz gap.

All public operations are pure; field data is marked read-only after
construction, and every reduction uses a fixed summation order so results
are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, ValidationError
from .lattice import Grid


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class OperatorField:
    """Map from lattice points to n x n complex matrices.

    ``data`` has shape (*grid.shape, n, n).
    """

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        expected = self.grid.shape
        if data.ndim != self.grid.d + 2 or data.shape[: self.grid.d] != expected:
            raise ValueError(f"field data shape {data.shape} does not match grid {expected}")
        if data.shape[-1] != data.shape[-2]:
            raise ValueError("matrix blocks must be square")
        if not np.all(np.isfinite(data)):
            raise ValidationError("field contains non-finite entries")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def n(self) -> int:
        return self.data.shape[-1]

    def adjoint(self) -> "OperatorField":
        return OperatorField(self.grid, np.conj(np.swapaxes(self.data, -1, -2)))

    def __add__(self, other: "OperatorField") -> "OperatorField":
        _check_same(self, other)
        return OperatorField(self.grid, self.data + other.data)

    def __sub__(self, other: "OperatorField") -> "OperatorField":
        _check_same(self, other)
        return OperatorField(self.grid, self.data - other.data)

    def __mul__(self, c: complex) -> "OperatorField":
        return OperatorField(self.grid, self.data * c)

    __rmul__ = __mul__

    @classmethod
    def zero(cls, grid: Grid, n: int) -> "OperatorField":
        return cls(grid, np.zeros(grid.shape + (n, n), dtype=np.complex128))

    @classmethod
    def constant(cls, grid: Grid, matrix: np.ndarray) -> "OperatorField":
        matrix = np.asarray(matrix, dtype=np.complex128)
        data = np.broadcast_to(matrix, grid.shape + matrix.shape).copy()
        return cls(grid, data)


@dataclass(frozen=True)
class StripField:
    """Map from (lattice point, dyadic scale 2^-j) to n x n matrices.

    ``data`` has shape (j_max, *grid.shape, n, n); axis 0 holds scales
    j = 1 .. j_max (index j-1).
    """

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != self.grid.d + 3 or data.shape[1 : 1 + self.grid.d] != self.grid.shape:
            raise ValueError(f"strip data shape {data.shape} does not match grid")
        if data.shape[-1] != data.shape[-2]:
            raise ValueError("matrix blocks must be square")
        if not np.all(np.isfinite(data)):
            raise ValidationError("strip field contains non-finite entries")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def n(self) -> int:
        return self.data.shape[-1]

    @property
    def j_max(self) -> int:
        return self.data.shape[0]

    def level(self, j: int) -> np.ndarray:
        """Data at scale 2^-j (1-based j)."""
        if not 1 <= j <= self.j_max:
            raise ValueError(f"scale index {j} outside 1..{self.j_max}")
        return self.data[j - 1]

    def __mul__(self, c: complex) -> "StripField":
        return StripField(self.grid, self.data * c)

    __rmul__ = __mul__

    @classmethod
    def zero(cls, grid: Grid, n: int, j_max: int) -> "StripField":
        return cls(grid, np.zeros((j_max,) + grid.shape + (n, n), dtype=np.complex128))


def _check_same(a, b) -> None:
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")
    if a.data.shape[-1] != b.data.shape[-1]:
        raise GridMismatchError("fields have different matrix dimensions")


# ---------------------------------------------------------------------------
# matrix primitives
# ---------------------------------------------------------------------------

def herm(x: np.ndarray) -> np.ndarray:
    """Adjoint of the trailing matrix axes."""
    return np.conj(np.swapaxes(x, -1, -2))


def gram(x: np.ndarray) -> np.ndarray:
    """Column Gram block x* x on the trailing matrix axes."""
    return herm(x) @ x


def psd_sqrt(S: np.ndarray, check: bool = True, rtol: float = 1e-12) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition.

    Eigenvalues are clipped at zero so that -1e-14-size round-off cannot
    poison the root.  With ``check``, inputs that fail Hermitian symmetry
    beyond ``rtol`` (relative to the largest entry) raise ValidationError.
    """
    S = np.asarray(S)
    if check:
        scale = float(np.max(np.abs(S))) if S.size else 0.0
        dev = float(np.max(np.abs(S - herm(S)))) if S.size else 0.0
        if scale > 0 and dev > max(rtol * scale, 1e-300):
            raise ValidationError(f"matrix not Hermitian: deviation {dev:.3e} vs scale {scale:.3e}")
    Sh = 0.5 * (S + herm(S))
    w, v = np.linalg.eigh(Sh)
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)[..., None, :]) @ herm(v)
    return root


def modulus(x: np.ndarray) -> np.ndarray:
    """Operator modulus |x| = (x* x)^(1/2) of the trailing matrix axes."""
    return psd_sqrt(gram(np.asarray(x, dtype=np.complex128)), check=False)


@dataclass
class PSDAccumulator:
    """Pointwise accumulator for sums  S(s) = sum_k w_k g_k(s)* g_k(s).

    Weights must be nonnegative; S stays Hermitian PSD up to round-off.
    Accumulation order is the call order, fixed by the caller.
    """

    grid: Grid
    n: int
    S: np.ndarray = field(init=False)

    def __post_init__(self):
        self.S = np.zeros(self.grid.shape + (self.n, self.n), dtype=np.complex128)

    def add_gram(self, g: np.ndarray, weight: float = 1.0) -> "PSDAccumulator":
        """Accumulate weight * g(s)* g(s)."""
        if weight < 0:
            raise ValueError("weights must be nonnegative")
        self.S += weight * gram(g)
        return self

    def add_psd(self, P: np.ndarray, weight: float = 1.0) -> "PSDAccumulator":
        """Accumulate an already-PSD pointwise block."""
        if weight < 0:
            raise ValueError("weights must be nonnegative")
        self.S += weight * P
        return self

    def check(self, herm_rtol: float = 1e-12, eig_rtol: float = 1e-10) -> None:
        scale = float(np.max(np.abs(self.S))) if self.S.size else 0.0
        if scale == 0.0:
            return
        dev = float(np.max(np.abs(self.S - herm(self.S))))
        if dev > herm_rtol * scale:
            raise ValidationError(f"accumulator lost Hermitian symmetry: {dev:.3e}")
        wmin = float(np.min(np.linalg.eigvalsh(0.5 * (self.S + herm(self.S)))))
        if wmin < -eig_rtol * scale:
            raise ValidationError(f"accumulator lost positivity: min eig {wmin:.3e}")

    def eigenvalues(self) -> np.ndarray:
        """Pointwise eigenvalues of S, clipped at 0; shape (*grid.shape, n)."""
        w = np.linalg.eigvalsh(0.5 * (self.S + herm(self.S)))
        return np.clip(w, 0.0, None)

    def sqrt(self) -> OperatorField:
        """Pointwise Hermitian PSD square root as an OperatorField."""
        return OperatorField(self.grid, psd_sqrt(self.S))


def sqrt_psd(acc: PSDAccumulator) -> OperatorField:
    """Pointwise PSD square root of an accumulator (validates invariants)."""
    acc.check()
    return acc.sqrt()


# ---------------------------------------------------------------------------
# norms and pairings
# ---------------------------------------------------------------------------

def singular_values(f: OperatorField) -> np.ndarray:
    """Pointwise singular values, shape (*grid.shape, n)."""
    return np.linalg.svd(f.data, compute_uv=False)


def trace_lp_norm(f: OperatorField, p: float) -> float:
    """Noncommutative L_p norm (sum_s h^d tr|f(s)|^p)^(1/p); operator-sup for p = inf.

    The trace is the standard (unnormalized) matrix trace.
    """
    if p != np.inf and p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    sv = singular_values(f)
    if p == np.inf:
        return float(np.max(sv)) if sv.size else 0.0
    total = float(np.sum(sv**p)) * f.grid.cell_volume
    return total ** (1.0 / p)


def lp_norm_from_psd_eigs(eigs: np.ndarray, p: float, cell_volume: float) -> float:
    """Trace L_p norm of the PSD root field given eigenvalues of S = root^2."""
    if p != np.inf and p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    if p == np.inf:
        return float(np.sqrt(np.max(eigs))) if eigs.size else 0.0
    total = float(np.sum(eigs ** (p / 2.0))) * cell_volume
    return total ** (1.0 / p)


def hs_norm_sq(f: OperatorField) -> float:
    """Squared L_2 norm  sum_s h^d ||f(s)||_HS^2 (fixed summation order)."""
    return float(np.sum(np.abs(f.data) ** 2)) * f.grid.cell_volume


def pairing(f: OperatorField, g: OperatorField) -> complex:
    """Bilinear pairing tau integral tr(f(s) g(s)*) ds."""
    _check_same(f, g)
    val = np.sum(f.data * np.conj(g.data))
    return complex(val) * f.grid.cell_volume


def op_cauchy_schwarz_gap(phi: np.ndarray, f: OperatorField) -> float:
    """Smallest eigenvalue of  (int |phi|^2)(int f*f) - (int phi f)*(int phi f).

    A nonnegative result (up to -1e-9 * scale round-off) certifies the
    operator Cauchy-Schwarz inequality |int phi f|^2 <= int|phi|^2 int|f|^2.
    """
    phi = np.asarray(phi)
    if phi.shape != f.grid.shape:
        raise GridMismatchError("scalar field shape does not match grid")
    h_d = f.grid.cell_volume
    phi_sq = float(np.sum(np.abs(phi) ** 2)) * h_d
    gram_int = np.sum(gram(f.data), axis=f.grid.spatial_axes) * h_d
    conv = np.sum(phi[..., None, None] * f.data, axis=f.grid.spatial_axes) * h_d
    M = phi_sq * gram_int - herm(conv) @ conv
    M = 0.5 * (M + herm(M))
    return float(np.min(np.linalg.eigvalsh(M)))


def op_cauchy_schwarz_scale(phi: np.ndarray, f: OperatorField) -> float:
    """Natural scale for the Cauchy-Schwarz gap: ||int|phi|^2 int f*f||_op."""
    phi = np.asarray(phi)
    h_d = f.grid.cell_volume
    phi_sq = float(np.sum(np.abs(phi) ** 2)) * h_d
    gram_int = np.sum(gram(f.data), axis=f.grid.spatial_axes) * h_d
    if phi_sq == 0.0:
        return 0.0
    return float(np.max(np.linalg.eigvalsh(0.5 * (gram_int + herm(gram_int))))) * phi_sq
