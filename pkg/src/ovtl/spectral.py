"""Fourier analysis engine on the periodic lattice.

Conventions: the transform pair is

    fhat(xi) = sum_s h^d f(s) e^{-2 pi i s.xi},   f(s) = sum_xi fhat(xi) e^{2 pi i s.xi}

with integer frequencies xi in [-N/2, N/2)^d.  Plancherel
sum_s h^d |f(s)|^2 = sum_xi |fhat(xi)|^2 is then exact, and the Bessel
symbol is exactly (1+|xi|^2)^(alpha/2).

Symbols carry lattice values and, when available, an analytic *profile*
(a callable on R^d) so they can be resampled on dilated frequency windows;
this is what the potential-Sobolev quantity ``hsigma_norm`` needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import GridMismatchError, ResolutionError
from .lattice import Grid
from .opfield import OperatorField

# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def fft_mat(data: np.ndarray, grid: Grid) -> np.ndarray:
    """Entrywise forward DFT of (*shape, n, n) data; returns coefficients fhat."""
    return np.fft.fftn(data, axes=grid.spatial_axes) * grid.cell_volume


def ifft_mat(coef: np.ndarray, grid: Grid) -> np.ndarray:
    """Inverse of :func:`fft_mat`."""
    return np.fft.ifftn(coef, axes=grid.spatial_axes) * float(grid.npoints)


def fft_forward(f: OperatorField) -> OperatorField:
    """Frequency-side field of Fourier coefficients (same storage layout)."""
    return OperatorField(f.grid, fft_mat(f.data, f.grid))


def fft_inverse(fhat: OperatorField) -> OperatorField:
    return OperatorField(fhat.grid, ifft_mat(fhat.data, fhat.grid))


# ---------------------------------------------------------------------------
# profiles: symbols as functions on R^d
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    """A symbol profile on R^d: callable on arrays of shape (..., d).

    ``support_radius`` (if set) bounds supp within {|xi| <= support_radius};
    it drives resolvability checks when profiles are sampled on dilated
    frequency windows.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    support_radius: Optional[float] = None

    def __call__(self, xi: np.ndarray) -> np.ndarray:
        return self.fn(np.asarray(xi, dtype=float))

    def dilate(self, c: float) -> "Profile":
        """Profile of xi -> self(c * xi)."""
        rad = None if self.support_radius is None else self.support_radius / c
        return Profile(lambda xi, _c=c: self.fn(_c * xi), rad)

    def __mul__(self, other: "Profile") -> "Profile":
        rads = [r for r in (self.support_radius, other.support_radius) if r is not None]
        rad = min(rads) if rads else None
        return Profile(lambda xi: self.fn(xi) * other.fn(xi), rad)

    def scale(self, c: complex) -> "Profile":
        return Profile(lambda xi: c * self.fn(xi), self.support_radius)


def radial_profile(fn: Callable[[np.ndarray], np.ndarray], support_radius=None) -> Profile:
    """Profile defined through a function of r = |xi|."""
    return Profile(lambda xi: fn(np.sqrt(np.sum(xi**2, axis=-1))), support_radius)


def constant_profile(value: complex = 1.0) -> Profile:
    return Profile(lambda xi: np.full(xi.shape[:-1], value, dtype=complex))


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Symbol:
    """Scalar complex multiplier on the frequency lattice.

    ``values`` has shape grid.shape in FFT storage order.  ``profile``
    optionally extends the symbol to all of R^d.
    """

    grid: Grid
    values: np.ndarray
    tag: str = "custom"
    profile: Optional[Profile] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != self.grid.shape:
            raise ValueError("symbol values shape does not match frequency lattice")
        if not np.all(np.isfinite(vals)):
            raise ValueError("symbol contains non-finite values")
        vals = np.ascontiguousarray(vals)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __mul__(self, other: "Symbol") -> "Symbol":
        if self.grid != other.grid:
            raise GridMismatchError("symbols on different grids")
        prof = None
        if self.profile is not None and other.profile is not None:
            prof = self.profile * other.profile
        return Symbol(self.grid, self.values * other.values,
                      tag=f"({self.tag})*({other.tag})", profile=prof)


def symbol_from_profile(grid: Grid, prof: Profile, tag: str = "custom") -> Symbol:
    return Symbol(grid, prof(grid.freqs), tag=tag, profile=prof)


def bessel_profile(alpha: float) -> Profile:
    return radial_profile(lambda r: (1.0 + r**2) ** (alpha / 2.0) + 0j)


def bessel_symbol(grid: Grid, alpha: float) -> Symbol:
    """Bessel potential symbol J_alpha(xi) = (1+|xi|^2)^(alpha/2)."""
    return symbol_from_profile(grid, bessel_profile(alpha), tag=f"bessel({alpha})")


def riesz_profile(alpha: float) -> Profile:
    def fn(r):
        out = np.zeros_like(r, dtype=complex)
        nz = r > 0
        out[nz] = r[nz] ** alpha
        if alpha > 0:
            out[~nz] = 0.0
        return out
    return radial_profile(fn)


def riesz_symbol(grid: Grid, alpha: float) -> Symbol:
    """Riesz symbol |xi|^alpha with the mean mode zeroed (all alpha)."""
    return symbol_from_profile(grid, riesz_profile(alpha), tag=f"riesz({alpha})")


def derivative_profile(i: int, beta: float) -> Profile:
    def fn(xi):
        t = 2.0 * math.pi * xi[..., i]
        if float(beta).is_integer():
            return (1j * t) ** int(beta)
        # principal branch: (i t)^beta = |t|^beta e^{i pi beta sign(t) / 2}
        out = np.abs(t) ** beta * np.exp(1j * math.pi * beta * np.sign(t) / 2.0)
        out = np.where(t == 0.0, 0.0, out)
        return out
    return Profile(fn)


def derivative_symbol(grid: Grid, i: int, beta: float) -> Symbol:
    """Fractional-derivative symbol (2 pi i xi_i)^beta (principal branch)."""
    if not 0 <= i < grid.d:
        raise ValueError(f"axis {i} out of range for d={grid.d}")
    return symbol_from_profile(grid, derivative_profile(i, beta), tag=f"derivative({i},{beta})")


def multi_derivative_symbol(grid: Grid, gamma: tuple[int, ...]) -> Symbol:
    """Symbol of D^gamma = prod_i (2 pi i xi_i)^(gamma_i)."""
    vals = np.ones(grid.shape, dtype=np.complex128)
    for i, g in enumerate(gamma):
        if g:
            vals = vals * (2j * math.pi * grid.freqs[..., i]) ** g
    return Symbol(grid, vals, tag=f"D^{gamma}")


def poisson_symbol(grid: Grid, eps: float) -> Symbol:
    """Poisson semigroup symbol e^{-2 pi eps |xi|}."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    prof = radial_profile(lambda r, _e=eps: np.exp(-2.0 * math.pi * _e * r) + 0j)
    return symbol_from_profile(grid, prof, tag=f"poisson({eps})")


def poisson_dk_symbol(grid: Grid, eps: float, k: int) -> Symbol:
    """k-th eps-derivative of the Poisson symbol: (-2 pi |xi|)^k e^{-2 pi eps |xi|}."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if k < 1:
        raise ValueError("k must be >= 1")
    prof = radial_profile(
        lambda r, _e=eps, _k=k: (-2.0 * math.pi * r) ** _k * np.exp(-2.0 * math.pi * _e * r) + 0j
    )
    return symbol_from_profile(grid, prof, tag=f"poisson_d{k}({eps})")


def apply_symbol(m: Symbol, f: OperatorField) -> OperatorField:
    """Fourier multiplier: inverse transform of m(xi) fhat(xi)."""
    if m.grid != f.grid:
        raise GridMismatchError("symbol and field grids differ")
    coef = np.fft.fftn(f.data, axes=f.grid.spatial_axes)
    coef *= m.values[..., None, None]
    out = np.fft.ifftn(coef, axes=f.grid.spatial_axes)
    return OperatorField(f.grid, out)


def apply_symbol_data(values: np.ndarray, data: np.ndarray, grid: Grid) -> np.ndarray:
    """Multiplier action on raw (*, n, n) or batched (B, *, n, n) data."""
    extra = data.ndim - grid.d - 2
    axes = tuple(ax + extra for ax in grid.spatial_axes)
    coef = np.fft.fftn(data, axes=axes)
    coef *= values[..., None, None]
    return np.fft.ifftn(coef, axes=axes)


# ---------------------------------------------------------------------------
# Littlewood-Paley families
# ---------------------------------------------------------------------------

class _EtaTable:
    """Smooth transition eta(r): 1 for r <= 1, 0 for r >= 2, built from the
    normalized bump integral eta(r) = int_r^2 w / int_1^2 w.

    The annulus bump phi(r) = eta(r) - eta(2r) is evaluated through two
    one-sided accumulations of w: the left cumulative resolves the lower
    edge and the right-accumulated tail resolves the upper edge, so phi
    stays strictly positive at every interior radius whose exact value is
    representable in float64 (values below the subnormal floor, reached
    within ``positivity_margin`` of the boundary in the t variable, round
    to zero in any double-precision implementation).  Dyadic dilates share
    the table, so partition sums telescope to machine round-off.
    """

    POINTS = 8193

    def __init__(self, kind: str = "default"):
        self.kind = kind
        t = np.linspace(1.0, 2.0, self.POINTS, dtype=np.longdouble)
        if kind == "default":
            w = np.zeros_like(t)
            inner = (t > 1.0) & (t < 2.0)
            ti = t[inner]
            w[inner] = np.exp(-1.0 / ((ti - 1.0) * (2.0 - ti)))
            self.positivity_margin = 0.002
        elif kind == "poly":
            w = ((t - 1.0) * (2.0 - t)) ** 2
            self.positivity_margin = 1e-9
        else:
            raise ValueError(f"unknown eta profile kind {kind!r}")
        seg = 0.5 * (w[1:] + w[:-1]) * (t[1] - t[0])
        cum = np.concatenate([[np.longdouble(0.0)], np.cumsum(seg)])
        tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [np.longdouble(0.0)]])
        self._t = np.asarray(t, dtype=float)
        self._cum = np.asarray(cum, dtype=float)
        self._tail = np.asarray(tail, dtype=float)
        self._total_c = float(cum[-1])
        self._total_t = float(tail[0])

    def eta(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.empty(r.shape, dtype=float)
        out[r <= 1.0] = 1.0
        out[r >= 2.0] = 0.0
        mid = (r > 1.0) & (r < 2.0)
        if np.any(mid):
            out[mid] = np.interp(r[mid], self._t, self._tail) / self._total_t
        return out

    def phi(self, r: np.ndarray) -> np.ndarray:
        """eta(r) - eta(2r) in cancellation-free form."""
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape, dtype=float)
        low = (r > 0.5) & (r <= 1.0)
        if np.any(low):
            out[low] = np.interp(2.0 * r[low], self._t, self._cum) / self._total_c
        high = (r > 1.0) & (r < 2.0)
        if np.any(high):
            out[high] = np.interp(r[high], self._t, self._tail) / self._total_t
        return out

    __call__ = eta


@lru_cache(maxsize=8)
def _eta(kind: str) -> _EtaTable:
    return _EtaTable(kind)


def lp_positivity_margin(kind: str = "default") -> float:
    """Width (in the transition variable) of the boundary zone where the
    exact bump value lies below the float64 subnormal floor."""
    return _eta(kind).positivity_margin


def lp_base_profile(kind: str = "default") -> Profile:
    """Annulus bump phi(xi) = eta(|xi|) - eta(2|xi|), supported in 1/2 <= |xi| <= 2."""
    eta = _eta(kind)
    return radial_profile(lambda r: eta.phi(r) + 0j, support_radius=2.0)


def lp_zero_profile(kind: str = "default") -> Profile:
    """Low-frequency bump phi^(0)(xi) = eta(|xi|), equal to 1 for |xi| <= 1."""
    eta = _eta(kind)
    return radial_profile(lambda r: eta(r) + 0j, support_radius=2.0)


@dataclass(frozen=True)
class LPFamily:
    """Validated Littlewood-Paley family phi^(j), j = 0 .. j_max.

    phi^(0) = eta(|xi|); phi^(j) = phi(2^-j xi) with phi the annulus bump.
    The partition sum_j phi^(j)(xi) telescopes to eta(2^-j_max |xi|), which
    equals 1 exactly for |xi| <= 2^j_max (the covered range).
    """

    grid: Grid
    j_max: int
    symbols: tuple[Symbol, ...]
    kind: str = "default"

    def member(self, j: int) -> Symbol:
        return self.symbols[j]

    def values(self, j: int) -> np.ndarray:
        return self.symbols[j].values

    @property
    def covered_radius(self) -> float:
        return float(2**self.j_max)

    def covered_mask(self) -> np.ndarray:
        return self.grid.freq_norm <= self.covered_radius + 1e-12

    def partition_sum(self) -> np.ndarray:
        total = np.zeros(self.grid.shape)
        for s in self.symbols:
            total = total + s.values.real
        return total

    def square_sum(self) -> np.ndarray:
        total = np.zeros(self.grid.shape)
        for s in self.symbols:
            total = total + s.values.real**2
        return total

    def sandwich_floor(self) -> float:
        """c_0^2 = min over covered frequencies of sum_j phi^(j)(xi)^2."""
        return float(np.min(self.square_sum()[self.covered_mask()]))


def lp_family_j_max(grid: Grid) -> int:
    """Top LP scale: floor(log2(N/4)) keeps supp phi^(j_max) inside Nyquist."""
    return int(math.floor(math.log2(grid.N / 4)))


@lru_cache(maxsize=32)
def make_lp_family(grid: Grid, kind: str = "default") -> LPFamily:
    """Construct the Littlewood-Paley family for the grid.

    Raises ResolutionError when the grid cannot host a single annulus.
    """
    j_max = lp_family_j_max(grid)
    if j_max < 1:
        raise ResolutionError(f"grid N={grid.N} too small for an LP family")
    base = lp_base_profile(kind)
    zero = lp_zero_profile(kind)
    symbols = [symbol_from_profile(grid, zero, tag=f"lp0[{kind}]")]
    for j in range(1, j_max + 1):
        prof = base.dilate(2.0**-j)
        symbols.append(symbol_from_profile(grid, prof, tag=f"lp{j}[{kind}]"))
    return LPFamily(grid=grid, j_max=j_max, symbols=tuple(symbols), kind=kind)


@dataclass(frozen=True)
class HomLPFamily:
    """Homogeneous family phi_dot_j = phi(2^-j .), j_min <= j <= j_max."""

    grid: Grid
    j_min: int
    j_max: int
    symbols: tuple[Symbol, ...]
    kind: str = "default"

    def member(self, j: int) -> Symbol:
        return self.symbols[j - self.j_min]

    def scales(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def partition_sum(self) -> np.ndarray:
        total = np.zeros(self.grid.shape)
        for s in self.symbols:
            total = total + s.values.real
        return total


@lru_cache(maxsize=32)
def make_hom_lp_family(grid: Grid, kind: str = "default", j_min: int = -1) -> HomLPFamily:
    """Homogeneous dilates down to j_min (j_min = -1 covers all integer xi != 0)."""
    j_max = lp_family_j_max(grid)
    base = lp_base_profile(kind)
    symbols = []
    for j in range(j_min, j_max + 1):
        prof = base.dilate(2.0**-j)
        symbols.append(symbol_from_profile(grid, prof, tag=f"lpdot{j}[{kind}]"))
    return HomLPFamily(grid=grid, j_min=j_min, j_max=j_max, symbols=tuple(symbols), kind=kind)


# ---------------------------------------------------------------------------
# potential Sobolev norm of symbols
# ---------------------------------------------------------------------------

def default_window(grid: Grid) -> float:
    return grid.N / 4.0


def hsigma_norm_profile(prof: Profile, grid: Grid, sigma: float,
                        window: Optional[float] = None) -> float:
    """H^sigma_2 quantity of a symbol profile, desk-scale rendering.

    The profile is sampled at frequencies k/W (k the integer lattice), its
    spatial dual is taken by normalized inverse DFT (a constant profile maps
    to the unit point mass at 0), weighted by (1+|s|^2)^sigma with
    s = (W/N) m in the signed window, and the plain l2 norm is returned.
    With this discrete normalization the constant symbol has norm exactly 1;
    the quantity is proportional to the continuum H^sigma_2 norm with a fixed
    (W/N)^(d/2) factor.
    """
    if sigma <= grid.d / 2.0:
        raise ValueError(f"sigma must exceed d/2 = {grid.d / 2}, got {sigma}")
    W = default_window(grid) if window is None else float(window)
    if W <= 0:
        raise ValueError("window must be positive")
    half_extent = grid.N / (2.0 * W)
    if prof.support_radius is not None and prof.support_radius > half_extent + 1e-9:
        raise ResolutionError(
            f"profile support radius {prof.support_radius:.3g} exceeds window "
            f"half-extent {half_extent:.3g} (window W={W:.3g})"
        )
    xi = grid.freqs / W
    vals = np.asarray(prof(xi), dtype=np.complex128)
    spatial = np.fft.ifftn(vals, axes=grid.spatial_axes)
    s_sq = np.zeros(grid.shape)
    axis = (grid.signed_index_axis * (W / grid.N)) ** 2
    for ax in range(grid.d):
        sh = [1] * grid.d
        sh[ax] = grid.N
        s_sq = s_sq + axis.reshape(sh)
    weight = (1.0 + s_sq) ** sigma
    return float(np.sqrt(np.sum(weight * np.abs(spatial) ** 2)))


def hsigma_norm(sym: Symbol, sigma: float, window: Optional[float] = None) -> float:
    """H^sigma_2 quantity of a Symbol.

    Uses the analytic profile when available; otherwise the stored lattice
    values are treated as the window samples directly.
    """
    if sym.profile is not None:
        return hsigma_norm_profile(sym.profile, sym.grid, sigma, window)
    grid = sym.grid
    if sigma <= grid.d / 2.0:
        raise ValueError(f"sigma must exceed d/2 = {grid.d / 2}, got {sigma}")
    W = default_window(grid) if window is None else float(window)
    spatial = np.fft.ifftn(sym.values, axes=grid.spatial_axes)
    s_sq = np.zeros(grid.shape)
    axis = (grid.signed_index_axis * (W / grid.N)) ** 2
    for ax in range(grid.d):
        sh = [1] * grid.d
        sh[ax] = grid.N
        s_sq = s_sq + axis.reshape(sh)
    weight = (1.0 + s_sq) ** sigma
    return float(np.sqrt(np.sum(weight * np.abs(spatial) ** 2)))


def default_sigma(grid: Grid) -> float:
    """Default smoothness parameter: d/2 + 1/2."""
    return grid.d / 2.0 + 0.5
