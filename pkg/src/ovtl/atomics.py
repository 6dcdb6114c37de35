"""Atoms, validators, tent-space atomization, and smooth atomic decomposition.

The reproducing system is built from spatial stencils: at each scale j a
radial bump is sampled inside the half-cube of side 2^-j and hit with
discrete Laplacians, giving level kernels that are exactly mean-zero and
exactly supported in the cube of side 2^-j.  The low-frequency symbol is
the exact complement 1 - sum_j Psi_j(xi)^2, so the reconstruction identity
holds to machine precision on every lattice point while projected tent
atoms stay supported in 2Q.

Tent atomization is constructive: the strip cell at scale j is partitioned
by the dyadic cubes at level j-1, each restricted slice is normalized to
saturate the tent size condition, and the coefficient is the removed size
times |Q|^(1/2).  Smooth decompositions push tent atoms through the
projection and, for the smoothness-weighted space, slice each projected
atom into subatoms over the level-j cubes meeting its base cube.

Atoms produced here are normalized so every validator clause passes with
constant 1; all the looseness lands in the recorded coefficient mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product as iproduct
from typing import Optional, Sequence

import numpy as np

from .errors import GridMismatchError, ResolutionError, ValidationError
from .lattice import DyadicCube, Grid, dyadic_cubes_at_level, subcube_order
from .opfield import OperatorField, StripField, gram, herm
from .spectral import (
    LPFamily,
    apply_symbol_data,
    bessel_symbol,
    lp_family_j_max,
    multi_derivative_symbol,
)

LOG2 = math.log(2.0)


def multi_indices(d: int, max_order: int) -> list[tuple[int, ...]]:
    """All gamma in N_0^d with |gamma|_1 <= max_order, lexicographic."""
    out = []
    for gamma in iproduct(range(max_order + 1), repeat=d):
        if sum(gamma) <= max_order:
            out.append(gamma)
    return sorted(out, key=lambda g: (sum(g), g))


def l1l2_size(block_sum: np.ndarray) -> float:
    """tau((M)^(1/2)) for a PSD matrix M = integrated |a|^2 block."""
    M = 0.5 * (block_sum + herm(block_sum))
    eigs = np.clip(np.linalg.eigvalsh(M), 0.0, None)
    return float(np.sum(np.sqrt(eigs)))


def field_l1l2_size(data: np.ndarray, grid: Grid, weight: Optional[float] = None) -> float:
    """tau((sum_s w |a(s)|^2)^(1/2)); w defaults to the cell volume h^d."""
    w = grid.cell_volume if weight is None else weight
    M = np.sum(gram(data), axis=grid.spatial_axes) * w
    return l1l2_size(M)


# ---------------------------------------------------------------------------
# atom types
# ---------------------------------------------------------------------------

@dataclass
class HAtom:
    """Hardy-space atom: supported in Q (or 2Q when ``double_support``),
    size tau((int |a|^2)^(1/2)) <= |Q|^(-1/2), mean-zero when |Q| < 1."""

    cube: DyadicCube
    data: OperatorField
    double_support: bool = False
    mean_zero_required: Optional[bool] = None

    def __post_init__(self):
        if self.mean_zero_required is None:
            self.mean_zero_required = self.cube.level > 0

    @property
    def grid(self) -> Grid:
        return self.data.grid

    def embed(self) -> np.ndarray:
        return np.asarray(self.data.data)


@dataclass
class TentAtom:
    """Tent-space atom stored as a dense block over its cube.

    ``block`` has shape (n_scales, *cube_cells, n, n) holding scales
    j = j_lo .. j_lo + n_scales - 1 restricted to the cube's lattice points.
    """

    cube: DyadicCube
    j_lo: int
    block: np.ndarray

    @property
    def grid(self) -> Grid:
        return self.cube.grid

    @property
    def n(self) -> int:
        return self.block.shape[-1]

    @property
    def scales(self) -> range:
        return range(self.j_lo, self.j_lo + self.block.shape[0])

    def size(self) -> float:
        """tau((int_{T(Q)} |a|^2 ds deps/eps)^(1/2)) with the dyadic measure."""
        axes = (0,) + tuple(1 + ax for ax in range(self.grid.d))
        M = np.sum(gram(self.block), axis=axes) * (LOG2 * self.grid.cell_volume)
        return l1l2_size(M)

    def to_strip(self, j_max: int) -> StripField:
        n = self.n
        grid = self.grid
        data = np.zeros((j_max,) + grid.shape + (n, n), dtype=np.complex128)
        idx = self.cube.axis_indices()
        for k, j in enumerate(self.scales):
            data[(j - 1,) + np.ix_(*idx)] = self.block[k]
        return StripField(grid, data)

    def level_full(self, j: int) -> np.ndarray:
        """Scale-j data embedded on the full grid (zeros off the cube)."""
        grid = self.grid
        out = np.zeros(grid.shape + (self.n, self.n), dtype=np.complex128)
        if j in self.scales:
            idx = self.cube.axis_indices()
            out[np.ix_(*idx)] = self.block[j - self.j_lo]
        return out


@dataclass
class SmoothAtom:
    """Smooth atom: kind 'alpha_one', 'subatom', or 'alpha_q'.

    Data is stored as a block over the double cube 2Q (``axis_idx`` are the
    per-axis lattice indices of 2Q).  For 'alpha_q' atoms, ``subatoms``
    holds (d_coefficient, subatom) pairs with sum_l d_l a_l = atom data.
    """

    kind: str
    cube: DyadicCube
    axis_idx: list
    block: np.ndarray
    alpha: float = 0.0
    K: int = 1
    L: int = -1
    subatoms: list = field(default_factory=list)
    support_leak: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.cube.grid

    @property
    def n(self) -> int:
        return self.block.shape[-1]

    def embed(self) -> np.ndarray:
        grid = self.grid
        out = np.zeros(grid.shape + (self.n, self.n), dtype=np.complex128)
        out[np.ix_(*self.axis_idx)] = self.block
        return out

    def to_field(self) -> OperatorField:
        return OperatorField(self.grid, self.embed())


def _double_cube_axis_indices(cube: DyadicCube) -> list:
    grid = cube.grid
    half = cube.side_cells  # half-side of 2Q in cells
    if 2 * half >= grid.N:
        return [np.arange(grid.N) for _ in range(grid.d)]
    return [
        np.arange(c - half, c + half) % grid.N for c in cube.center_cells
    ]


def _extract_double_block(full: np.ndarray, cube: DyadicCube) -> tuple[list, np.ndarray]:
    idx = _double_cube_axis_indices(cube)
    return idx, full[np.ix_(*idx)]


@dataclass
class AtomicDecomposition:
    """Coefficient/atom pairs with reconstruction metadata."""

    grid: Grid
    n: int
    alpha: Optional[float]
    low_pairs: list  # (mu_coefficient, SmoothAtom alpha_one)
    high_pairs: list  # (lambda_coefficient, SmoothAtom)
    tent_pairs: list  # (lambda, TentAtom) as produced by the atomization
    residual: float
    source_norm: Optional[float]
    mass_ratio: Optional[float]

    @property
    def mass(self) -> float:
        return float(
            sum(abs(c) for c, _ in self.low_pairs)
            + sum(abs(c) for c, _ in self.high_pairs)
        )

    def reconstruct(self) -> OperatorField:
        out = np.zeros(self.grid.shape + (self.n, self.n), dtype=np.complex128)
        for c, atom in self.low_pairs:
            out += c * atom.embed()
        for c, atom in self.high_pairs:
            out += c * atom.embed()
        return OperatorField(self.grid, out)


# ---------------------------------------------------------------------------
# validators
# ---------------------------------------------------------------------------

@dataclass
class Clause:
    name: str
    passed: bool
    measured: float
    bound: float

    @property
    def slack(self) -> float:
        return self.bound - self.measured


@dataclass
class ValidationReport:
    atom_kind: str
    clauses: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def failures(self) -> list:
        return [c for c in self.clauses if not c.passed]

    def to_text(self) -> str:
        lines = [f"[validate:{self.atom_kind}] passed = {self.passed}"]
        for c in self.clauses:
            lines.append(
                f"{c.name}: measured = {c.measured:.6e} bound = {c.bound:.6e} "
                f"pass = {c.passed}"
            )
        return "\n".join(lines) + "\n"


SUPPORT_RTOL = 1e-10
SIZE_SLACK = 1e-9
MOMENT_RTOL = 1e-10


def _support_clause(full: np.ndarray, mask: np.ndarray, name: str) -> Clause:
    total = float(np.sum(np.abs(full) ** 2))
    if total == 0.0:
        return Clause(name, True, 0.0, SUPPORT_RTOL)
    outside = float(np.sum(np.abs(full[~mask]) ** 2))
    rel = math.sqrt(outside / total)
    return Clause(name, rel <= SUPPORT_RTOL, rel, SUPPORT_RTOL)


def validate_h_atom(atom: HAtom) -> ValidationReport:
    grid = atom.grid
    mask = atom.cube.double_mask() if atom.double_support else atom.cube.mask()
    clauses = [_support_clause(atom.data.data, mask, "support")]
    size = field_l1l2_size(atom.data.data, grid)
    bound = atom.cube.volume**-0.5 * (1.0 + SIZE_SLACK)
    clauses.append(Clause("size", size <= bound, size, bound))
    if atom.mean_zero_required:
        mean = np.sum(atom.data.data, axis=grid.spatial_axes) * grid.cell_volume
        scale = float(np.sum(np.abs(atom.data.data))) * grid.cell_volume
        dev = float(np.linalg.norm(mean))
        bound_m = MOMENT_RTOL * max(scale, 1e-300)
        clauses.append(Clause("moment", dev <= bound_m, dev, bound_m))
    return ValidationReport("h_atom", clauses)


def validate_tent_atom(atom: TentAtom, j_max: Optional[int] = None) -> ValidationReport:
    grid = atom.grid
    clauses = []
    j_top = lp_family_j_max(grid) if j_max is None else j_max
    lo_ok = atom.j_lo >= max(atom.cube.level, 1)
    hi_ok = atom.scales.stop - 1 <= j_top
    in_tent = 1.0 if (lo_ok and hi_ok) else 0.0
    clauses.append(Clause("support_in_tent", lo_ok and hi_ok, 1.0 - in_tent, 0.5))
    size = atom.size()
    bound = atom.cube.volume**-0.5 * (1.0 + SIZE_SLACK)
    clauses.append(Clause("size", size <= bound, size, bound))
    return ValidationReport("tent_atom", clauses)


def _derivative_sizes(embedded: np.ndarray, grid: Grid, gammas: Sequence[tuple],
                      ) -> dict:
    out = {}
    for gamma in gammas:
        sym = multi_derivative_symbol(grid, gamma)
        dg = apply_symbol_data(sym.values, embedded, grid)
        out[gamma] = field_l1l2_size(dg, grid)
    return out


def _moments(embedded: np.ndarray, grid: Grid, cube: DyadicCube, L: int) -> dict:
    """Centered discrete moments sum_s h^d s_per^beta a(s) for |beta|_1 <= L."""
    if L < 0:
        return {}
    coords = grid.signed_coords_about(cube.center)
    out = {}
    for beta in multi_indices(grid.d, L):
        w = np.ones(grid.shape)
        for ax, b in enumerate(beta):
            if b:
                w = w * coords[..., ax] ** b
        m = np.sum(w[..., None, None] * embedded, axis=grid.spatial_axes) * grid.cell_volume
        out[beta] = float(np.linalg.norm(m))
    return out


def validate_smooth_atom(atom: SmoothAtom, size_constant: float = 1.0) -> ValidationReport:
    """Clause-by-clause check of an alpha_one / subatom / alpha_q atom."""
    grid = atom.grid
    clauses = []
    if atom.kind == "alpha_one":
        full = atom.embed()
        clauses.append(_support_clause(full, atom.cube.double_mask(), "support_2Q"))
        sizes = _derivative_sizes(full, grid, multi_indices(grid.d, atom.K))
        bound = 1.0 + SIZE_SLACK
        for gamma, s in sizes.items():
            clauses.append(Clause(f"derivative{gamma}", s <= bound, s, bound))
    elif atom.kind == "subatom":
        full = atom.embed()
        clauses.append(_support_clause(full, atom.cube.double_mask(), "support_2Q"))
        vol = atom.cube.volume
        for gamma, s in _derivative_sizes(full, grid, multi_indices(grid.d, atom.K)).items():
            bound = vol ** (atom.alpha / grid.d - sum(gamma) / grid.d) * (1.0 + SIZE_SLACK)
            clauses.append(Clause(f"derivative{gamma}", s <= bound, s, bound))
        l1_mass = float(np.sum(np.abs(full))) * grid.cell_volume
        for beta, dev in _moments(full, grid, atom.cube, atom.L).items():
            bound_m = MOMENT_RTOL * max(l1_mass, 1e-300)
            clauses.append(Clause(f"moment{beta}", dev <= bound_m, dev, bound_m))
    elif atom.kind == "alpha_q":
        full = atom.embed()
        # the paper's remark fixes support of the pieces in 2Q of their own
        # cubes; the assembled atom then lives in the union, inside 4Q_{k,m};
        # we check the assembled support against 2Q of the base cube, which
        # our single-scale construction satisfies.
        clauses.append(_support_clause(full, atom.cube.double_mask(), "support_2Q"))
        ja = apply_symbol_data(bessel_symbol(grid, atom.alpha).values, full, grid)
        size = field_l1l2_size(ja, grid)
        bound = size_constant * atom.cube.volume**-0.5 * (1.0 + SIZE_SLACK)
        clauses.append(Clause("bessel_size", size <= bound, size, bound))
        coef_l2 = math.sqrt(sum(abs(d) ** 2 for d, _ in atom.subatoms))
        bound_c = atom.cube.volume**-0.5 * (1.0 + SIZE_SLACK)
        clauses.append(Clause("coefficient_l2", coef_l2 <= bound_c, coef_l2, bound_c))
        order_ok = all(subcube_order(sub.cube, atom.cube) for _, sub in atom.subatoms)
        clauses.append(Clause("subcube_order", order_ok, 0.0 if order_ok else 1.0, 0.5))
        recon = np.zeros_like(full)
        for d_c, sub in atom.subatoms:
            recon += d_c * sub.embed()
        scale = max(float(np.max(np.abs(full))), 1e-300)
        dev = float(np.max(np.abs(recon - full))) / scale
        clauses.append(Clause("subatom_reconstruction", dev <= 1e-10, dev, 1e-10))
        for _, sub in atom.subatoms:
            rep = validate_smooth_atom(sub)
            clauses.append(
                Clause("subatoms_valid", rep.passed, 0.0 if rep.passed else 1.0, 0.5)
            )
            if not rep.passed:
                break
    else:
        raise ValueError(f"unknown smooth atom kind {atom.kind!r}")
    return ValidationReport(atom.kind, clauses)


def validate_atom(atom, **kwargs) -> ValidationReport:
    """Dispatch on atom type; failures are data, not exceptions."""
    if isinstance(atom, HAtom):
        return validate_h_atom(atom)
    if isinstance(atom, TentAtom):
        return validate_tent_atom(atom, **kwargs)
    if isinstance(atom, SmoothAtom):
        return validate_smooth_atom(atom, **kwargs)
    raise TypeError(f"not an atom: {type(atom)!r}")


# ---------------------------------------------------------------------------
# reproducing system (Calderon-type resolution)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalderonSystem:
    """Level symbols Psi_j (mean-zero, spatial support in the half-cube of
    side 2^-j) plus the exact low-frequency complement phi0."""

    grid: Grid
    n_pow: int
    j_max: int
    level_values: tuple
    phi0_values: np.ndarray
    kappa_gamma: float
    coverage_floor: float
    phi0_tail_mass: float

    def level(self, j: int) -> np.ndarray:
        return self.level_values[j - 1]

    def identity_defect(self) -> float:
        total = np.array(self.phi0_values, copy=True)
        for v in self.level_values:
            total = total + v * v
        return float(np.max(np.abs(total - 1.0)))


def _bump(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    inside = u < 1.0
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui**2))
    return out


def _stencil(grid: Grid, j: int, n_pow: int, kappa_gamma: float) -> np.ndarray:
    """Spatial level kernel at scale j embedded on the grid (support in the
    closed cube |m| <= N 2^-(j+1) cells, exactly zero mean)."""
    N = grid.N
    R = N >> (j + 1)
    margin = n_pow // 2
    r_cells = R - margin
    if r_cells < 0:
        raise ResolutionError(f"scale j={j} cannot host a stencil with n_pow={n_pow}")
    axis = np.arange(-r_cells, r_cells + 1) if r_cells > 0 else np.array([0])
    mesh = np.meshgrid(*([axis] * grid.d), indexing="ij")
    u = np.sqrt(sum(m.astype(float) ** 2 for m in mesh)) / (r_cells + 1.0)
    rho = (r_cells + 1.0) * grid.h  # continuum support radius of the bump
    kappa = np.exp(-kappa_gamma * u**2) * _bump(u) / rho**grid.d
    # embed and apply the dilated operator (-rho^2 (2 pi)^-2 Delta_h)^(n_pow/2):
    # the rho^2 chain-rule factor keeps the symbol family scale-covariant,
    # Psi_raw_j(xi) ~ Phi_hat(rho_j xi) with O(1) amplitude on its annulus
    full = np.zeros(grid.shape)
    idx = [ax % N for ax in ([axis] * grid.d)]
    full[np.ix_(*idx)] = kappa
    h_sq = grid.h**2
    for _ in range(margin):
        lap = np.zeros_like(full)
        for ax in range(grid.d):
            lap += np.roll(full, 1, axis=ax) + np.roll(full, -1, axis=ax) - 2.0 * full
        full = -lap * rho**2 / ((2.0 * math.pi) ** 2 * h_sq)
    # force an exactly-zero sum (one correction on the center cell)
    s = full.sum()
    full[(0,) * grid.d] -= s
    return full


@lru_cache(maxsize=16)
def calderon_resolution(grid: Grid, n_pow: int = 2, kappa_gamma: float = 2.0,
                        j_max: Optional[int] = None) -> CalderonSystem:
    """Build the discrete reproducing system for the grid.

    Returns level symbols with sum_j Psi_j^2 <= 1 (global normalization by
    the sup of the raw square sum) and phi0 = 1 - sum_j Psi_j^2 exactly.
    Raises ResolutionError when the raw square sum vanishes somewhere on a
    needed annulus.
    """
    if n_pow < 2 or n_pow % 2:
        raise ValueError("n_pow must be a positive even integer >= 2")
    top = lp_family_j_max(grid) if j_max is None else j_max
    raw = []
    for j in range(1, top + 1):
        sten = _stencil(grid, j, n_pow, kappa_gamma)
        sym = np.fft.fftn(sten).real * grid.cell_volume
        raw.append(sym)
    sq = np.zeros(grid.shape)
    for v in raw:
        sq = sq + v * v
    r = grid.freq_norm
    for j in range(1, top + 1):
        annulus = (r >= 2.0 ** (j - 1)) & (r <= 2.0**j)
        if np.any(annulus) and float(np.max(sq[annulus])) <= 0.0:
            raise ResolutionError(f"normalizer vanishes on the annulus of scale j={j}")
    c = float(np.max(sq))
    if c <= 0.0:
        raise ResolutionError("normalizer vanishes identically")
    levels = tuple(np.asarray(v / math.sqrt(c)) for v in raw)
    total = np.zeros(grid.shape)
    for v in levels:
        total = total + v * v
    phi0 = 1.0 - total
    covered = (r >= 1.0) & (r <= 2.0**top)
    floor = float(np.min(total[covered])) if np.any(covered) else 0.0
    # diagnostic: relative spatial mass of phi0's kernel outside |s| <= 1/4
    phi0_spatial = np.fft.ifftn(phi0.astype(complex))
    s_abs = np.sqrt(np.sum(grid.signed_coords**2, axis=-1))
    m_out = float(np.sum(np.abs(phi0_spatial[s_abs > 0.25])))
    m_tot = float(np.sum(np.abs(phi0_spatial)))
    return CalderonSystem(
        grid=grid,
        n_pow=n_pow,
        j_max=top,
        level_values=levels,
        phi0_values=phi0,
        kappa_gamma=kappa_gamma,
        coverage_floor=floor,
        phi0_tail_mass=m_out / m_tot if m_tot > 0 else 0.0,
    )


# ---------------------------------------------------------------------------
# projection from the strip
# ---------------------------------------------------------------------------

def _check_mean_zero_levels(cal: CalderonSystem, scales) -> None:
    for j in scales:
        v = cal.level(j)
        scale = float(np.max(np.abs(v)))
        if scale > 0 and abs(float(v[(0,) * cal.grid.d])) > 1e-12 * scale:
            raise ValidationError(f"level kernel {j} has nonzero mean")


def project_tent(F, cal: CalderonSystem) -> OperatorField:
    """pi(F)(s) = log2 * sum_j (Psi_j * F(., 2^-j))(s).

    For a TentAtom input the output is supported in 2Q (exact stencil
    support), has exactly vanishing mean, and satisfies the L1(M;L2)
    size bound with the measured constant.
    """
    grid = cal.grid
    if isinstance(F, TentAtom):
        scales = [j for j in F.scales if j <= cal.j_max]
        _check_mean_zero_levels(cal, scales)
        n = F.n
        out = np.zeros(grid.shape + (n, n), dtype=np.complex128)
        for j in scales:
            out += apply_symbol_data(cal.level(j), F.level_full(j), grid)
        return OperatorField(grid, LOG2 * out)
    if isinstance(F, StripField):
        if F.grid != grid:
            raise GridMismatchError("strip grid does not match system grid")
        scales = range(1, min(F.j_max, cal.j_max) + 1)
        _check_mean_zero_levels(cal, scales)
        out = np.zeros(grid.shape + (F.n, F.n), dtype=np.complex128)
        for j in scales:
            out += apply_symbol_data(cal.level(j), F.level(j), grid)
        return OperatorField(grid, LOG2 * out)
    raise TypeError("project_tent expects a StripField or TentAtom")


# ---------------------------------------------------------------------------
# constructive tent atomization
# ---------------------------------------------------------------------------

def _cube_blocks(data: np.ndarray, grid: Grid, level: int) -> tuple[np.ndarray, list]:
    """Reshape (*shape, n, n) data into per-cube blocks at ``level``.

    Returns (blocks, cubes): blocks[i] is the data over cubes[i], shaped
    (*cube_cells, n, n); cube order is lexicographic in the index.
    """
    n = data.shape[-1]
    side = grid.N >> level
    half = side // 2
    out = data
    for ax in range(grid.d):
        out = np.roll(out, half, axis=ax)
    shape = []
    for _ in range(grid.d):
        shape += [1 << level, side]
    shape += [n, n]
    out = out.reshape(shape)
    # bring cube axes to the front: (l1, l2, ..., b1, b2, ..., n, n)
    perm = [2 * k for k in range(grid.d)] + [2 * k + 1 for k in range(grid.d)]
    perm += [2 * grid.d, 2 * grid.d + 1]
    out = np.transpose(out, perm)
    cubes_n = (1 << level) ** grid.d
    blocks = out.reshape((cubes_n,) + (side,) * grid.d + (n, n))
    cubes = dyadic_cubes_at_level(grid, level)
    return blocks, cubes


def tent_atomize(F: StripField, rel_size_floor: float = 1e-14) -> list:
    """Exact constructive atomization of a strip field.

    Scale j is partitioned by the dyadic cubes at level j-1; each restricted
    slice is normalized to saturate the tent size condition exactly.  Slices
    whose size falls below ``rel_size_floor`` times the largest slice size
    are dropped (round-off debris, e.g. annulus kernels hitting the mean
    mode); the reconstruction defect this introduces is of the same relative
    order.
    """
    grid = F.grid
    all_sizes = []
    per_scale = []
    for j in range(1, F.j_max + 1):
        level = j - 1
        blocks, cubes = _cube_blocks(F.level(j), grid, level)
        sum_axes = tuple(1 + ax for ax in range(grid.d))
        mats = np.sum(gram(blocks), axis=sum_axes) * (LOG2 * grid.cell_volume)
        eigs = np.clip(np.linalg.eigvalsh(0.5 * (mats + herm(mats))), 0.0, None)
        sizes = np.sum(np.sqrt(eigs), axis=-1)
        per_scale.append((j, blocks, cubes, sizes))
        all_sizes.append(float(sizes.max()) if sizes.size else 0.0)
    top = max(all_sizes) if all_sizes else 0.0
    floor = rel_size_floor * top
    pairs = []
    for j, blocks, cubes, sizes in per_scale:
        for i, cube in enumerate(cubes):
            size = float(sizes[i])
            if size <= floor or size == 0.0:
                continue
            lam = size * math.sqrt(cube.volume)
            atom_block = blocks[i][None] / lam
            pairs.append((lam, TentAtom(cube=cube, j_lo=j, block=atom_block)))
    return pairs


# ---------------------------------------------------------------------------
# smooth decompositions
# ---------------------------------------------------------------------------

def _normalize_alpha_one(low: np.ndarray, grid: Grid, K: int, alpha: float) -> tuple:
    """Normalize phi0 * f into a single (alpha,1)-style unit-cube atom."""
    cube = DyadicCube(grid, 0, (0,) * grid.d)
    sizes = _derivative_sizes(low, grid, multi_indices(grid.d, K))
    mu = max(sizes.values())
    if mu == 0.0:
        return 0.0, None
    idx = [np.arange(grid.N) for _ in range(grid.d)]
    atom = SmoothAtom(kind="alpha_one", cube=cube, axis_idx=idx, block=low / mu,
                      alpha=alpha, K=K)
    return mu, atom


def _subatom_cells(cube: DyadicCube) -> list:
    """Level-(level+1) cubes meeting ``cube`` (up to 3 per axis; fewer when
    the wraparound identifies 2m-1 with 2m+1 at coarse levels)."""
    grid = cube.grid
    lvl = cube.level + 1
    modulus = 1 << lvl
    per_axis = []
    for m in cube.index:
        raw = [(2 * m - 1) % modulus, (2 * m) % modulus, (2 * m + 1) % modulus]
        per_axis.append(sorted(set(raw)))
    return [DyadicCube(grid, lvl, tuple(combo)) for combo in iproduct(*per_axis)]


def _slice_alpha_q(g_full: np.ndarray, tent_block: np.ndarray, lam_scale: float,
                   cube: DyadicCube, j: int, cal: CalderonSystem, alpha: float,
                   K: int, L: int, size_constant: float) -> tuple:
    """Package a projected tent atom as an alpha_q atom with subatoms.

    ``tent_block`` is the (single-scale) tent data over ``cube`` whose
    projection is ``g_full``; writes the atom normalized so every clause
    passes with constant 1, returning (rescale, SmoothAtom).
    """
    grid = cube.grid
    n = tent_block.shape[-1]
    cells = _subatom_cells(cube)
    cube_sel = np.zeros(grid.shape, dtype=bool)
    cube_sel[np.ix_(*cube.axis_indices())] = True
    embedded = _embed_cube_block(tent_block, cube, grid)
    pieces = []
    for cell in cells:
        sel = cube_sel & cell.mask()
        masked = np.zeros(grid.shape + (n, n), dtype=np.complex128)
        masked[sel] = embedded[sel]
        piece = LOG2 * apply_symbol_data(cal.level(j), masked, grid)
        pieces.append((cell, piece))
    gammas = multi_indices(grid.d, K)
    sub_pairs = []
    for cell, piece in pieces:
        sizes = _derivative_sizes(piece, grid, gammas)
        vol = cell.volume
        d_c = 0.0
        for gamma, s in sizes.items():
            bound = vol ** (alpha / grid.d - sum(gamma) / grid.d)
            d_c = max(d_c, s / bound)
        if d_c == 0.0:
            continue
        idx, block = _extract_double_block(piece / d_c, cell)
        leak = _support_clause(piece, cell.double_mask(), "support").measured
        sub = SmoothAtom(kind="subatom", cube=cell, axis_idx=idx, block=block,
                         alpha=alpha, K=K, L=L, support_leak=leak)
        sub_pairs.append((d_c, sub))
    # saturation against the atom-level clauses
    ja = apply_symbol_data(bessel_symbol(grid, alpha).values, g_full, grid)
    rho1 = field_l1l2_size(ja, grid) * math.sqrt(cube.volume) / size_constant
    rho2 = math.sqrt(sum(d * d for d, _ in sub_pairs)) * math.sqrt(cube.volume)
    rho = max(rho1, rho2)
    if rho <= 1e-250:
        return 0.0, None
    idx, block = _extract_double_block(g_full / rho, cube)
    leak = _support_clause(g_full, cube.double_mask(), "support").measured
    atom = SmoothAtom(kind="alpha_q", cube=cube, axis_idx=idx, block=block,
                      alpha=alpha, K=K, L=L,
                      subatoms=[(d / rho, s) for d, s in sub_pairs],
                      support_leak=leak)
    return lam_scale * rho, atom


def _embed_cube_block(block: np.ndarray, cube: DyadicCube, grid: Grid) -> np.ndarray:
    n = block.shape[-1]
    out = np.zeros(grid.shape + (n, n), dtype=np.complex128)
    out[np.ix_(*cube.axis_indices())] = block
    return out


def _filter_negligible(pairs: list, f: OperatorField, rel: float = 1e-14) -> list:
    """Drop tent atoms whose coefficient is round-off debris against ||f||_2
    (e.g. annulus kernels applied to the mean mode)."""
    scale = math.sqrt(float(np.sum(np.abs(f.data) ** 2)) * f.grid.cell_volume)
    floor = rel * scale
    return [(lam, atom) for lam, atom in pairs if abs(lam) > floor]


def smooth_decompose_h1(f: OperatorField, cal: Optional[CalderonSystem] = None,
                        K: int = 1, family: Optional[LPFamily] = None,
                        compute_norm: bool = True) -> AtomicDecomposition:
    """Smooth atomic decomposition of the local Hardy space at p = 1.

    Pipeline: split f = phi0*f + sum_j Psi_j*(Psi_j*f); the low part becomes
    one smooth unit-cube atom, the strip part is tent-atomized and each tent
    atom is projected to a mean-zero smooth atom supported in 2Q.
    """
    grid = f.grid
    if cal is None:
        cal = calderon_resolution(grid, n_pow=2)
    strip = np.stack(
        [apply_symbol_data(cal.level(j), f.data, grid) for j in range(1, cal.j_max + 1)]
    )
    F = StripField(grid, strip)
    tent_pairs = _filter_negligible(tent_atomize(F), f)
    low = apply_symbol_data(cal.phi0_values, f.data, grid)
    mu, low_atom = _normalize_alpha_one(low, grid, K, alpha=0.0)
    low_pairs = [] if low_atom is None else [(mu, low_atom)]
    high_pairs = []
    for lam, atom in tent_pairs:
        g = project_tent(atom, cal)
        size = field_l1l2_size(g.data, grid)
        bound = atom.cube.volume**-0.5
        rho = size / bound
        if rho <= 1e-250:
            continue
        h_atom = HAtom(cube=atom.cube, data=OperatorField(grid, g.data / rho),
                       double_support=True, mean_zero_required=atom.cube.level > 0)
        high_pairs.append((lam * rho / LOG2, h_atom))
    dec = AtomicDecomposition(
        grid=grid, n=f.n, alpha=None,
        low_pairs=low_pairs, high_pairs=high_pairs, tent_pairs=tent_pairs,
        residual=0.0, source_norm=None, mass_ratio=None,
    )
    rec = dec.reconstruct()
    denom = math.sqrt(float(np.sum(np.abs(f.data) ** 2)))
    dev = math.sqrt(float(np.sum(np.abs(rec.data - f.data) ** 2)))
    dec.residual = dev / denom if denom > 0 else dev
    if compute_norm and denom > 0:
        from .normsuite import hardy_norm
        from .spectral import make_lp_family

        fam = family if family is not None else make_lp_family(grid)
        dec.source_norm = hardy_norm(f, 1.0, mode="lp", family=fam).value
        dec.mass_ratio = dec.mass / dec.source_norm if dec.source_norm > 0 else None
    return dec


def required_k_floor(alpha: float) -> int:
    return max(int(math.floor(alpha)) + 1, 0)


def required_l_floor(alpha: float) -> int:
    # at alpha = 0 exactly, L = -1 is admitted (h1-compatible degeneration:
    # the projected atoms carry exact zero mean by construction)
    if alpha == 0.0:
        return -1
    return max(int(math.floor(-alpha)), -1)


def smooth_decompose_tl(f: OperatorField, alpha: float, K: int, L: int,
                        cal: Optional[CalderonSystem] = None,
                        family: Optional[LPFamily] = None,
                        size_constant: float = 1.0,
                        compute_norm: bool = True) -> AtomicDecomposition:
    """Smooth atomic decomposition of the smoothness-alpha space at p = 1,
    with (alpha,1)-atoms for the low part and (alpha,Q)-atoms with subatom
    trees for the strip part."""
    grid = f.grid
    if K < required_k_floor(alpha):
        raise ValueError(f"K must be >= {required_k_floor(alpha)} for alpha={alpha}")
    if L < required_l_floor(alpha):
        raise ValueError(f"L must be >= {required_l_floor(alpha)} for alpha={alpha}")
    if cal is None:
        n_pow = max(2, 2 * ((L + 2) // 2), 2 * ((int(math.ceil(alpha)) + 1) // 2))
        cal = calderon_resolution(grid, n_pow=n_pow)
    weighted = np.stack(
        [4.0 ** (j * alpha / 2.0) * apply_symbol_data(cal.level(j), f.data, grid)
         for j in range(1, cal.j_max + 1)]
    )
    F = StripField(grid, weighted)
    tent_pairs = _filter_negligible(tent_atomize(F), f)
    low = apply_symbol_data(cal.phi0_values, f.data, grid)
    mu, low_atom = _normalize_alpha_one(low, grid, K, alpha=alpha)
    low_pairs = [] if low_atom is None else [(mu, low_atom)]
    high_pairs = []
    for lam, atom in tent_pairs:
        j = atom.j_lo
        unweighted_block = atom.block[0] * 2.0 ** (-j * alpha)
        g_full = LOG2 * apply_symbol_data(
            cal.level(j), _embed_cube_block(unweighted_block, atom.cube, grid), grid
        )
        coef, smooth = _slice_alpha_q(
            g_full, unweighted_block, lam / LOG2, atom.cube, j, cal,
            alpha, K, L, size_constant,
        )
        if smooth is not None:
            high_pairs.append((coef, smooth))
    dec = AtomicDecomposition(
        grid=grid, n=f.n, alpha=alpha,
        low_pairs=low_pairs, high_pairs=high_pairs, tent_pairs=tent_pairs,
        residual=0.0, source_norm=None, mass_ratio=None,
    )
    rec = dec.reconstruct()
    denom = math.sqrt(float(np.sum(np.abs(f.data) ** 2)))
    dev = math.sqrt(float(np.sum(np.abs(rec.data - f.data) ** 2)))
    dec.residual = dev / denom if denom > 0 else dev
    if compute_norm and denom > 0:
        from .normsuite import tl_norm_column
        from .spectral import make_lp_family

        fam = family if family is not None else make_lp_family(grid)
        dec.source_norm = tl_norm_column(f, alpha, 1.0, fam).value
        dec.mass_ratio = dec.mass / dec.source_norm if dec.source_norm > 0 else None
    return dec


# ---------------------------------------------------------------------------
# pointwise multipliers
# ---------------------------------------------------------------------------

def pointwise_multiply_test(h: OperatorField, f: OperatorField, alpha: float,
                            family: LPFamily, k_der: int = 2,
                            margin: float = 10.0) -> dict:
    """Measure ||h f||_{F1^alpha} / ||f||_{F1^alpha} against the derivative
    bound sum_{|gamma|_1 <= k} sup_s ||D^gamma h(s)||_op."""
    from .normsuite import tl_norm_column

    grid = f.grid
    hf = OperatorField(grid, h.data @ f.data)
    num = tl_norm_column(hf, alpha, 1.0, family).value
    den = tl_norm_column(f, alpha, 1.0, family).value
    ratio = num / den if den > 0 else 0.0
    bound = 0.0
    for gamma in multi_indices(grid.d, k_der):
        dg = apply_symbol_data(multi_derivative_symbol(grid, gamma).values, h.data, grid)
        bound += float(np.max(np.linalg.svd(dg, compute_uv=False)))
    return {
        "ratio": ratio,
        "derivative_bound": bound,
        "margin": margin,
        "passed": bool(ratio <= margin * bound),
        "alpha": alpha,
        "k": k_der,
    }


# ---------------------------------------------------------------------------
# atom generators (converse-direction experiments)
# ---------------------------------------------------------------------------

def random_alpha_one_atom(grid: Grid, n: int, alpha: float, K: int, seed: int,
                          band_radius: Optional[float] = None) -> SmoothAtom:
    """Band-limited random field normalized to saturate the worst derivative
    clause of an (alpha,1)-atom."""
    from .generators import band_limited_random

    r_max = grid.N / 8.0 if band_radius is None else band_radius
    f = band_limited_random(grid, n, seed, r_max=r_max)
    _, atom = _normalize_alpha_one(np.asarray(f.data), grid, K, alpha)
    if atom is None:
        raise ValueError("degenerate random atom")
    return atom


def random_alpha_q_atom(grid: Grid, n: int, alpha: float, K: int, L: int,
                        level: int, seed: int,
                        cal: Optional[CalderonSystem] = None,
                        size_constant: float = 1.0) -> SmoothAtom:
    """Random tent atom on a random cube at ``level``, pushed through the
    projection + subatom slicing; every clause saturated at constant 1."""
    from .generators import rng_for

    if cal is None:
        n_pow = max(2, 2 * ((L + 2) // 2), 2 * ((int(math.ceil(alpha)) + 1) // 2))
        cal = calderon_resolution(grid, n_pow=n_pow)
    j = level + 1
    if j > cal.j_max:
        raise ResolutionError(f"level {level} needs scale {j} > system j_max {cal.j_max}")
    rng = rng_for(seed)
    idx = tuple(int(rng.integers(0, 1 << level)) for _ in range(grid.d))
    cube = DyadicCube(grid, level, idx)
    side = cube.side_cells
    block = rng.normal(size=(side,) * grid.d + (n, n)) + 1j * rng.normal(
        size=(side,) * grid.d + (n, n)
    )
    # saturate the weighted tent size (the eps^-alpha weighted bound)
    M = np.sum(gram(block), axis=tuple(range(grid.d))) * (
        LOG2 * grid.cell_volume * 4.0 ** (j * alpha)
    )
    size = l1l2_size(M)
    block = block / (size * math.sqrt(cube.volume))
    g_full = LOG2 * apply_symbol_data(
        cal.level(j), _embed_cube_block(block, cube, grid), grid
    )
    _, atom = _slice_alpha_q(g_full, block, 1.0, cube, j, cal, alpha, K, L,
                             size_constant)
    return atom
