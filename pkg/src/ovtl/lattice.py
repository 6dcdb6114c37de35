"""Discretization of the periodic unit cube as an N-per-axis lattice.

The torus has volume 1, spatial spacing h = 1/N, and the frequency lattice
is the set of integer vectors in [-N/2, N/2)^d.  Dyadic cubes follow the
centered convention: the cube at level ``mu`` with index ``l`` is centered
at 2^-mu * l and has side length 2^-mu, with half-open membership per axis
and periodic wraparound.  Truncated-cone index sets collect, per dyadic
scale 2^-j, the lattice offsets strictly inside the Euclidean ball of
radius 2^-j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ResolutionError

# volume of the d-dimensional Euclidean unit ball, d = 1, 2, 3
UNIT_BALL_VOLUME = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}


@dataclass(frozen=True)
class Grid:
    """Periodic lattice on [0,1)^d with N points per axis (N a power of two)."""

    d: int
    N: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.N < 16 or (self.N & (self.N - 1)) != 0:
            raise ValueError(f"N must be a power of two >= 16, got {self.N}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def npoints(self) -> int:
        return self.N**self.d

    @property
    def spatial_axes(self) -> tuple[int, ...]:
        return tuple(range(self.d))

    @property
    def max_cube_level(self) -> int:
        # finest level whose cubes still contain >= 2 lattice points per axis
        return self.N.bit_length() - 2

    @property
    def max_scale(self) -> int:
        # finest dyadic scale 2^-j with 2^-j >= 2h
        return self.N.bit_length() - 2

    @cached_property
    def freq_axis(self) -> np.ndarray:
        """Integer frequencies along one axis in FFT storage order."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N)

    @cached_property
    def freqs(self) -> np.ndarray:
        """Frequency vectors, shape (*shape, d)."""
        axes = np.meshgrid(*([self.freq_axis] * self.d), indexing="ij")
        return np.stack(axes, axis=-1)

    @cached_property
    def freq_norm(self) -> np.ndarray:
        """Euclidean norm |xi| of each lattice frequency, shape ``shape``."""
        return np.sqrt(np.sum(self.freqs**2, axis=-1))

    @cached_property
    def signed_index_axis(self) -> np.ndarray:
        """Signed lattice indices in [-N/2, N/2) in storage order."""
        return np.rint(self.freq_axis).astype(np.int64)

    @cached_property
    def signed_coords(self) -> np.ndarray:
        """Signed periodic spatial coordinates in [-1/2, 1/2)^d, shape (*shape, d)."""
        axis = self.signed_index_axis * self.h
        axes = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack(axes, axis=-1)

    @cached_property
    def coords(self) -> np.ndarray:
        """Spatial coordinates in [0,1)^d in storage order, shape (*shape, d)."""
        axis = np.arange(self.N) * self.h
        axes = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack(axes, axis=-1)

    def signed_coords_about(self, center: np.ndarray) -> np.ndarray:
        """Signed periodic coordinates s - center wrapped to [-1/2, 1/2)^d."""
        delta = self.coords - np.asarray(center, dtype=float)
        return delta - np.round(delta)


@dataclass(frozen=True)
class DyadicCube:
    """Dyadic cube Q at ``level`` with integer index ``index`` (mod 2^level).

    Center 2^-level * index, side length 2^-level, half-open per axis,
    periodic wraparound on the torus.
    """

    grid: Grid
    level: int
    index: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("cube level must be nonnegative")
        if len(self.index) != self.grid.d:
            raise ValueError("cube index dimension mismatch")
        if self.grid.N >> self.level < 2:
            raise ResolutionError(
                f"cube side 2^-{self.level} below two lattice cells (N={self.grid.N})"
            )
        object.__setattr__(
            self, "index", tuple(i % (1 << self.level) for i in self.index)
        )

    @property
    def side(self) -> float:
        return 2.0**-self.level

    @property
    def volume(self) -> float:
        return 2.0 ** (-self.level * self.grid.d)

    @property
    def center(self) -> np.ndarray:
        return np.array(self.index, dtype=float) * self.side

    @property
    def side_cells(self) -> int:
        """Side length in lattice cells."""
        return self.grid.N >> self.level

    @property
    def center_cells(self) -> tuple[int, ...]:
        return tuple((i * self.side_cells) % self.grid.N for i in self.index)

    def axis_indices(self) -> list[np.ndarray]:
        """Per-axis lattice indices of the cube's points (wraparound applied)."""
        half = self.side_cells // 2
        out = []
        for c in self.center_cells:
            out.append((np.arange(c - half, c - half + self.side_cells)) % self.grid.N)
        return out

    def mask(self) -> np.ndarray:
        """Boolean membership mask over the grid, half-open per axis."""
        half = self.side_cells // 2
        m = np.ones(self.grid.shape, dtype=bool)
        idx = np.arange(self.grid.N)
        for ax, c in enumerate(self.center_cells):
            on_axis = ((idx - c + half) % self.grid.N) < self.side_cells
            sh = [1] * self.grid.d
            sh[ax] = self.grid.N
            m &= on_axis.reshape(sh)
        return m

    def npoints(self) -> int:
        return self.side_cells**self.grid.d

    def double_mask(self) -> np.ndarray:
        """Membership mask of the doubled cube 2Q (periodic)."""
        half = self.side_cells  # half-side of 2Q in cells
        if 2 * half >= self.grid.N:
            return np.ones(self.grid.shape, dtype=bool)
        m = np.ones(self.grid.shape, dtype=bool)
        idx = np.arange(self.grid.N)
        for ax, c in enumerate(self.center_cells):
            on_axis = ((idx - c + half) % self.grid.N) < 2 * half
            sh = [1] * self.grid.d
            sh[ax] = self.grid.N
            m &= on_axis.reshape(sh)
        return m


def dyadic_cubes_at_level(grid: Grid, level: int) -> list[DyadicCube]:
    """All 2^(level*d) cubes tiling the torus at the given level."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    if grid.N >> level < 2:
        raise ResolutionError(
            f"level {level} too fine: side 2^-{level} < 2h for N={grid.N}"
        )
    n_per_axis = 1 << level
    cubes = []
    for flat in range(n_per_axis**grid.d):
        idx = []
        rem = flat
        for _ in range(grid.d):
            idx.append(rem % n_per_axis)
            rem //= n_per_axis
        cubes.append(DyadicCube(grid, level, tuple(reversed(idx))))
    return cubes


def subcube_order(a: DyadicCube, b: DyadicCube) -> bool:
    """Partial order (mu,l) <= (mu',l'): mu >= mu' and Q_{mu,l} inside 2Q_{mu',l'}.

    Interval inclusion per axis with periodic wraparound; boundaries follow
    the half-open convention on both cubes.
    """
    if a.grid != b.grid:
        raise ValueError("cubes live on different grids")
    if a.level < b.level:
        return False
    N = a.grid.N
    half_a = a.side_cells // 2
    half_2b = b.side_cells  # half-side of 2Q'
    if 2 * half_2b >= N:
        return True  # doubled cube covers the torus
    for ax in range(a.grid.d):
        da = a.center_cells[ax] - b.center_cells[ax]
        da = (da + N // 2) % N - N // 2  # wrap to [-N/2, N/2)
        if da - half_a < -half_2b or da + half_a > half_2b:
            return False
    return True


@dataclass(frozen=True)
class ConeIndex:
    """Offsets of the truncated cone |t| < 2^-j < 1 per dyadic scale.

    ``offsets[j]`` holds integer lattice offsets m (shape (count, d)) with
    |m * h| < 2^-j, for 1 <= j <= j_max.  ``volume_ratio[j]`` records
    |B_j| h^d / (c_d 2^-jd), the discrete-to-continuum ball volume factor.
    """

    grid: Grid
    j_max: int
    offsets: dict[int, np.ndarray]
    volume_ratio: dict[int, float]

    def ball_measure(self, j: int) -> float:
        """Discrete ball measure |B_j| * h^d."""
        return self.offsets[j].shape[0] * self.grid.cell_volume


def cone_index(grid: Grid, j_max: int) -> ConeIndex:
    """Build the truncated-cone index for scales 1 <= j <= j_max."""
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    if grid.N >> j_max < 2:
        raise ResolutionError(
            f"scale 2^-{j_max} < 2h: cone not resolvable on N={grid.N}"
        )
    offsets = {}
    ratio = {}
    cd = UNIT_BALL_VOLUME[grid.d]
    for j in range(1, j_max + 1):
        radius_cells = grid.N / 2**j  # |m| < radius_cells
        r_int = int(math.ceil(radius_cells)) - 1
        ax = np.arange(-r_int, r_int + 1)
        mesh = np.meshgrid(*([ax] * grid.d), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        keep = np.sum(pts.astype(float) ** 2, axis=-1) < radius_cells**2
        offs = pts[keep]
        offsets[j] = offs
        ratio[j] = offs.shape[0] * grid.cell_volume / (cd * 2.0 ** (-j * grid.d))
    return ConeIndex(grid=grid, j_max=j_max, offsets=offsets, volume_ratio=ratio)
