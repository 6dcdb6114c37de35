"""Deterministic field generators.

All randomness flows from a 64-bit seed through the counter-based Philox
engine, so parallel trials reproduce independent of scheduling; trial k of a
batch uses seed ``base_seed + k``.
"""

from __future__ import annotations

import numpy as np

from .lattice import DyadicCube, Grid
from .opfield import OperatorField, StripField
from .spectral import ifft_mat


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def single_mode(grid: Grid, n: int, k: tuple[int, ...],
                matrix: np.ndarray | None = None) -> OperatorField:
    """f(s) = e^{2 pi i k.s} A; defaults to A = E11."""
    if matrix is None:
        matrix = np.zeros((n, n), dtype=complex)
        matrix[0, 0] = 1.0
    phase = np.zeros(grid.shape)
    for ax, kk in enumerate(k):
        sh = [1] * grid.d
        sh[ax] = grid.N
        phase = phase + kk * (np.arange(grid.N) * grid.h).reshape(sh)
    wave = np.exp(2j * np.pi * phase)
    return OperatorField(grid, wave[..., None, None] * np.asarray(matrix, dtype=complex))


def band_limited_random(grid: Grid, n: int, seed: int, r_min: float = 0.0,
                        r_max: float | None = None) -> OperatorField:
    """I.i.d. complex Gaussian matrix coefficients on the annulus
    r_min <= |xi| <= r_max, inverse-transformed to the lattice.

    Default r_max is 2^j_max(N), the LP-covered radius.
    """
    rng = rng_for(seed)
    if r_max is None:
        r_max = float(2 ** (grid.N.bit_length() - 3))  # 2^floor(log2(N/4))
    mask = (grid.freq_norm >= r_min) & (grid.freq_norm <= r_max)
    count = int(mask.sum())
    coefs = np.zeros(grid.shape + (n, n), dtype=np.complex128)
    block = rng.normal(size=(count, n, n)) + 1j * rng.normal(size=(count, n, n))
    coefs[mask] = block / np.sqrt(2.0 * max(count, 1))
    return OperatorField(grid, ifft_mat(coefs, grid))


def bump(grid: Grid, n: int, center: tuple[float, ...] | None = None,
         width: float = 0.08, matrix: np.ndarray | None = None,
         seed: int | None = None) -> OperatorField:
    """Smooth periodic Gaussian bump times a fixed (or random) matrix."""
    if center is None:
        center = (0.5,) * grid.d
    if matrix is None:
        if seed is not None:
            rng = rng_for(seed)
            matrix = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        else:
            matrix = np.eye(n, dtype=complex)
    delta = grid.signed_coords_about(np.asarray(center, dtype=float))
    r_sq = np.sum(delta**2, axis=-1)
    prof = np.exp(-r_sq / (2.0 * width**2))
    return OperatorField(grid, prof[..., None, None] * np.asarray(matrix, dtype=complex))


def haar(grid: Grid, n: int, level: int = 1, index: tuple[int, ...] | None = None,
         matrix: np.ndarray | None = None) -> OperatorField:
    """Haar-type step on a dyadic cube: +/- |Q|^{-1/2} on the two halves
    split along axis 0, times a matrix (default E11). Mean-zero over Q."""
    if index is None:
        index = (0,) * grid.d
    if matrix is None:
        matrix = np.zeros((n, n), dtype=complex)
        matrix[0, 0] = 1.0
    cube = DyadicCube(grid, level, index)
    mask = cube.mask()
    amp = cube.volume ** -0.5
    idx = np.arange(grid.N)
    c0 = cube.center_cells[0]
    half = cube.side_cells // 2
    upper = ((idx - c0 + half) % grid.N) >= half
    sh = [1] * grid.d
    sh[0] = grid.N
    sign = np.where(upper.reshape(sh), 1.0, -1.0)
    prof = np.where(mask, sign * amp, 0.0)
    return OperatorField(grid, prof[..., None, None] * np.asarray(matrix, dtype=complex))


def random_strip(grid: Grid, n: int, j_max: int, seed: int) -> StripField:
    """I.i.d. complex Gaussian strip field on all (site, scale) cells."""
    rng = rng_for(seed)
    shape = (j_max,) + grid.shape + (n, n)
    data = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return StripField(grid, data / np.sqrt(2.0))


def random_unitary(n: int, seed: int) -> np.ndarray:
    rng = rng_for(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(a)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))
