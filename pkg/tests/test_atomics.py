import math

import numpy as np
import pytest

from ovtl.errors import ResolutionError, ValidationError
from ovtl.lattice import DyadicCube, Grid
from ovtl.opfield import OperatorField, StripField
from ovtl.atomics import (
    HAtom,
    LOG2,
    TentAtom,
    calderon_resolution,
    field_l1l2_size,
    pointwise_multiply_test,
    project_tent,
    random_alpha_one_atom,
    random_alpha_q_atom,
    required_k_floor,
    required_l_floor,
    smooth_decompose_h1,
    smooth_decompose_tl,
    tent_atomize,
    validate_atom,
)
from ovtl.generators import band_limited_random, bump, haar, rng_for
from ovtl.spectral import apply_symbol_data

E11 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)


# ---------------------------------------------------------------------------
# validators
# ---------------------------------------------------------------------------

def test_validate_unit_cube_indicator(grid64):
    data = np.zeros(grid64.shape + (2, 2), dtype=complex)
    data[..., 0, 0] = 1.0
    atom = HAtom(DyadicCube(grid64, 0, (0,)), OperatorField(grid64, data))
    rep = validate_atom(atom)
    assert rep.passed
    size_clause = next(c for c in rep.clauses if c.name == "size")
    assert abs(size_clause.measured - 1.0) < 1e-12  # saturates |Q|^{-1/2} = 1


def test_validate_haar_atom(grid64):
    cube = DyadicCube(grid64, 1, (0,))
    f = haar(grid64, 2, level=1)
    atom = HAtom(cube, f)
    rep = validate_atom(atom)
    assert rep.passed  # includes the mean-zero clause


def test_validate_oversized_fails(grid64):
    data = np.zeros(grid64.shape + (2, 2), dtype=complex)
    data[..., 0, 0] = 2.0
    atom = HAtom(DyadicCube(grid64, 0, (0,)), OperatorField(grid64, data))
    rep = validate_atom(atom)
    assert not rep.passed
    fail = rep.failures()[0]
    assert fail.name == "size" and fail.measured > fail.bound


def test_validate_support_violation(grid64):
    data = np.zeros(grid64.shape + (1, 1), dtype=complex)
    data[:, 0, 0] = 0.01  # spread everywhere
    atom = HAtom(DyadicCube(grid64, 2, (1,)), OperatorField(grid64, data),
                 mean_zero_required=False)
    rep = validate_atom(atom)
    assert any(c.name == "support" and not c.passed for c in rep.clauses)


def test_tent_atom_validator(grid64):
    cube = DyadicCube(grid64, 1, (0,))
    rng = rng_for(50)
    block = rng.normal(size=(1,) + (cube.side_cells,) + (1, 1))
    atom = TentAtom(cube=cube, j_lo=2, block=block)
    size = atom.size()
    atom = TentAtom(cube=cube, j_lo=2, block=block / (size * math.sqrt(cube.volume)))
    assert validate_atom(atom).passed
    bad = TentAtom(cube=cube, j_lo=1, block=block)  # scale 1/2 > side 1/2 is OK; j_lo=0 invalid
    bad = TentAtom(cube=cube, j_lo=0, block=block)
    assert not validate_atom(bad).passed


# ---------------------------------------------------------------------------
# reproducing system
# ---------------------------------------------------------------------------

def test_calderon_identity_and_origin(grid64):
    cal = calderon_resolution(grid64, n_pow=2)
    assert cal.identity_defect() <= 1e-14
    for j in range(1, cal.j_max + 1):
        # Psi_j(0) = 0 up to the FFT's own summation round-off
        assert abs(cal.level(j)[0]) <= 1e-15
    assert cal.phi0_values[0] == 1.0


def test_calderon_single_mode_energy(grid64):
    cal = calderon_resolution(grid64)
    k = 4
    total = cal.phi0_values[k] + sum(cal.level(j)[k] ** 2 for j in range(1, cal.j_max + 1))
    assert abs(total - 1.0) <= 1e-14


def test_calderon_stencil_support(grid64):
    # each level kernel lives in the closed half-cube of side 2^-j
    from ovtl.atomics import _stencil

    for j in (1, 2, 3):
        sten = _stencil(grid64, j, 2, 2.0)
        R = grid64.N >> (j + 1)
        s = np.abs(grid64.signed_index_axis)
        assert np.all(sten[s > R] == 0.0)
        assert abs(sten.sum()) <= 1e-12 * np.max(np.abs(sten))


def test_calderon_npow4(grid64):
    cal = calderon_resolution(grid64, n_pow=4)
    assert cal.identity_defect() <= 1e-14


def test_calderon_rejects_bad_npow(grid64):
    with pytest.raises(ValueError):
        calderon_resolution(grid64, n_pow=3)


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

def test_project_zero(grid64):
    cal = calderon_resolution(grid64)
    Z = StripField.zero(grid64, 2, cal.j_max)
    out = project_tent(Z, cal)
    assert np.max(np.abs(out.data)) == 0.0


def test_project_one_cell_atom(grid64):
    cal = calderon_resolution(grid64)
    cube = DyadicCube(grid64, 2, (1,))
    block = np.zeros((1,) + (cube.side_cells,) + (1, 1), dtype=complex)
    block[0, 3, 0, 0] = 1.0
    atom = TentAtom(cube=cube, j_lo=3, block=block)
    out = project_tent(atom, cal)
    # explicit single convolution oracle
    expected = LOG2 * apply_symbol_data(cal.level(3), atom.level_full(3), grid64)
    assert np.max(np.abs(out.data - expected)) < 1e-14
    # zero mean is forced by Psi_hat(0) = 0
    mean = np.abs(out.data.sum(axis=0)).max() * grid64.cell_volume
    assert mean <= 1e-12 * np.max(np.abs(out.data))


def test_project_random_atom_contract(grid64):
    cal = calderon_resolution(grid64)
    rng = rng_for(60)
    for trial in range(20):
        level = int(rng.integers(0, 4))
        idx = tuple(int(x) for x in rng.integers(0, 2**level, 1))
        cube = DyadicCube(grid64, level, idx)
        j_lo = max(level, 1)
        n_scales = int(rng.integers(1, cal.j_max - j_lo + 2))
        block = rng.normal(size=(n_scales,) + (cube.side_cells,) + (2, 2)) \
            + 1j * rng.normal(size=(n_scales,) + (cube.side_cells,) + (2, 2))
        atom = TentAtom(cube=cube, j_lo=j_lo, block=block)
        size = atom.size()
        atom = TentAtom(cube=cube, j_lo=j_lo,
                        block=block / (size * math.sqrt(cube.volume)))
        out = project_tent(atom, cal)
        # support in 2Q
        mask = cube.double_mask()
        scale = np.max(np.abs(out.data))
        if np.any(~mask):
            leak = np.max(np.abs(out.data[~mask]))
            assert leak <= 1e-10 * scale
        # zero mean within 1e-12
        mean = np.abs(out.data.sum(axis=tuple(range(grid64.d)))).max() * grid64.cell_volume
        assert mean <= 1e-12 * scale
        # size certificate: measured constant <= 1 against |Q|^{-1/2}
        size_const = field_l1l2_size(out.data, grid64) * math.sqrt(cube.volume)
        assert size_const <= 1.0 + 1e-9


def test_project_rejects_mean_nonzero_level(grid64):
    cal = calderon_resolution(grid64)
    bad_levels = tuple(np.array(v) for v in cal.level_values)
    bad_levels[0][0] = 0.5  # inject a mean
    import dataclasses

    bad = dataclasses.replace(cal, level_values=bad_levels)
    Z = StripField.zero(grid64, 1, cal.j_max)
    data = np.array(Z.data)
    data[0, 0, 0, 0] = 1.0
    with pytest.raises(ValidationError):
        project_tent(StripField(grid64, data), bad)


# ---------------------------------------------------------------------------
# tent atomization
# ---------------------------------------------------------------------------

def test_atomize_zero_empty(grid64):
    cal = calderon_resolution(grid64)
    assert tent_atomize(StripField.zero(grid64, 2, cal.j_max)) == []


def test_atomize_saturated_single_atom_roundtrip(grid64):
    # a single-cell saturated atom comes back with lambda = 1
    cube = DyadicCube(grid64, 1, (1,))
    rng = rng_for(61)
    block = rng.normal(size=(1,) + (cube.side_cells,) + (1, 1))
    atom = TentAtom(cube=cube, j_lo=2, block=block)
    size = atom.size()
    atom = TentAtom(cube=cube, j_lo=2, block=block / (size * math.sqrt(cube.volume)))
    F = atom.to_strip(3)
    pairs = tent_atomize(F)
    assert len(pairs) == 1
    lam, back = pairs[0]
    assert abs(lam - 1.0) < 1e-12
    assert back.cube.level == cube.level and back.cube.index == cube.index
    assert np.max(np.abs(back.block - atom.block)) < 1e-12


def test_atomize_reconstruction_and_validity(grid64):
    from ovtl.generators import random_strip

    cal = calderon_resolution(grid64)
    F = random_strip(grid64, 2, cal.j_max, 62)
    pairs = tent_atomize(F)
    rec = np.zeros(np.asarray(F.data).shape, dtype=complex)
    for lam, atom in pairs:
        for j in atom.scales:
            rec[j - 1] += lam * atom.level_full(j)
    scale = np.max(np.abs(F.data))
    assert np.max(np.abs(rec - F.data)) <= 1e-10 * scale
    assert all(validate_atom(a).passed for _, a in pairs)


def test_atomize_mass_stable_across_seeds(grid64):
    from ovtl.generators import random_strip
    from ovtl.normsuite import tent_norm

    cal = calderon_resolution(grid64)
    ratios = []
    for seed in range(8):
        F = random_strip(grid64, 1, cal.j_max, 70 + seed)
        pairs = tent_atomize(F)
        mass = sum(abs(l) for l, _ in pairs)
        ratios.append(mass / tent_norm(F, 1.0).value)
    assert max(ratios) / min(ratios) < 2.0


# ---------------------------------------------------------------------------
# smooth decompositions
# ---------------------------------------------------------------------------

def test_h1_zero_empty(grid64):
    dec = smooth_decompose_h1(OperatorField.zero(grid64, 2), compute_norm=False)
    assert dec.low_pairs == [] and dec.high_pairs == []


def test_h1_constant_only_low(grid64):
    f = OperatorField.constant(grid64, E11)
    dec = smooth_decompose_h1(f)
    assert len(dec.low_pairs) == 1
    assert len(dec.high_pairs) == 0  # level parts vanish on the mean mode
    assert dec.residual <= 1e-12
    mu = dec.low_pairs[0][0]
    assert 0.1 < mu < 10.0  # mass comparable to ||A|| scale


def test_h1_bump_pipeline(grid64):
    f = bump(grid64, 2, width=0.06, seed=80)
    dec = smooth_decompose_h1(f)
    assert dec.residual <= 1e-9
    assert all(validate_atom(a).passed for _, a in dec.low_pairs + dec.high_pairs)
    assert dec.mass_ratio is not None and 0.05 < dec.mass_ratio < 100.0


def test_h1_mass_stability(grid64):
    ratios = []
    for seed in range(8):
        f = band_limited_random(grid64, 2, 90 + seed)
        dec = smooth_decompose_h1(f)
        assert dec.residual <= 1e-9
        ratios.append(dec.mass_ratio)
    assert max(ratios) / min(ratios) < 2.0


def test_tl_parameter_floors():
    assert required_k_floor(0.5) == 1
    assert required_k_floor(1.0) == 2
    assert required_k_floor(-2.3) == 0
    assert required_l_floor(0.5) == -1
    assert required_l_floor(-1.2) == 1
    assert required_l_floor(0.0) == -1  # h1-compatible degeneration


def test_tl_rejects_low_parameters(grid64):
    f = band_limited_random(grid64, 2, 91)
    with pytest.raises(ValueError):
        smooth_decompose_tl(f, alpha=1.5, K=1, L=0)
    with pytest.raises(ValueError):
        smooth_decompose_tl(f, alpha=-1.5, K=0, L=0)


def test_tl_pipeline_validates(grid64):
    f = band_limited_random(grid64, 2, 92)
    dec = smooth_decompose_tl(f, alpha=0.5, K=1, L=0)
    assert dec.residual <= 1e-9
    reports = [validate_atom(a) for _, a in dec.low_pairs + dec.high_pairs]
    assert all(r.passed for r in reports)
    # alpha_q atoms carry nonempty subatom trees below the top cube level
    kinds = {a.kind for _, a in dec.high_pairs}
    assert kinds == {"alpha_q"}
    assert any(len(a.subatoms) > 1 for _, a in dec.high_pairs)


def test_tl_alpha0_degeneration(grid64):
    f = band_limited_random(grid64, 2, 93)
    dec = smooth_decompose_tl(f, alpha=0.0, K=1, L=-1)
    assert dec.residual <= 1e-9
    assert all(validate_atom(a).passed for _, a in dec.low_pairs + dec.high_pairs)


def test_tl_2d_smoke():
    g = Grid(2, 32)
    f = band_limited_random(g, 2, 94)
    dec = smooth_decompose_tl(f, alpha=0.5, K=1, L=0)
    assert dec.residual <= 1e-9
    assert all(validate_atom(a).passed for _, a in dec.low_pairs + dec.high_pairs)


def test_subatom_moment_zero(grid64):
    f = band_limited_random(grid64, 2, 95)
    dec = smooth_decompose_tl(f, alpha=0.5, K=1, L=0)
    checked = 0
    for _, atom in dec.high_pairs:
        for d_c, sub in atom.subatoms:
            full = sub.embed()
            mean = np.abs(full.sum(axis=0)).max() * grid64.cell_volume
            mass = np.abs(full).sum() * grid64.cell_volume
            assert mean <= 1e-10 * max(mass, 1e-300)
            checked += 1
    assert checked > 10


# ---------------------------------------------------------------------------
# pointwise multipliers and atom generators
# ---------------------------------------------------------------------------

def test_pointwise_identity(grid64, fam64):
    f = band_limited_random(grid64, 2, 96)
    h = OperatorField.constant(grid64, np.eye(2))
    res = pointwise_multiply_test(h, f, 0.5, fam64)
    assert abs(res["ratio"] - 1.0) < 1e-12
    assert res["derivative_bound"] >= 1.0
    assert res["passed"]


def test_pointwise_zero(grid64, fam64):
    f = band_limited_random(grid64, 2, 97)
    h = OperatorField.zero(grid64, 2)
    res = pointwise_multiply_test(h, f, 0.5, fam64)
    assert res["ratio"] == 0.0


def test_pointwise_bump_bounded(grid64, fam64):
    rng = rng_for(98)
    prof = np.exp(-np.sum(grid64.signed_coords_about(np.array([0.5])) ** 2, axis=-1)
                  / (2 * 0.15**2))
    data = np.zeros(grid64.shape + (2, 2), dtype=complex)
    data[..., 0, 0] = 1.0 + prof
    data[..., 1, 1] = 1.0 + 0.5 * prof
    h = OperatorField(grid64, data)
    for seed in range(5):
        f = band_limited_random(grid64, 2, 300 + seed)
        res = pointwise_multiply_test(h, f, 0.5, fam64, margin=10.0)
        assert res["passed"]


def test_random_alpha_one_atoms_validate(grid64):
    for seed in range(5):
        atom = random_alpha_one_atom(grid64, 2, 0.5, 1, 400 + seed)
        assert validate_atom(atom).passed


def test_random_alpha_q_atoms_validate(grid64):
    for seed in range(5):
        atom = random_alpha_q_atom(grid64, 2, 0.5, 1, 0, level=2, seed=500 + seed)
        assert validate_atom(atom).passed
        assert atom.subatoms


def test_alpha_q_level_out_of_range(grid64):
    with pytest.raises(ResolutionError):
        random_alpha_q_atom(grid64, 1, 0.5, 1, 0, level=10, seed=1)
