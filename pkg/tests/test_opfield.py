import math

import numpy as np
import pytest

from ovtl.errors import GridMismatchError, ValidationError
from ovtl.lattice import Grid
from ovtl.opfield import (
    OperatorField,
    PSDAccumulator,
    StripField,
    herm,
    hs_norm_sq,
    modulus,
    op_cauchy_schwarz_gap,
    op_cauchy_schwarz_scale,
    pairing,
    psd_sqrt,
    sqrt_psd,
    trace_lp_norm,
)
from ovtl.generators import band_limited_random, random_unitary, rng_for


def test_modulus_nilpotent():
    x = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    m = modulus(x)
    assert np.allclose(m, np.diag([0.0, 1.0]), atol=1e-14)


def test_modulus_identity():
    assert np.allclose(modulus(np.eye(3, dtype=complex)), np.eye(3), atol=1e-14)


def test_modulus_squares_to_gram():
    rng = rng_for(3)
    x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    m = modulus(x)
    assert np.max(np.abs(m @ m - herm(x) @ x)) < 1e-10
    # Hilbert-Schmidt norm preserved
    assert abs(np.linalg.norm(m) - np.linalg.norm(x)) < 1e-12


def test_modulus_left_unitary_invariance():
    rng = rng_for(4)
    x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    u = random_unitary(3, 5)
    assert np.max(np.abs(modulus(u @ x) - modulus(x))) < 1e-10


def test_psd_sqrt_examples(grid64):
    n = 2
    acc = PSDAccumulator(grid64, n)
    acc.S[...] = 4.0 * np.eye(n)
    root = sqrt_psd(acc)
    assert np.allclose(root.data, 2.0 * np.eye(n), atol=1e-12)


def test_psd_sqrt_single_gram_is_modulus(grid64):
    rng = rng_for(7)
    g = rng.normal(size=grid64.shape + (2, 2)) + 1j * rng.normal(size=grid64.shape + (2, 2))
    acc = PSDAccumulator(grid64, 2).add_gram(g)
    root = sqrt_psd(acc)
    assert np.max(np.abs(root.data - modulus(g))) < 1e-10


def test_psd_sqrt_rank_deficient_resquares():
    rng = rng_for(8)
    v = rng.normal(size=(3, 1)) + 1j * rng.normal(size=(3, 1))
    S = v @ herm(v)  # rank one
    root = psd_sqrt(S)
    assert np.max(np.abs(root @ root - S)) < 1e-9 * np.max(np.abs(S))
    # kernel matches: root annihilates a vector orthogonal to v (up to the
    # sqrt-amplified eigensolver round-off on the zero eigenspace)
    q, _ = np.linalg.qr(np.concatenate([v, rng.normal(size=(3, 2))], axis=1))
    w = q[:, 1]
    assert np.linalg.norm(root @ w) < 1e-6 * np.linalg.norm(root)


def test_psd_sqrt_validates_hermiticity():
    S = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex)
    with pytest.raises(ValidationError):
        psd_sqrt(S)


def test_trace_lp_indicator(grid64):
    # f = 1_[0,1) E11 at n = 2, p = 1 -> 1
    data = np.zeros(grid64.shape + (2, 2), dtype=complex)
    data[..., 0, 0] = 1.0
    f = OperatorField(grid64, data)
    assert abs(trace_lp_norm(f, 1.0) - 1.0) < 1e-12


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0, 7.5])
def test_trace_lp_constant_identity(grid64, p):
    c = 0.7 - 0.2j
    f = OperatorField.constant(grid64, c * np.eye(3))
    assert abs(trace_lp_norm(f, p) - abs(c) * 3 ** (1.0 / p)) < 1e-12


def test_trace_lp_p2_matches_frobenius(grid64):
    f = band_limited_random(grid64, 2, 11)
    direct = math.sqrt(hs_norm_sq(f))
    assert abs(trace_lp_norm(f, 2.0) - direct) < 1e-12 * max(direct, 1.0)


def test_trace_lp_domain_error(grid64):
    f = OperatorField.zero(grid64, 2)
    with pytest.raises(ValueError):
        trace_lp_norm(f, 0.5)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0, np.inf])
def test_norm_axioms(grid64, p):
    f = band_limited_random(grid64, 2, 21)
    g = band_limited_random(grid64, 2, 22)
    c = -1.3 + 0.4j
    nf, ng = trace_lp_norm(f, p), trace_lp_norm(g, p)
    assert abs(trace_lp_norm(c * f, p) - abs(c) * nf) < 1e-10 * nf
    assert trace_lp_norm(f + g, p) <= (nf + ng) * (1 + 1e-10)


def test_holder_inequality(grid64):
    for p, q in [(1.0, np.inf), (2.0, 2.0), (3.0, 1.5)]:
        for seed in range(5):
            f = band_limited_random(grid64, 2, 100 + seed)
            g = band_limited_random(grid64, 2, 200 + seed)
            lhs = abs(pairing(f, g))
            rhs = trace_lp_norm(f, p) * trace_lp_norm(g, q)
            assert lhs <= rhs * (1 + 1e-10)


def test_cauchy_schwarz_equality_full_torus(grid64):
    # phi = 1_Q with Q the whole torus, f constant: exact equality
    A = np.array([[1.0, 2.0], [3.0, 4.0j]])
    f = OperatorField.constant(grid64, A)
    phi = np.ones(grid64.shape)
    gap = op_cauchy_schwarz_gap(phi, f)
    assert abs(gap) < 1e-12 * op_cauchy_schwarz_scale(phi, f)


def test_cauchy_schwarz_zero_phi(grid64):
    f = band_limited_random(grid64, 2, 31)
    assert op_cauchy_schwarz_gap(np.zeros(grid64.shape), f) == 0.0


def test_cauchy_schwarz_indicator_closed_form(grid64):
    # constant field, phi = 1_Q: gap matrix is |Q|(1-|Q|) A*A
    A = np.array([[1.0, 0.5j], [0.0, 2.0]])
    f = OperatorField.constant(grid64, A)
    phi = np.zeros(grid64.shape)
    phi[:16] = 1.0  # |Q| = 1/4
    expected = 0.25 * 0.75 * np.min(np.linalg.eigvalsh(herm(A) @ A))
    assert abs(op_cauchy_schwarz_gap(phi, f) - expected) < 1e-10


def test_cauchy_schwarz_random_trials(grid64):
    for seed in range(50):
        rng = rng_for(400 + seed)
        phi = rng.normal(size=grid64.shape) + 1j * rng.normal(size=grid64.shape)
        f = band_limited_random(grid64, 2, 500 + seed)
        gap = op_cauchy_schwarz_gap(phi, f)
        scale = op_cauchy_schwarz_scale(phi, f)
        assert gap >= -1e-9 * scale


def test_adjoint_involution(grid64):
    f = band_limited_random(grid64, 3, 41)
    assert np.array_equal(f.adjoint().adjoint().data, f.data)


def test_grid_mismatch(grid64):
    f = band_limited_random(grid64, 2, 51)
    g = band_limited_random(Grid(1, 32), 2, 51)
    with pytest.raises(GridMismatchError):
        _ = f + g


def test_nonfinite_rejected(grid64):
    data = np.zeros(grid64.shape + (2, 2), dtype=complex)
    data[0, 0, 0] = np.nan
    with pytest.raises(ValidationError):
        OperatorField(grid64, data)


def test_psd_accumulator_invariants(grid64):
    acc = PSDAccumulator(grid64, 2)
    rng = rng_for(61)
    for _ in range(4):
        g = rng.normal(size=grid64.shape + (2, 2)) + 1j * rng.normal(size=grid64.shape + (2, 2))
        acc.add_gram(g, float(rng.uniform(0.1, 2.0)))
    acc.check()
    eigs = acc.eigenvalues()
    assert eigs.min() >= 0.0
    with pytest.raises(ValueError):
        acc.add_gram(np.zeros(grid64.shape + (2, 2)), -1.0)


def test_strip_field_scale_indexing(grid64):
    F = StripField.zero(grid64, 2, 3)
    assert F.j_max == 3
    with pytest.raises(ValueError):
        F.level(0)
    with pytest.raises(ValueError):
        F.level(4)
