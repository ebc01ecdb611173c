import numpy as np
import pytest
from hypothesis import given, strategies as st

from haarkit.kms import kms_indicator_suite, max_residual
from haarkit.cocycles import potential_diff
from haarkit.groupoid import bigger_than_two, counting
from haarkit.local import LocalFunction, parse_table
from haarkit.measures import bernoulli
from haarkit.ruelle import (apply_transfer, coboundary_potential, coboundary_transfer, eigendata, normalize,
                            transfer_matrix)
from haarkit.symbolic import all_words

seeds = st.integers(0, 2**32 - 1)


def _transfer_brute(A, v, out_level):
    """(L_A v)(x) = sum_a e^{A(a x)} v(a x), evaluated word by word."""
    d = A.d
    vals = []
    for w in all_words(d, out_level):
        x = tuple(int(s) for s in w)
        vals.append(sum(np.exp(A((a,) + x)) * v((a,) + x) for a in range(1, d + 1)))
    return np.array(vals)


def test_apply_transfer_examples():
    A = LocalFunction(3, [0.1, -0.4, 0.7])
    Lv = apply_transfer(A, LocalFunction.constant(3, 1.0))
    assert np.allclose(Lv.table, np.exp(A.table).sum())
    L0 = apply_transfer(LocalFunction.constant(2, 0.0), LocalFunction.constant(2, 1.0))
    assert np.allclose(L0.table, 2.0)


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_apply_transfer_brute_force(seed, k, m):
    rng = np.random.default_rng(seed)
    A, v = LocalFunction(2, rng.normal(size=2**k)), LocalFunction(2, rng.normal(size=2**m))
    Lv = apply_transfer(A, v)
    assert Lv.level == max(k - 1, m - 1, 1)
    assert np.allclose(Lv.table, _transfer_brute(A, v, Lv.level), rtol=1e-13, atol=1e-13)


@given(seeds)
def test_transfer_linear_and_positive(seed):
    rng = np.random.default_rng(seed)
    A = LocalFunction(2, rng.normal(size=4))
    u, v = (LocalFunction(2, rng.normal(size=4)) for _ in range(2))
    a, b = rng.normal(size=2)
    lhs = apply_transfer(A, u * a + v * b).table
    rhs = apply_transfer(A, u).table * a + apply_transfer(A, v).table * b
    assert np.allclose(lhs, rhs, atol=1e-12)
    pos = LocalFunction(2, np.abs(u.table))
    assert np.all(apply_transfer(A, pos).table >= 0)


def test_eigendata_constant_zero():
    e = eigendata(LocalFunction.constant(3, 0.0))
    assert abs(e.lam - 3.0) < 1e-12
    assert np.allclose(e.eigfn.table, 1.0)
    assert np.allclose(e.eigmeasure.weights(3), 3.0**-3)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_eigendata_memory1_closed_form(d, rng):
    for _ in range(25):
        A = LocalFunction(d, rng.normal(size=d))
        e = eigendata(A)
        lam = np.exp(A.table).sum()
        assert abs(e.lam - lam) < 1e-12 * lam
        assert np.allclose(e.eigfn.table, 1.0, atol=1e-12)
        assert np.max(np.abs(e.eigmeasure.weights(3) - bernoulli(np.exp(A.table) / lam).weights(3))) < 1e-12


@given(seeds, st.integers(2, 3), st.integers(2, 3))
def test_eigendata_vs_dense_eig(seed, d, k):
    rng = np.random.default_rng(seed)
    A = LocalFunction(d, rng.normal(size=d**k))
    e = eigendata(A)
    ev = np.linalg.eigvals(transfer_matrix(A))
    assert abs(e.lam - ev.real.max()) < 1e-11 * e.lam
    Lh = apply_transfer(A, e.eigfn)
    assert np.max(np.abs(Lh.table - e.lam * e.eigfn.at_depth(Lh.level))) < 1e-12 * e.lam


def test_transfer_matrix_matches_operator(rng):
    A = LocalFunction(2, rng.normal(size=8))
    v = LocalFunction(2, rng.normal(size=4))
    assert np.allclose(transfer_matrix(A) @ v.table, apply_transfer(A, v).table)


def test_dual_relation_memory2(rng):
    A = LocalFunction(2, rng.normal(size=4))
    e = eigendata(A)
    m = e.eigmeasure
    for j in range(4):
        u = np.zeros(4)
        u[j] = 1.0
        Lu = apply_transfer(A, LocalFunction(2, u))
        lhs = np.dot(Lu.at_depth(3), m.weights(3))
        rhs = e.lam * np.dot(LocalFunction(2, u).at_depth(3), m.weights(3))
        assert abs(lhs - rhs) < 1e-10


def test_normalize_examples(rng):
    B = normalize(LocalFunction.constant(3, 1.7))
    assert np.allclose(B.table, -np.log(3), atol=1e-12)
    p = np.array([0.2, 0.8])
    A = LocalFunction(2, np.log(p))
    assert np.allclose(normalize(A).table, A.table, atol=1e-12)
    A2 = LocalFunction(2, rng.normal(size=4))
    B2 = normalize(A2)
    assert np.allclose(apply_transfer(B2, LocalFunction.constant(2, 1.0)).table, 1.0, atol=1e-12)
    assert np.allclose(np.exp(B2.table).reshape(2, 2).sum(axis=0), 1.0, atol=1e-12)


@given(seeds, st.integers(1, 3))
def test_normalize_idempotent(seed, k):
    A = LocalFunction(2, np.random.default_rng(seed).normal(size=2**k))
    B = normalize(A)
    assert np.max(np.abs(normalize(B).table - B.table)) < 1e-12


@given(seeds, st.floats(-3, 3))
def test_spectral_shift(seed, c):
    A = LocalFunction(2, np.random.default_rng(seed).normal(size=4))
    e0, e1 = eigendata(A), eigendata(A + c)
    assert abs(e1.lam / e0.lam - np.exp(c)) < 1e-12 * np.exp(c)
    assert np.max(np.abs(e1.h - e0.h)) < 1e-12


def test_coboundary_examples(rng):
    p = np.array([0.35, 0.65])
    M = bernoulli(p)
    assert np.allclose(coboundary_transfer(M, LocalFunction.constant(2, 1.0)).weights(3), M.weights(3))
    assert np.allclose(coboundary_transfer(M, LocalFunction.constant(2, np.exp(0.4)), 0.4).weights(3),
                       M.weights(3))
    with pytest.raises(ValueError):
        coboundary_transfer(M, LocalFunction(2, [1.0, 0.0]))


def test_coboundary_pair_is_kms(rng):
    # (A, M) KMS with A = log p normalized; (B, h M) should be KMS as well
    p = np.array([0.35, 0.65])
    A = LocalFunction(2, np.log(p))
    h = LocalFunction(2, rng.uniform(0.5, 2.0, 2))
    B = coboundary_potential(A, h, 0.3)
    M2 = coboundary_transfer(bernoulli(p), h, 0.3)
    coc = potential_diff(-B, 1.0)
    reps = kms_indicator_suite(M2, counting(), bigger_than_two(), coc, 2, 3)
    assert max_residual(reps) < 1e-10


def test_potential_table_roundtrip():
    A = parse_table(["1 0.25", "2 -0.5"], 2)
    assert np.array_equal(A.table, [0.25, -0.5])
    with pytest.raises(ValueError):
        eigendata(LocalFunction(1, [0.0]))
