import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from haarkit.cocycles import birkhoff_sum, modular_eval, potential_diff, product_tail_bound, truncated_product
from haarkit.groupoid import Frame, bigger_than_two, fiber, k_tail
from haarkit.local import LocalFunction
from haarkit.symbolic import Point, random_point

seeds = st.integers(0, 2**32 - 1)


def _cocycles(rng, d=2):
    A = LocalFunction(d, rng.normal(size=d**2))
    beta = float(rng.uniform(0.1, 3))
    return [potential_diff(A, beta), birkhoff_sum(A, 2, beta),
            truncated_product(A, 4, (1.0, 1.0), 2.0, beta)]


def _related_triple(rng, rel, d):
    p = random_point(rng, d, 3)
    if rel.kind == "k-tail":
        p = Point(p.head[:rel.r], p.tail, d)
    f = fiber(rel, p, d)
    return [f[i] for i in rng.integers(0, len(f), 3)]


def _value(c, x, y, rel):
    v = modular_eval(c, x, y, rel)
    return v[0] if isinstance(v, tuple) else v


def test_modular_eval_examples(rng):
    rel = bigger_than_two()
    for c in _cocycles(rng):
        x = random_point(rng, 2)
        assert _value(c, x, x, rel) == 1.0
    A = LocalFunction(2, [0.4, -1.1])
    w = Point([2, 1], 2, 2)
    x, y = Point((1, 1) + w.head, w.tail, 2), Point((2, 1) + w.head, w.tail, 2)
    val = modular_eval(birkhoff_sum(A, 2), x, y, k_tail(2))
    assert math.isclose(val, math.exp(A.table[1] - A.table[0]), rel_tol=1e-14)


def test_modular_eval_unrelated():
    with pytest.raises(ValueError):
        modular_eval(potential_diff(LocalFunction(2, [0.0, 1.0])), Point([1], 1), Point([1], 2))
    with pytest.raises(ValueError):
        modular_eval(potential_diff(LocalFunction(2, [0.0, 1.0])), Point([1, 1], 2), Point([2, 2], 2),
                     bigger_than_two())


def test_cocycle_identity_1000_triples(rng):
    for rel in (bigger_than_two(), k_tail(2)):
        for c in _cocycles(rng):
            for _ in range(1000 // 6 + 1):
                x, y, z = _related_triple(rng, rel, 2)
                lhs = _value(c, x, y, rel) * _value(c, y, z, rel)
                assert abs(lhs - _value(c, x, z, rel)) < 1e-12 * max(1.0, lhs)
                assert abs(_value(c, x, y, rel) * _value(c, y, x, rel) - 1.0) < 1e-12


@given(seeds, st.floats(-5, 5))
def test_constant_shift_cancels(seed, c):
    rng = np.random.default_rng(seed)
    phi = LocalFunction(2, rng.normal(size=4))
    x, y, _ = _related_triple(rng, bigger_than_two(), 2)
    a = modular_eval(potential_diff(phi), x, y)
    b = modular_eval(potential_diff(phi + c), x, y)
    assert abs(a - b) <= 1e-12 * max(a, b)


@given(seeds, st.floats(0.1, 3))
def test_beta_scaling(seed, beta):
    rng = np.random.default_rng(seed)
    phi = LocalFunction(2, rng.normal(size=4))
    x, y, _ = _related_triple(rng, bigger_than_two(), 2)
    a = modular_eval(potential_diff(phi, beta), x, y)
    b = modular_eval(potential_diff(phi, 1.0), x, y) ** beta
    assert abs(a - b) < 1e-12 * max(a, b)


def test_array_matches_pointwise(rng):
    rel = k_tail(2)
    for c in _cocycles(rng)[:2]:
        fr = Frame(2, 2, 4)
        D = c.array(fr)
        flat = fr.flat()
        for cl in range(fr.C):
            for i in range(fr.n):
                for j in range(fr.n):
                    wx = [int(a) + 1 for a in np.base_repr(int(flat[cl, i]), 2).zfill(4)]
                    wy = [int(a) + 1 for a in np.base_repr(int(flat[cl, j]), 2).zfill(4)]
                    ref = modular_eval(c, Point(wx, 1, 2), Point(wy, 1, 2), rel)
                    assert abs(D[cl, i, j] - ref) < 1e-12 * ref


def test_product_tail_bound_examples():
    assert product_tail_bound(0.0, 1.0, 2.0, 10) == 0.0
    assert product_tail_bound(1.0, 1.0, 2.0, 20) == 2.0**-20
    with pytest.raises(ValueError):
        product_tail_bound(1.0, 1.0, 1.0, 5)
    with pytest.raises(ValueError):
        product_tail_bound(1.0, 0.0, 2.0, 5)


@given(st.floats(0.01, 10), st.floats(0.1, 2), st.floats(1.1, 4), st.integers(1, 30))
def test_tail_bound_doubling(C, alpha, lam, N):
    b1, b2 = product_tail_bound(C, alpha, lam, N), product_tail_bound(C, alpha, lam, 2 * N)
    assert b2 <= b1 * lam ** (-N * alpha) * (1 + 1e-12)
    # direct partial sum oracle
    s = C * sum(lam ** (-n * alpha) for n in range(N + 1, N + 4000))
    assert abs(b1 - s) <= 1e-9 * b1 + C * lam ** (-(N + 4000) * alpha) / (1 - lam**-alpha)


def test_truncated_reports_bound(rng):
    c = truncated_product(LocalFunction(2, rng.normal(size=2)), 10, (1.0, 1.0), 2.0)
    x = random_point(rng, 2)
    val, bound = modular_eval(c, x, x)
    assert val == 1.0 and bound == 2.0**-10
