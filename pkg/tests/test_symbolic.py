import numpy as np
import pytest
from hypothesis import given, strategies as st

from haarkit.local import LocalFunction, parse_table
from haarkit.symbolic import (Point, all_words, cylinder_prefix, disagreement_index, index_word, metric,
                              prepend, random_point, shift, word_index)

symbols = st.integers(1, 3)
points = st.builds(lambda h, t: Point(h, t, 3), st.lists(symbols, max_size=6), symbols)


def test_shift_examples():
    assert shift(Point([1, 2], 1)) == Point([2], 1)
    assert shift(Point([], 3)) == Point([], 3)
    assert shift(Point([2, 1, 1], 2)) == Point([1, 1], 2)


def test_metric_examples():
    x = Point([1, 2], 1)
    assert metric(x, x) == 0.0
    assert metric(Point([], 1), Point([], 2)) == 1.0
    assert metric(Point([1, 2, 1, 1], 1), Point([], 1)) == 0.5


def test_cylinder_prefix_examples():
    assert cylinder_prefix(Point([1, 2], 1), 4) == (1, 2, 1, 1)
    assert cylinder_prefix(Point([], 2), 3) == (2, 2, 2)
    assert cylinder_prefix(Point([2], 1), 1) == (2,)
    with pytest.raises(ValueError):
        cylinder_prefix(Point([2], 1), 0)


def test_prepend_examples():
    assert prepend(1, Point([], 1)) == Point([], 1)
    assert prepend(2, Point([], 1)) == Point([2], 1)
    assert prepend(1, Point([2], 2)) == Point([1], 2)


def test_canonical_form_and_text():
    p = Point([1, 2, 1, 1], 1)
    assert p.head == (1, 2)
    assert Point.parse(str(p)) == p
    assert Point.parse("|2") == Point([], 2)
    with pytest.raises(ValueError):
        Point.parse("1.x|2")
    with pytest.raises(ValueError):
        Point([3], 1, d=2)


def test_metric_alphabet_mismatch():
    with pytest.raises(ValueError):
        metric(Point([1], 1, 2), Point([1], 1, 3))


@given(points)
def test_prepend_shift_roundtrip(p):
    for a in (1, 2, 3):
        assert shift(prepend(a, p)) == p
        assert prepend(a, p)[0] == a


@given(points, points)
def test_metric_matches_brute_force(x, y):
    n = max(len(x.head), len(y.head)) + 1
    diff = [i for i in range(n) if x[i] != y[i]]
    assert metric(x, y) == (2.0 ** -diff[0] if diff else 0.0)
    assert metric(x, y) == metric(y, x)
    assert disagreement_index(x, y) == (diff[0] if diff else None)


@given(points, points, points)
def test_ultrametric(x, y, z):
    assert metric(x, z) <= max(metric(x, y), metric(y, z))


@given(st.integers(2, 4), st.integers(1, 4), st.data())
def test_word_index_roundtrip(d, m, data):
    idx = data.draw(st.integers(0, d**m - 1))
    w = index_word(idx, d, m)
    assert word_index(w, d) == idx
    assert tuple(all_words(d, m)[idx]) == w


def test_random_point_in_alphabet(rng):
    for _ in range(50):
        p = random_point(rng, 3)
        assert all(1 <= a <= 3 for a in p.head + (p.tail,))


def test_local_function_evaluation():
    f = LocalFunction(2, [0.0, 1.0, 2.0, 3.0])
    assert f.level == 2
    assert f((2, 1)) == 2.0
    assert f(Point([1], 2)) == 1.0
    assert f((2, 2, 1)) == 3.0
    with pytest.raises(ValueError):
        f((1,))


def test_local_function_at_depth_matches_brute_force(rng):
    f = LocalFunction(3, rng.normal(size=9))
    words = all_words(3, 4)
    for off in (0, 1, 2):
        expect = [f(tuple(w[off:off + 2])) for w in words]
        assert np.array_equal(f.at_depth(4, off), expect)


def test_local_function_validation():
    with pytest.raises(ValueError):
        LocalFunction(1, [0.0])
    with pytest.raises(ValueError):
        LocalFunction(2, [0.0, 1.0, 2.0])


def test_depends_on_first():
    assert LocalFunction(2, [1, 2, 1, 2]).depends_on_first() is False
    assert LocalFunction(2, [1, 2, 3, 2]).depends_on_first() is True


def test_parse_table():
    f = parse_table(["# memory-2", "1.1 0.5", "1.2 -1", "2.1 2", "2.2 0"], 2)
    assert f.level == 2
    assert f((1, 2)) == -1.0
    with pytest.raises(ValueError):
        parse_table(["1.1 0.5", "1.2 1"], 2)
