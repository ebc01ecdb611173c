"""Eventually-constant points of the one-sided full shift on ``{1, ..., d}``.

A point is stored as a finite head word followed by a repeated tail symbol.
The canonical form never lets the head end in the tail symbol, so equality
of points is equality of ``(head, tail)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

Word = tuple[int, ...]


def _canonical(head: Sequence[int], tail: int) -> Word:
    h = list(head)
    while h and h[-1] == tail:
        h.pop()
    return tuple(int(a) for a in h)


@dataclass(frozen=True, init=False, eq=False, repr=False)
class Point:
    """The sequence ``(head[0], ..., head[m-1], tail, tail, ...)``.

    Parameters
    ----------
    head : sequence of int
        Leading symbols. Trailing copies of ``tail`` are absorbed.
    tail : int
        Repeated symbol.
    d : int, optional
        Alphabet size, used to validate symbols. ``None`` skips the check.
    """

    head: Word
    tail: int
    d: int | None = None

    def __init__(self, head: Iterable[int], tail: int, d: int | None = None):
        head = tuple(int(a) for a in head)
        tail = int(tail)
        if d is not None:
            if d < 2:
                raise ValueError("alphabet size must be at least 2")
            bad = [a for a in head + (tail,) if not 1 <= a <= d]
            if bad:
                raise ValueError(f"symbols {bad} outside 1..{d}")
        elif min(head + (tail,)) < 1:
            raise ValueError("symbols must be positive")
        object.__setattr__(self, "head", _canonical(head, tail))
        object.__setattr__(self, "tail", tail)
        object.__setattr__(self, "d", d)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Point):
            return NotImplemented
        return self.head == other.head and self.tail == other.tail

    def __hash__(self) -> int:
        return hash((self.head, self.tail))

    def __getitem__(self, i: int) -> int:
        """Coordinate ``i`` (0-based)."""
        if i < 0:
            raise IndexError("points are one-sided")
        return self.head[i] if i < len(self.head) else self.tail

    def __str__(self) -> str:
        return ".".join(map(str, self.head)) + f"|{self.tail}"

    def __repr__(self) -> str:
        return f"Point({str(self)!r})"

    @classmethod
    def parse(cls, text: str, d: int | None = None) -> "Point":
        """Read the ``"w1.w2.....wm|t"`` text form."""
        try:
            head_s, tail_s = text.strip().split("|")
            head = [int(s) for s in head_s.split(".")] if head_s else []
            return cls(head, int(tail_s), d)
        except ValueError as exc:
            raise ValueError(f"cannot parse point {text!r}: {exc}") from None

    def canon(self) -> "Point":
        return Point(self.head, self.tail, self.d)

    def prefix(self, m: int) -> Word:
        return cylinder_prefix(self, m)

    def replace_prefix(self, word: Sequence[int]) -> "Point":
        """Overwrite the first ``len(word)`` coordinates."""
        r = len(word)
        rest = self.head[r:]
        if len(self.head) < r:
            rest = ()
        return Point(tuple(word) + rest, self.tail, self.d)


def shift(p: Point) -> Point:
    """Drop coordinate 0."""
    return Point(p.head[1:], p.tail, p.d)


def prepend(a: int, p: Point) -> Point:
    """The point ``(a, p_0, p_1, ...)``."""
    return Point((a,) + p.head, p.tail, p.d)


def cylinder_prefix(p: Point, m: int) -> Word:
    """First ``m`` coordinates of ``p``."""
    if m < 1:
        raise ValueError("prefix length must be positive")
    h = p.head[:m]
    return h + (p.tail,) * (m - len(h))


def disagreement_index(x: Point, y: Point) -> int | None:
    """Smallest 0-based index where ``x`` and ``y`` differ, ``None`` if equal."""
    if x == y:
        return None
    n = max(len(x.head), len(y.head)) + 1
    for i in range(n):
        if x[i] != y[i]:
            return i
    raise AssertionError("unequal canonical points agree on a full period")


def metric(x: Point, y: Point) -> float:
    """``2**-N`` with ``N`` the first index of disagreement."""
    if x.d is not None and y.d is not None and x.d != y.d:
        raise ValueError(f"alphabet mismatch: {x.d} vs {y.d}")
    n = disagreement_index(x, y)
    return 0.0 if n is None else 2.0 ** (-n)


@dataclass(frozen=True)
class TwoSidedPoint:
    """``<past | future>``; the past is read outward from ``x_{-1}``."""

    past: Point
    future: Point

    def __str__(self) -> str:
        return f"{self.past}<>{self.future}"


# Integer encodings of words, most significant symbol first.


def word_index(word: Sequence[int], d: int) -> int:
    """Lexicographic rank of ``word`` among words of its length."""
    idx = 0
    for a in word:
        idx = idx * d + (int(a) - 1)
    return idx


def index_word(idx: int, d: int, m: int) -> Word:
    """Inverse of :func:`word_index` for length ``m``."""
    out = []
    for _ in range(m):
        idx, r = divmod(idx, d)
        out.append(r + 1)
    return tuple(reversed(out))


def all_words(d: int, m: int) -> np.ndarray:
    """All length-``m`` words as an ``(d**m, m)`` array in lexicographic order."""
    if m == 0:
        return np.zeros((1, 0), dtype=int)
    grids = np.indices((d,) * m).reshape(m, -1).T
    return grids + 1


def random_point(rng: np.random.Generator, d: int, max_head: int = 8) -> Point:
    n = int(rng.integers(0, max_head + 1))
    return Point(rng.integers(1, d + 1, size=n), int(rng.integers(1, d + 1)), d)
