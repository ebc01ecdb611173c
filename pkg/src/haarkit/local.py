"""Locally constant functions on the one-sided shift.

A function of level ``m`` depends on the first ``m`` coordinates only and is
stored as a flat table over the ``d**m`` words in lexicographic order.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .symbolic import Point, all_words, cylinder_prefix, word_index


class LocalFunction:
    """Real function of the first ``level`` coordinates.

    Parameters
    ----------
    d : int
        Alphabet size.
    table : array_like
        Either flat of length ``d**m`` or shaped ``(d,) * m``.
    """

    def __init__(self, d: int, table):
        if d < 2:
            raise ValueError("alphabet size must be at least 2")
        t = np.asarray(table, dtype=float).ravel()
        m = int(round(np.log(t.size) / np.log(d))) if t.size > 1 else 1
        if t.size == 1:
            t = np.repeat(t, d)
        if d**m != t.size or m < 1:
            raise ValueError(f"table of size {t.size} is not d**m for d={d}")
        self.d = d
        self.level = m
        self.table = t
        self.table.setflags(write=False)

    @classmethod
    def constant(cls, d: int, c: float, level: int = 1) -> "LocalFunction":
        return cls(d, np.full(d**level, float(c)))

    @classmethod
    def from_callable(cls, d: int, level: int, fn: Callable[[tuple], float]):
        words = all_words(d, level)
        return cls(d, [fn(tuple(int(a) for a in w)) for w in words])

    def __call__(self, x) -> float:
        if isinstance(x, Point):
            x = cylinder_prefix(x, self.level)
        if len(x) < self.level:
            raise ValueError(f"need a word of length >= {self.level}")
        return float(self.table[word_index(x[: self.level], self.d)])

    def at_depth(self, depth: int, offset: int = 0) -> np.ndarray:
        """Values of ``self . sigma**offset`` on every word of length ``depth``."""
        m = self.level
        if offset + m > depth:
            raise ValueError(f"depth {depth} too small for level {m} at offset {offset}")
        idx = np.arange(self.d**depth)
        return self.table[(idx // self.d ** (depth - offset - m)) % self.d**m]

    def extend(self, level: int) -> "LocalFunction":
        """Same function tabulated at a higher level."""
        return LocalFunction(self.d, self.at_depth(level))

    def depends_on_first(self) -> bool:
        t = self.table.reshape(self.d, -1)
        return bool(np.any(t != t[0]))

    def __add__(self, other):
        if isinstance(other, LocalFunction):
            m = max(self.level, other.level)
            return LocalFunction(self.d, self.at_depth(m) + other.at_depth(m))
        return LocalFunction(self.d, self.table + float(other))

    __radd__ = __add__

    def __mul__(self, c: float):
        return LocalFunction(self.d, self.table * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return LocalFunction(self.d, -self.table)

    def __repr__(self) -> str:
        return f"LocalFunction(d={self.d}, level={self.level})"


def parse_table(lines: Sequence[str], d: int) -> LocalFunction:
    """Read ``"word value"`` lines; words are dot-separated symbols."""
    entries = {}
    for ln, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {ln}: expected 'word value'")
        word = tuple(int(s) for s in parts[0].split("."))
        entries[word] = float(parts[1])
    lengths = {len(w) for w in entries}
    if len(lengths) != 1:
        raise ValueError("all words must share one length")
    (m,) = lengths
    if len(entries) != d**m:
        raise ValueError(f"table has {len(entries)} entries, expected {d**m}")
    t = np.empty(d**m)
    for w, v in entries.items():
        if min(w) < 1 or max(w) > d:
            raise ValueError(f"word {w} outside alphabet 1..{d}")
        t[word_index(w, d)] = v
    return LocalFunction(d, t)
