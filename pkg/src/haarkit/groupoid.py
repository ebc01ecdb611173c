"""Equivalence relations with finite classes, Haar kernels and groupoid functions.

Every relation handled here frees the first ``r`` coordinates: two points are
related iff they agree from coordinate ``r`` on. The bigger-than-two relation
has ``r = 1``, the k-tail relation ``r = k``, and the eventually-equal
relation truncated at depth ``n`` has ``r = n``.

At a finite depth ``D >= r`` the words of length ``D`` split into
``C = d**(D - r)`` classes of size ``n = d**r``. The word with local index
``j`` in class ``c`` has flat index ``j * C + c``. Groupoid functions and
kernels at depth ``D`` are arrays of shape ``(C, n, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np

from .local import LocalFunction
from .symbolic import Point, all_words, cylinder_prefix, shift, word_index


@dataclass(frozen=True)
class Relation:
    """``kind`` is ``"bigger-than-two"``, ``"k-tail"`` or ``"eventually-equal"``."""

    kind: str
    r: int

    def __post_init__(self):
        if self.kind not in ("bigger-than-two", "k-tail", "eventually-equal"):
            raise ValueError(f"unknown relation {self.kind!r}")
        if self.r < 1:
            raise ValueError("relation depth must be at least 1")
        if self.kind == "bigger-than-two" and self.r != 1:
            raise ValueError("the bigger-than-two relation frees one coordinate")

    def related(self, x: Point, y: Point) -> bool:
        n = max(len(x.head), len(y.head), self.r) + 1
        return x.tail == y.tail and all(x[i] == y[i] for i in range(self.r, n))

    def __str__(self) -> str:
        return self.kind if self.kind == "bigger-than-two" else f"{self.kind}:{self.r}"


def bigger_than_two() -> Relation:
    return Relation("bigger-than-two", 1)


def k_tail(k: int) -> Relation:
    return Relation("k-tail", k)


def eventually_equal(n: int) -> Relation:
    return Relation("eventually-equal", n)


def fiber(rel: Relation, p: Point, d: int | None = None) -> list[Point]:
    """All points related to ``p``, in lexicographic order of the free prefix."""
    d = d or p.d
    if d is None:
        raise ValueError("alphabet size unknown")
    if rel.kind == "eventually-equal" and len(p.head) > rel.r:
        raise ValueError(f"head of {p} longer than truncation depth {rel.r}")
    return [p.replace_prefix(w) for w in product(range(1, d + 1), repeat=rel.r)]


# Haar kernels


@dataclass(frozen=True)
class HaarKernel:
    """``kind`` is ``"counting"``, ``"normalized"`` or ``"jacobian"``.

    A Jacobian kernel carries a positive level-``m`` function ``J`` with
    ``sum_a J(a x) = 1`` and weighs ``s`` by ``J(s) J(sigma s) ... J(sigma^{r-1} s)``.
    """

    kind: str
    J: LocalFunction | None = None

    def __post_init__(self):
        if self.kind not in ("counting", "normalized", "jacobian"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "jacobian":
            if self.J is None:
                raise ValueError("Jacobian kernel needs J")
            check_jacobian(self.J)


def check_jacobian(J: LocalFunction, tol: float = 1e-12) -> None:
    if np.any(J.table <= 0):
        raise ValueError("Jacobian must be strictly positive")
    sums = J.table.reshape(J.d, -1).sum(axis=0)
    if np.max(np.abs(sums - 1.0)) > tol:
        raise ValueError("Jacobian is not fiber-normalized: sum_a J(a x) != 1")


def counting() -> HaarKernel:
    return HaarKernel("counting")


def normalized() -> HaarKernel:
    return HaarKernel("normalized")


def jacobian(J: LocalFunction) -> HaarKernel:
    return HaarKernel("jacobian", J)


def haar_weights(kernel: HaarKernel, p: Point, rel: Relation, d: int | None = None):
    """``[(s, nu^p(s)) for s in fiber(p)]``."""
    fib = fiber(rel, p, d)
    if kernel.kind == "counting":
        return [(s, 1.0) for s in fib]
    if kernel.kind == "normalized":
        return [(s, 1.0 / len(fib)) for s in fib]
    out = []
    for s in fib:
        w, t = 1.0, s
        for _ in range(rel.r):
            w *= kernel.J(cylinder_prefix(t, kernel.J.level))
            t = shift(t)
        out.append((s, w))
    total = sum(w for _, w in out)
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"Jacobian weights on the fiber of {p} sum to {total}")
    return out


@dataclass
class TransverseVerdict:
    transverse: bool
    counterexample: tuple[Point, Point] | None = None
    max_gap: float = 0.0


def is_transverse(weights_of: Callable[[Point], Iterable[tuple[Point, float]]],
                  samples: Sequence[tuple[Point, Point]], tol: float = 1e-12) -> TransverseVerdict:
    """Check ``nu^x == nu^y`` as measures for every sampled related pair.

    ``weights_of`` maps a point to its weighted fiber list, for instance
    ``lambda p: haar_weights(kernel, p, rel)``.
    """
    worst = 0.0
    for x, y in samples:
        mx, my = {}, {}
        for s, w in weights_of(x):
            mx[s] = mx.get(s, 0.0) + w
        for s, w in weights_of(y):
            my[s] = my.get(s, 0.0) + w
        gap = max(abs(mx.get(s, 0.0) - my.get(s, 0.0)) for s in set(mx) | set(my))
        worst = max(worst, gap)
        if gap > tol:
            return TransverseVerdict(False, (x, y), gap)
    return TransverseVerdict(True, None, worst)


def delta_weights(rel: Relation, d: int):
    """Weights of the delta kernel: unit mass at the point itself."""
    return lambda p: [(s, 1.0 if s == p else 0.0) for s in fiber(rel, p, d)]


# Depth-D class decomposition


@dataclass(frozen=True)
class Frame:
    """Class layout of length-``depth`` words under a first-``r``-free relation."""

    d: int
    r: int
    depth: int

    def __post_init__(self):
        if self.depth < self.r:
            raise ValueError(f"depth {self.depth} below relation depth {self.r}")

    @property
    def n(self) -> int:
        return self.d**self.r

    @property
    def C(self) -> int:
        return self.d ** (self.depth - self.r)

    def flat(self) -> np.ndarray:
        """Flat word index of each (class, local) slot, shape ``(C, n)``."""
        return np.arange(self.n)[None, :] * self.C + np.arange(self.C)[:, None]

    def to_classes(self, v: np.ndarray) -> np.ndarray:
        """Reorder a flat length-``d**depth`` vector into shape ``(C, n)``."""
        return np.asarray(v).reshape(self.n, self.C).T

    def pair_prefix(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Level-``m`` prefix indices of ``x`` and ``y`` over all class pairs."""
        f = self.flat() // self.d ** (self.depth - m)
        return f[:, :, None], f[:, None, :]


def frame_for(rel: Relation, d: int, depth: int) -> Frame:
    return Frame(d, rel.r, depth)


def kernel_array(kernel: HaarKernel, frame: Frame) -> np.ndarray:
    """``K[c, y, s] = nu^y(s)`` at the frame's depth."""
    C, n = frame.C, frame.n
    if kernel.kind == "counting":
        return np.ones((C, n, n))
    if kernel.kind == "normalized":
        return np.full((C, n, n), 1.0 / n)
    J = kernel.J
    need = frame.r - 1 + J.level
    if frame.depth < need:
        raise ValueError(f"depth {frame.depth} too small for Jacobian level {J.level}")
    w = np.ones(frame.d**frame.depth)
    for i in range(frame.r):
        w *= J.at_depth(frame.depth, offset=i)
    w = frame.to_classes(w)
    return np.broadcast_to(w[:, None, :], (C, n, n)).copy()


def kernel_min_depth(kernel: HaarKernel, rel: Relation) -> int:
    if kernel.kind == "jacobian":
        return rel.r - 1 + kernel.J.level
    return rel.r


class GroupoidFunction:
    """Locally constant function on related pairs.

    Parameters
    ----------
    d : int
        Alphabet size.
    rel : Relation
        Relation on which the function lives.
    table : array_like
        Dense ``(d**m, d**m)`` table indexed by the level-``m`` prefixes of
        ``x`` and ``y``. Entries for pairs that cannot be related are ignored
        and stored as zero.
    """

    def __init__(self, d: int, rel: Relation, table):
        t = np.array(table, dtype=complex)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValueError("table must be square")
        m = int(round(np.log(t.shape[0]) / np.log(d)))
        if d**m != t.shape[0]:
            raise ValueError(f"table size {t.shape[0]} is not a power of {d}")
        self.d, self.rel, self.level = d, rel, m
        t[~related_mask(d, rel.r, m)] = 0.0
        if np.all(t.imag == 0):
            t = t.real.copy()
        self.table = t

    @classmethod
    def from_callable(cls, d, rel, level, fn: Callable[[tuple, tuple], complex]):
        words = [tuple(int(a) for a in w) for w in all_words(d, level)]
        mask = related_mask(d, rel.r, level)
        t = np.zeros((len(words), len(words)), dtype=complex)
        for i, x in enumerate(words):
            for j, y in enumerate(words):
                if mask[i, j]:
                    t[i, j] = fn(x, y)
        return cls(d, rel, t)

    @classmethod
    def from_classes(cls, frame: Frame, rel: Relation, arr: np.ndarray) -> "GroupoidFunction":
        """Inverse of :meth:`lift` at level ``frame.depth``."""
        N = frame.d**frame.depth
        t = np.zeros((N, N), dtype=complex)
        f = frame.flat()
        t[f[:, :, None], f[:, None, :]] = arr
        return cls(frame.d, rel, t)

    @classmethod
    def diagonal(cls, d, rel, values: LocalFunction | np.ndarray | float = 1.0, level=None):
        """``values(x) * I[x == y]``; the identity when ``values`` is 1."""
        if isinstance(values, LocalFunction):
            level = max(level or 1, values.level, rel.r)
            v = values.at_depth(level)
        else:
            level = max(level or 1, rel.r)
            v = np.broadcast_to(np.asarray(values, dtype=complex), (d**level,))
        return cls(d, rel, np.diag(v))

    def __call__(self, x, y) -> complex:
        if isinstance(x, Point):
            if not self.rel.related(x, y):
                raise ValueError(f"{x} and {y} are not related")
            x, y = cylinder_prefix(x, self.level), cylinder_prefix(y, self.level)
        v = self.table[word_index(x[: self.level], self.d), word_index(y[: self.level], self.d)]
        return complex(v) if np.iscomplexobj(self.table) else float(v)

    def lift(self, frame: Frame) -> np.ndarray:
        """``F[c, x, y] = f(x, y)`` at the frame's depth."""
        if frame.depth < self.level:
            raise ValueError(f"depth {frame.depth} below level {self.level}")
        px, py = frame.pair_prefix(self.level)
        return self.table[px, py]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.table)

    def __add__(self, other: "GroupoidFunction") -> "GroupoidFunction":
        m = max(self.level, other.level, self.rel.r)
        fr = Frame(self.d, self.rel.r, m)
        return GroupoidFunction.from_classes(fr, self.rel, self.lift(fr) + other.lift(fr))

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, c):
        return GroupoidFunction(self.d, self.rel, self.table * c)

    __rmul__ = __mul__

    def max_abs_diff(self, other: "GroupoidFunction") -> float:
        m = max(self.level, other.level, self.rel.r)
        fr = Frame(self.d, self.rel.r, m)
        return float(np.max(np.abs(self.lift(fr) - other.lift(fr))))

    def __repr__(self) -> str:
        return f"GroupoidFunction(d={self.d}, rel={self.rel}, level={self.level})"


def related_mask(d: int, r: int, m: int) -> np.ndarray:
    """``mask[i, j]`` true iff level-``m`` words ``i`` and ``j`` agree past position ``r``."""
    idx = np.arange(d**m)
    tail = idx % d ** max(m - r, 0)
    return tail[:, None] == tail[None, :]


def indicator_pair(d: int, rel: Relation, u: Sequence[int], v: Sequence[int]) -> GroupoidFunction:
    """``I[x starts with u] * I[y starts with v]``."""
    m = len(u)
    if len(v) != m:
        raise ValueError("prefixes must share a length")
    t = np.zeros((d**m, d**m))
    t[word_index(u, d), word_index(v, d)] = 1.0
    return GroupoidFunction(d, rel, t)


def random_function(rng: np.random.Generator, d: int, rel: Relation, level: int,
                    complex_values: bool = False, positive: bool = False) -> GroupoidFunction:
    shape = (d**level, d**level)
    if positive:
        t = rng.uniform(0.1, 1.0, shape)
    else:
        t = rng.normal(size=shape)
        if complex_values:
            t = t + 1j * rng.normal(size=shape)
    return GroupoidFunction(d, rel, t)


def parse_function(lines: Sequence[str], d: int, rel: Relation) -> GroupoidFunction:
    """Read ``"wordx wordy re [im]"`` lines into a groupoid function."""
    entries = {}
    for ln, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise ValueError(f"line {ln}: expected 'wordx wordy re [im]'")
        wx = tuple(int(s) for s in parts[0].split("."))
        wy = tuple(int(s) for s in parts[1].split("."))
        val = float(parts[2]) + (1j * float(parts[3]) if len(parts) == 4 else 0.0)
        entries[(wx, wy)] = val
    lengths = {len(w) for pair in entries for w in pair}
    if len(lengths) != 1:
        raise ValueError("all words must share one length")
    (m,) = lengths
    t = np.zeros((d**m, d**m), dtype=complex)
    mask = related_mask(d, rel.r, m)
    for (wx, wy), val in entries.items():
        if min(wx + wy) < 1 or max(wx + wy) > d:
            raise ValueError(f"words {wx}, {wy} outside alphabet 1..{d}")
        i, j = word_index(wx, d), word_index(wy, d)
        if not mask[i, j]:
            raise ValueError(f"words {wx} and {wy} are not related")
        t[i, j] = val
    return GroupoidFunction(d, rel, t)
