"""Cylinder-weight oracles for probabilities on the one-sided shift.

Every measure answers ``weight(word)`` for single cylinders and
``weights(n)`` for the full lexicographic vector over length-``n`` words,
which is what the exact KMS sums consume.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .local import LocalFunction
from .symbolic import all_words, word_index

_TOL = 1e-12


class CylinderMeasure:
    """Base class; subclasses implement ``weights`` and ``weight``."""

    kind = "abstract"

    def __init__(self, d: int):
        if d < 2:
            raise ValueError("alphabet size must be at least 2")
        self.d = d

    def weights(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def weight(self, word: Sequence[int]) -> float:
        word = tuple(word)
        if not word:
            return 1.0
        return float(self.weights(len(word))[word_index(word, self.d)])

    def __repr__(self) -> str:
        return f"{type(self).__name__}(d={self.d}, kind={self.kind!r})"


def _marginalize(w: np.ndarray, d: int, n: int) -> np.ndarray:
    """Sum a length-L weight vector down to length ``n`` prefixes."""
    return w.reshape(d**n, -1).sum(axis=1)


class Bernoulli(CylinderMeasure):
    kind = "bernoulli"

    def __init__(self, p):
        p = np.asarray(p, dtype=float)
        super().__init__(p.size)
        self.p = p

    def weight(self, word):
        return float(np.prod(self.p[np.asarray(word, dtype=int) - 1])) if len(word) else 1.0

    def weights(self, n):
        if n == 0:
            return np.ones(1)
        return np.prod(self.p[all_words(self.d, n) - 1], axis=1)


def bernoulli(p) -> Bernoulli:
    """Independent product measure with marginal ``p``.

    Raises
    ------
    ValueError
        If ``p`` has negative entries or does not sum to one.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > _TOL:
        raise ValueError("p must be a probability vector")
    return Bernoulli(p)


def check_column_stochastic(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P must be square")
    if np.any(P < 0):
        raise ValueError("P has negative entries")
    if np.max(np.abs(P.sum(axis=0) - 1.0)) > _TOL:
        raise ValueError("columns of P must sum to 1")
    return P


class Markov(CylinderMeasure):
    kind = "markov"

    def __init__(self, P, pi):
        super().__init__(P.shape[0])
        self.P = P
        self.pi = pi

    def weight(self, word):
        word = np.asarray(word, dtype=int) - 1
        if word.size == 0:
            return 1.0
        return float(self.pi[word[0]] * np.prod(self.P[word[1:], word[:-1]]))

    def weights(self, n):
        if n == 0:
            return np.ones(1)
        w = all_words(self.d, n) - 1
        return self.pi[w[:, 0]] * np.prod(self.P[w[:, 1:], w[:, :-1]], axis=1)


def markov(P, pi) -> Markov:
    """Markov measure for a column-stochastic ``P``.

    ``weight([x1, ..., xn]) = pi[x1] * prod_i P[x_{i+1}, x_i]``.
    """
    P = check_column_stochastic(P)
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (P.shape[0],):
        raise ValueError(f"pi has shape {pi.shape}, expected ({P.shape[0]},)")
    if np.any(pi < 0) or abs(pi.sum() - 1.0) > _TOL:
        raise ValueError("pi must be a probability vector")
    return Markov(P, pi)


def _reachable(A: np.ndarray, start: int) -> set:
    seen, stack = {start}, [start]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(A[i]):
            if j not in seen:
                seen.add(int(j))
                stack.append(int(j))
    return seen


def stationary_vector(P) -> np.ndarray:
    """Probability vector with ``P @ pi = pi`` for column-stochastic ``P``.

    Raises
    ------
    ValueError
        If ``P`` is reducible.
    """
    P = check_column_stochastic(P)
    d = P.shape[0]
    adj = P.T > 0
    full = set(range(d))
    if _reachable(adj, 0) != full or _reachable(adj.T, 0) != full:
        raise ValueError("P is reducible")
    A = P - np.eye(d)
    A[-1, :] = 1.0
    rhs = np.zeros(d)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    # one refinement step against roundoff
    r = P @ pi - pi
    A2 = P - np.eye(d)
    A2[-1, :] = 1.0
    r[-1] = pi.sum() - 1.0
    pi = pi - np.linalg.solve(A2, r)
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


class Gibbs(CylinderMeasure):
    """Conformal measure of a finite-memory potential.

    For a memory-``k`` potential ``A`` with transfer eigenvalue ``lam`` and left
    Perron vector ``ell`` over length-``(k-1)`` words, the weight of a word of
    length ``n >= k - 1`` is
    ``lam**-(n-k+1) * exp(sum_i A(x_i..x_{i+k-1})) * ell(x_{n-k+2}..x_n)``.
    """

    kind = "thermo"

    def __init__(self, A: LocalFunction, lam: float, ell: np.ndarray):
        super().__init__(A.d)
        self.A = A
        self.lam = float(lam)
        self.ell = np.asarray(ell, dtype=float)

    def weights(self, n):
        k = self.A.level
        if n < k - 1:
            return _marginalize(self.weights(k - 1), self.d, n)
        if n == 0:
            return np.ones(1)
        logw = np.zeros(self.d**n)
        for i in range(n - k + 1):
            logw += self.A.at_depth(n, offset=i)
        logw -= (n - k + 1) * np.log(self.lam)
        idx = np.arange(self.d**n) % self.d ** (k - 1)
        return np.exp(logw) * self.ell[idx]


class AtomicThermo(CylinderMeasure):
    """``sum_w p_w * delta_(w, 1, 1, ...)`` over words ``w`` of length ``n``."""

    kind = "thermo"

    def __init__(self, d: int, n: int, p: np.ndarray):
        super().__init__(d)
        self.n = n
        self.p = p

    def weights(self, m):
        if m <= self.n:
            return _marginalize(self.p, self.d, m)
        out = np.zeros(self.d**m)
        # extensions by the symbol 1 have index offset 0 in the trailing block
        out[:: self.d ** (m - self.n)] = self.p
        return out


def thermo_weights(phi: LocalFunction, n: int) -> np.ndarray:
    """Finite-volume Gibbs weights of length-``n`` words.

    ``p_{a1..an}`` is proportional to
    ``exp(-(phi(a1..an 1..) + phi(a2..an 1..) + ... + phi(an 1..)))``.

    Returns
    -------
    numpy.ndarray
        Flat vector of length ``d**n`` in lexicographic word order.
    """
    k, d = phi.level, phi.d
    if n < k:
        raise ValueError(f"n={n} below the memory {k} of phi")
    # pad with the symbol 1, which sits at index offset 0 in a trailing block
    padded = np.arange(d**n) * d ** (k - 1)
    L = n + k - 1
    energy = np.zeros(d**n)
    for i in range(n):
        energy += phi.table[(padded // d ** (L - i - k)) % d**k]
    w = np.exp(-(energy - energy.min()))
    return w / w.sum()


def thermo_measure(phi: LocalFunction, n: int) -> AtomicThermo:
    return AtomicThermo(phi.d, n, thermo_weights(phi, n))


class Reweighted(CylinderMeasure):
    kind = "reweighted"

    def __init__(self, base: CylinderMeasure, v: LocalFunction, Z: float):
        super().__init__(base.d)
        self.base, self.v, self.Z = base, v, Z

    def weights(self, n):
        L = max(n, self.v.level)
        w = self.v.at_depth(L) * self.base.weights(L) / self.Z
        return _marginalize(w, self.d, n) if L > n else w

    def weight(self, word):
        word = tuple(word)
        m = self.v.level
        if len(word) >= m:
            return self.v(word) * self.base.weight(word) / self.Z
        ext = all_words(self.d, m - len(word))
        return sum(self.v(word + tuple(e)) * self.base.weight(word + tuple(e)) for e in ext) / self.Z


def reweight(mu: CylinderMeasure, v: LocalFunction, normalize: bool = True) -> Reweighted:
    """The measure ``v dmu``, optionally rescaled to total mass one.

    Raises
    ------
    ValueError
        If ``v`` is negative somewhere, or has zero integral under ``normalize``.
    """
    if v.d != mu.d:
        raise ValueError("alphabet mismatch")
    if np.any(v.table < 0):
        raise ValueError("v must be non-negative")
    Z = 1.0
    if normalize:
        Z = float(np.dot(v.table, mu.weights(v.level)))
        if Z <= 0:
            raise ValueError("v integrates to zero")
    return Reweighted(mu, v, Z)
