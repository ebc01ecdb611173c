"""Transfer operator ``L_A v(x) = sum_a exp(A(a x)) v(a x)`` for finite-memory ``A``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .local import LocalFunction
from .measures import CylinderMeasure, Gibbs, reweight

Potential = LocalFunction

MAX_ITER = 100_000


def apply_transfer(A: Potential, v: LocalFunction) -> LocalFunction:
    """Apply ``L_A`` exactly on the level grid.

    The result has level ``max(k - 1, m - 1, 1)`` for ``A`` of memory ``k``
    and ``v`` of level ``m``.
    """
    d, k, m = A.d, A.level, v.level
    if v.d != d:
        raise ValueError("alphabet mismatch")
    L = max(k - 1, m - 1, 1)
    idx = np.arange(d**L)
    out = np.zeros(d**L)
    for a in range(d):
        ia = a * d ** (k - 1) + idx // d ** (L - (k - 1)) if k > 1 else np.full_like(idx, a)
        iv = a * d ** (m - 1) + idx // d ** (L - (m - 1)) if m > 1 else np.full_like(idx, a)
        out += np.exp(A.table[ia]) * v.table[iv]
    return LocalFunction(d, out)


def transfer_matrix(A: Potential) -> np.ndarray:
    """Matrix of ``L_A`` on functions of the first ``k - 1`` coordinates.

    Entry ``[u, a u[:-1]]`` equals ``exp(A(a u))``; a single state when ``k = 1``.
    """
    d, k = A.d, A.level
    n = d ** (k - 1)
    M = np.zeros((n, n))
    u = np.arange(n)
    for a in range(d):
        target = a * d ** (k - 2) + u // d if k > 1 else np.zeros_like(u)
        np.add.at(M, (u, target), np.exp(A.table[a * n + u]))
    return M


def _perron(M: np.ndarray, max_iter: int) -> tuple[float, np.ndarray]:
    """Power iteration with sup-norm renormalization."""
    v = np.ones(M.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        lam_new = float(np.max(w))
        w /= lam_new
        if abs(lam_new - lam) <= 1e-14 * lam_new and np.max(np.abs(w - v)) <= 1e-14:
            return lam_new, w
        v, lam = w, lam_new
    raise RuntimeError(f"power iteration did not converge in {max_iter} steps")


@dataclass(frozen=True)
class EigenData:
    """Perron data of ``L_A``.

    Attributes
    ----------
    lam : float
        Spectral radius.
    eigfn : LocalFunction
        Positive eigenfunction over length-``(k-1)`` words, scaled so that
        ``integral(eigfn, eigmeasure) = 1``. Level 1 and constant when ``k = 1``.
    eigmeasure : Gibbs
        Probability ``m`` with ``L_A^* m = lam m``.
    """

    lam: float
    eigfn: LocalFunction
    eigmeasure: Gibbs
    ell: np.ndarray
    h: np.ndarray


def eigendata(A: Potential, max_iter: int = MAX_ITER) -> EigenData:
    M = transfer_matrix(A)
    lam, h = _perron(M, max_iter)
    lam_l, ell = _perron(M.T, max_iter)
    ell = ell / ell.sum()
    h = h / float(ell @ h)
    d, k = A.d, A.level
    eigfn = LocalFunction(d, h if k > 1 else np.full(d, h[0]))
    return EigenData(lam, eigfn, Gibbs(A, lam, ell), ell, h)


def normalize(A: Potential, data: EigenData | None = None) -> Potential:
    """``B = A + log h - log h o sigma - log lam``, so that ``L_B 1 = 1``."""
    data = data or eigendata(A)
    d, k = A.d, A.level
    if k == 1:
        return LocalFunction(d, A.table - np.log(data.lam))
    logh = np.log(data.h)
    idx = np.arange(d**k)
    B = A.table + logh[idx // d] - logh[idx % d ** (k - 1)] - np.log(data.lam)
    return LocalFunction(d, B)


def coboundary_transfer(M: CylinderMeasure, h: LocalFunction, c: float = 0.0) -> CylinderMeasure:
    """Density change paired with ``B = A + log h - log h o sigma - c``.

    The constant ``c`` only shifts ``B`` and does not alter the measure.
    """
    if np.any(h.table <= 0):
        raise ValueError("h must be strictly positive")
    return reweight(M, h, normalize=True)


def coboundary_potential(A: Potential, h: LocalFunction, c: float = 0.0) -> Potential:
    """Tabulate ``A + log h - log h o sigma - c`` at level ``max(k, m + 1)``."""
    if np.any(h.table <= 0):
        raise ValueError("h must be strictly positive")
    d, m = A.d, h.level
    L = max(A.level, m + 1)
    logh = np.log(h.table)
    idx = np.arange(d**L)
    t = A.at_depth(L) + logh[idx // d ** (L - m)] - logh[(idx // d ** (L - 1 - m)) % d**m]
    return LocalFunction(d, t - c)
