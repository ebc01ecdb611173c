"""Multiplicative cocycles ``delta`` on related pairs.

Sign convention: ``c(x, y) = phi(y) - phi(x)`` and
``delta(x, y) = exp(-beta c(y, x)) = exp(beta (phi(y) - phi(x)))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .groupoid import Frame, Relation
from .local import LocalFunction
from .symbolic import Point, cylinder_prefix, shift


def product_tail_bound(C: float, alpha: float, lam: float, N: int) -> float:
    """``C * sum_{n > N} lam**(-n alpha)`` in closed form.

    Raises
    ------
    ValueError
        If ``lam <= 1`` or ``alpha <= 0``, where the series diverges.
    """
    if lam <= 1.0:
        raise ValueError("contraction rate lam must exceed 1")
    if alpha <= 0:
        raise ValueError("Hoelder exponent must be positive")
    if C == 0:
        return 0.0
    q = lam ** (-alpha)
    return C * q ** (N + 1) / (1.0 - q)


@dataclass(frozen=True)
class Cocycle:
    """Modular function generated by a locally constant potential.

    Attributes
    ----------
    kind : str
        ``"potential-diff"``, ``"birkhoff"`` or ``"truncated"``.
    phi : LocalFunction
        Generator. For ``"birkhoff"`` it is ``A`` and the exponent uses
        ``sum_{j<k} A o sigma^j``; for ``"truncated"`` the sum runs to ``N``.
    beta : float
        Inverse temperature.
    """

    kind: str
    phi: LocalFunction
    beta: float = 1.0
    k: int = 1
    N: int = 0
    holder: tuple[float, float] = (0.0, 1.0)
    lam: float = 2.0

    def __post_init__(self):
        if self.kind not in ("potential-diff", "birkhoff", "truncated"):
            raise ValueError(f"unknown cocycle kind {self.kind!r}")

    @property
    def terms(self) -> int:
        return {"potential-diff": 1, "birkhoff": self.k, "truncated": self.N + 1}[self.kind]

    @property
    def level(self) -> int:
        """Depth needed to evaluate the exponent exactly."""
        return self.phi.level + self.terms - 1

    def energy(self) -> LocalFunction:
        """``sum_{j < terms} phi o sigma^j`` as a single local function."""
        L = self.level
        return LocalFunction(self.phi.d, sum(self.phi.at_depth(L, j) for j in range(self.terms)))

    def array(self, frame: Frame) -> np.ndarray:
        """``Delta[c, x, y] = delta(x, y)`` at the frame's depth."""
        e = frame.to_classes(self.energy().at_depth(frame.depth))
        return np.exp(self.beta * (e[:, None, :] - e[:, :, None]))

    def tail_bound(self) -> float:
        if self.kind != "truncated":
            return 0.0
        C, alpha = self.holder
        return product_tail_bound(C, alpha, self.lam, self.N)


def potential_diff(phi: LocalFunction, beta: float = 1.0) -> Cocycle:
    return Cocycle("potential-diff", phi, beta)


def birkhoff_sum(A: LocalFunction, k: int, beta: float = 1.0) -> Cocycle:
    if k < 1:
        raise ValueError("k must be positive")
    return Cocycle("birkhoff", A, beta, k=k)


def truncated_product(A: LocalFunction, N: int, holder: tuple[float, float], lam: float,
                      beta: float = 1.0) -> Cocycle:
    product_tail_bound(holder[0], holder[1], lam, N)
    return Cocycle("truncated", A, beta, N=N, holder=tuple(holder), lam=lam)


def _energy_at(coc: Cocycle, x: Point) -> float:
    total, t = 0.0, x
    for _ in range(coc.terms):
        total += coc.phi(cylinder_prefix(t, coc.phi.level))
        t = shift(t)
    return total


def modular_eval(coc: Cocycle, x: Point, y: Point, rel: Relation | None = None):
    """``delta(x, y)``; a ``(value, tail_bound)`` pair for truncated products.

    Raises
    ------
    ValueError
        If ``x`` and ``y`` are not related (or have different tails when no
        relation is given).
    """
    related = rel.related(x, y) if rel is not None else x.tail == y.tail
    if not related:
        raise ValueError(f"{x} and {y} are not related")
    val = float(np.exp(coc.beta * (_energy_at(coc, y) - _energy_at(coc, x))))
    if coc.kind == "truncated":
        return val, coc.tail_bound()
    return val
