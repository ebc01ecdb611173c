"""Exact KMS (quasi-invariance) residuals and the reproductions built on them.

For a probability ``mu``, kernel ``nu`` and cocycle ``delta`` the two sides are

    lhs = sum_w mu(w) sum_s h(s, w) nu^w(s)
    rhs = sum_w mu(w) sum_s h(w, s) nu^w(s) delta(s, w)

summed over all words ``w`` of the working depth.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .algebra import as_kernel, state_eval
from .cocycles import Cocycle, potential_diff
from .groupoid import Frame, GroupoidFunction, HaarKernel, Relation, bigger_than_two, counting
from .local import LocalFunction
from .measures import CylinderMeasure, Gibbs, check_column_stochastic, reweight, stationary_vector, thermo_measure
from .ruelle import eigendata
from .symbolic import Point, all_words, cylinder_prefix, index_word, shift

DEFAULT_TOL = 1e-10


@dataclass
class KmsReport:
    test: str
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    depth: int
    passed: bool

    @classmethod
    def make(cls, test, lhs, rhs, depth, tol=DEFAULT_TOL):
        lhs, rhs = _real(lhs), _real(rhs)
        r = abs(lhs - rhs)
        scale = max(abs(lhs), abs(rhs))
        rel = r / scale if scale > 0 else 0.0
        return cls(test, lhs, rhs, r, rel, depth, bool(r <= tol))

    def to_json(self) -> str:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return json.dumps(d, sort_keys=False)


def _real(v):
    v = complex(v)
    return v.real if v.imag == 0 else v


def _setup(mu, kernel, rel, coc, depth):
    nu = as_kernel(kernel, rel, mu.d)
    fr = nu.frame(max(depth, coc.level))
    if fr.depth != depth:
        raise ValueError(f"depth {depth} too small; need at least {fr.depth}")
    return fr, nu.array(fr), coc.array(fr), fr.to_classes(mu.weights(depth))


def kms_residual(mu: CylinderMeasure, kernel, rel: Relation, coc: Cocycle, h: GroupoidFunction,
                 depth: int, tol: float = DEFAULT_TOL, test: str = "h") -> KmsReport:
    """Both sides of the KMS identity for one test function, exact at ``depth``."""
    if h.level > depth:
        raise ValueError(f"test level {h.level} exceeds depth {depth}")
    fr, K, D, m = _setup(mu, kernel, rel, coc, depth)
    H = h.lift(fr)
    lhs = np.einsum("cw,csw,cws->", m, H, K)
    rhs = np.einsum("cw,cws,cws,csw->", m, H, K, D)
    return KmsReport.make(test, lhs, rhs, depth, tol)


def kms_indicator_suite(mu: CylinderMeasure, kernel, rel: Relation, coc: Cocycle, level: int,
                        depth: int, tol: float = DEFAULT_TOL) -> list[KmsReport]:
    """Reports for every ``I[x starts with u] I[y starts with v]`` at ``level``.

    Pairs that cannot be related give ``0 = 0`` and are included, so the
    family always has ``d**(2 level)`` members, sorted by ``(u, v)``.
    """
    if level > depth:
        raise ValueError(f"test level {level} exceeds depth {depth}")
    fr, K, D, m = _setup(mu, kernel, rel, coc, depth)
    d, L = mu.d, d_pow(mu.d, level)
    px, py = fr.pair_prefix(level)  # px[c, w, s] = prefix of w, py = prefix of s
    # lhs(u, v): h(s, w) with s ~ u, w ~ v; weight m(w) nu^w(s)
    wl = m[:, :, None] * K
    lhs = np.bincount((py * L + px).ravel(), weights=wl.ravel(), minlength=L * L)
    # rhs(u, v): h(w, s) with w ~ u, s ~ v; weight m(w) nu^w(s) delta(s, w)
    wr = wl * np.swapaxes(D, 1, 2)
    rhs = np.bincount((px * L + py).ravel(), weights=wr.ravel(), minlength=L * L)
    out = []
    for i in range(L * L):
        u, v = divmod(i, L)
        name = f"I[{_w(index_word(u, d, level))}]x I[{_w(index_word(v, d, level))}]"
        out.append(KmsReport.make(name, lhs[i], rhs[i], depth, tol))
    return out


def d_pow(d: int, m: int) -> int:
    return d**m


def _w(word) -> str:
    return ".".join(map(str, word))


def max_residual(reports: Iterable[KmsReport]) -> float:
    return max(r.abs_residual for r in reports)


def verify_gibbs_kms(phi: LocalFunction, beta: float, depths: Sequence[int], level: int | None = None,
                        measure: str = "eigen", tol: float = DEFAULT_TOL) -> list[KmsReport]:
    """KMS check of the Gibbs probability of ``-beta phi`` on the bigger-than-two relation.

    Parameters
    ----------
    phi : LocalFunction
        Potential of memory ``k``.
    depths : sequence of int
        Working depths; each must be at least ``k``.
    level : int, optional
        Indicator family level, default ``k + 1`` capped at the depth.
    measure : {"eigen", "thermo"}
        Eigenprobability of ``L_{-beta phi}``, or the finite-volume weights at
        each depth.
    """
    rel = bigger_than_two()
    coc = potential_diff(phi, beta)
    out = []
    if measure == "eigen":
        mu = eigendata(-beta * phi).eigmeasure
    for D in depths:
        if measure == "thermo":
            mu = thermo_measure(beta * phi, D)
        elif measure != "eigen":
            raise ValueError(f"unknown measure {measure!r}")
        lv = min(level or phi.level + 1, D)
        for rep in kms_indicator_suite(mu, counting(), rel, coc, lv, D, tol):
            rep.test = f"depth={D} {rep.test}"
            out.append(rep)
    return out


@dataclass
class Witness:
    base: list[KmsReport]
    reweighted: list[KmsReport]
    measure: CylinderMeasure
    max_weight_gap: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.base + self.reweighted)


def nonuniqueness_witness(mu: CylinderMeasure, v: LocalFunction, kernel, coc: Cocycle,
                          rel: Relation | None = None, level: int = 2, depth: int | None = None,
                          tol: float = DEFAULT_TOL) -> Witness:
    """Check ``mu`` and ``v dmu`` (normalized) on the indicator family.

    Raises
    ------
    ValueError
        If ``v`` depends on the first coordinate.
    """
    if v.depends_on_first():
        raise ValueError("v depends on the first coordinate")
    rel = rel or bigger_than_two()
    depth = depth or max(level, v.level, coc.level, rel.r)
    mv = reweight(mu, v, normalize=True)
    base = kms_indicator_suite(mu, kernel, rel, coc, level, depth, tol)
    rew = kms_indicator_suite(mv, kernel, rel, coc, level, depth, tol)
    gap = max(float(np.max(np.abs(mv.weights(n) - mu.weights(n)))) for n in range(1, depth + 1))
    return Witness(base, rew, mv, gap)


# A Markov measure that is not KMS


@dataclass
class CounterexampleResult:
    lhs: float
    rhs: float
    passed: bool
    row_sum: float


def markov_counterexample(P, i0: int, j0: int, tol: float = DEFAULT_TOL) -> CounterexampleResult:
    """Closed-form sides for the uniform-initial Markov measure.

    ``lhs = 1/d`` and ``rhs = (sum_k P[j0, k]) / d``; the check fails iff row
    ``j0`` of the column-stochastic ``P`` does not sum to one.
    """
    P = check_column_stochastic(P)
    d = P.shape[0]
    if not (1 <= i0 <= d and 1 <= j0 <= d):
        raise ValueError("symbols out of range")
    row = float(P[j0 - 1].sum())
    lhs, rhs = 1.0 / d, row / d
    return CounterexampleResult(lhs, rhs, abs(lhs - rhs) <= tol, row)


def markov_log_jacobian(P) -> LocalFunction:
    """``log J`` with ``J(x1, x2) = P[x1, x2]``, normalized for column-stochastic ``P``."""
    P = check_column_stochastic(P)
    with np.errstate(divide="ignore"):
        return LocalFunction(P.shape[0], np.log(P).ravel())


def stationary_markov(P) -> Gibbs:
    """Eigenprobability of ``L_{log J}``: ``rho([x1..xn]) = P[x1,x2] ... P[x_{n-1},x_n] pi[x_n]``."""
    A = markov_log_jacobian(P)
    return Gibbs(A, 1.0, stationary_vector(P))


def uniform_initial_markov(P) -> CylinderMeasure:
    """``rho / (d pi[x1])``: same transitions, first marginal uniform."""
    P = np.asarray(P, dtype=float)
    pi = stationary_vector(P)
    d = P.shape[0]
    return reweight(stationary_markov(P), LocalFunction(d, 1.0 / (d * pi)), normalize=False)


def markov_cocycle(P) -> Cocycle:
    """``delta(x, y) = J(x) / J(y)``, the cocycle for which ``stationary_markov`` is KMS."""
    return potential_diff(-markov_log_jacobian(P), 1.0)


# Bowen condition


def bowen_ratio(rho: CylinderMeasure, phi: LocalFunction, points: Sequence[Point], m_max: int,
                pressure: float | None = None) -> tuple[float, float]:
    """Extremes of ``rho([x_1..x_m]) / exp(-P m - sum_{k=1}^m phi(sigma^k x))``.

    ``m`` runs over ``0..m_max``; ``P`` defaults to ``log lambda`` of ``L_{-phi}``.
    Zero-weight cylinders are skipped with a warning.
    """
    if pressure is None:
        pressure = float(np.log(eigendata(-phi).lam))
    lo, hi = np.inf, -np.inf
    skipped = 0
    for x in points:
        s, t = 0.0, x
        for m in range(m_max + 1):
            if m > 0:
                t = shift(t)
                s += phi(cylinder_prefix(t, phi.level))
            w = rho.weight(cylinder_prefix(x, m)) if m > 0 else 1.0
            if w <= 0:
                skipped += 1
                continue
            ratio = w / np.exp(-pressure * m - s)
            lo, hi = min(lo, ratio), max(hi, ratio)
    if skipped:
        warnings.warn(f"bowen_ratio skipped {skipped} zero-weight cylinders", RuntimeWarning)
    return float(lo), float(hi)


# Twist and the matrix algebra


def twist(f: GroupoidFunction, coc: Cocycle) -> GroupoidFunction:
    """``exp(-beta c) f``, i.e. ``f(x, y) delta(y, x)``."""
    fr = Frame(f.d, f.rel.r, max(f.level, coc.level, f.rel.r))
    return GroupoidFunction.from_classes(fr, f.rel, f.lift(fr) * np.swapaxes(coc.array(fr), 1, 2))


def matrix_kms_state(U, beta: float) -> np.ndarray:
    """Gibbs vector ``exp(-beta U_i) / Z``."""
    e = -beta * np.asarray(U, dtype=float)
    e = np.exp(e - e.max())
    return e / e.sum()


def matrix_kms_residual(U, beta: float, F: np.ndarray, G: np.ndarray) -> KmsReport:
    """``w(g * exp(-beta c) f)`` against ``w(f * g)`` in the full matrix algebra.

    Products follow the groupoid convention ``f * g = G @ F``, the state is
    ``w(A) = sum_i rho_i A_ii`` and ``c(i, j) = U_j - U_i``.
    """
    from .algebra import convolve

    U = np.asarray(U, dtype=float)
    d = U.size
    rel = bigger_than_two()
    rho = matrix_kms_state(U, beta)
    mu = _FiniteMeasure(rho)
    coc = potential_diff(LocalFunction(d, U), beta)
    f, g = GroupoidFunction(d, rel, F), GroupoidFunction(d, rel, G)
    lhs = state_eval(mu, convolve(g, twist(f, coc), counting()))
    rhs = state_eval(mu, convolve(f, g, counting()))
    return KmsReport.make("matrix-kms", lhs, rhs, 1, 1e-12)


class _FiniteMeasure(CylinderMeasure):
    """Weights of a probability vector on ``{1..d}`` seen as level-1 cylinders."""

    kind = "bernoulli"

    def __init__(self, p):
        super().__init__(len(p))
        self.p = np.asarray(p, dtype=float)

    def weights(self, n):
        if n != 1:
            raise ValueError("only level-1 weights are defined")
        return self.p


# Two-sided product construction


class TwoSidedFunction:
    """``V(<a|b>)`` depending on ``a_{-1..-m}`` and ``b_{0..m-1}``; table ``[past, future]``."""

    def __init__(self, d: int, table):
        t = np.asarray(table, dtype=float)
        m = int(round(np.log(t.shape[0]) / np.log(d)))
        if t.shape != (d**m, d**m):
            raise ValueError("table must be (d**m, d**m)")
        self.d, self.level, self.table = d, m, t

    def __call__(self, x) -> float:
        from .symbolic import word_index
        a = cylinder_prefix(x.past, self.level)
        b = cylinder_prefix(x.future, self.level)
        return float(self.table[word_index(a, self.d), word_index(b, self.d)])


class TwoSidedGroupoidFunction:
    """``f(<a|b1>, <a|b2>)`` on the same-past relation; table ``[past, future1, future2]``."""

    def __init__(self, d: int, table):
        t = np.asarray(table, dtype=float)
        m = int(round(np.log(t.shape[0]) / np.log(d)))
        if t.shape != (d**m,) * 3:
            raise ValueError("table must be (d**m,)*3")
        self.d, self.level, self.table = d, m, t


def _lift_index(d: int, m: int, depth: int) -> np.ndarray:
    return np.arange(d**depth) // d ** (depth - m)


def twosided_check(m: CylinderMeasure, nu: CylinderMeasure, V: TwoSidedFunction,
                   f: TwoSidedGroupoidFunction, depth: int, tol: float = 1e-12) -> KmsReport:
    """Both sides of the quasi-invariance identity for ``dM = e^V dnu dm / Z``.

    ``lhs = sum_a m(a) sum_{b, b~} f(<a|b~>, <a|b>) e^{V(a, b~)} nu(b~) e^{V(a, b)} nu(b) / Z``;
    ``rhs`` swaps the arguments of ``f``.
    """
    d = m.d
    if max(V.level, f.level) > depth:
        raise ValueError("depth below the level of V or f")
    ia = _lift_index(d, V.level, depth)
    ib = _lift_index(d, V.level, depth)
    E = np.exp(V.table[ia[:, None], ib[None, :]]) * nu.weights(depth)[None, :]  # [a, b]
    ma = m.weights(depth)
    Z = float(np.einsum("a,ab->", ma, E))
    fa = _lift_index(d, f.level, depth)
    Ft = f.table[fa[:, None, None], fa[None, :, None], fa[None, None, :]]  # [a, x, y]
    lhs = np.einsum("a,axy,ax,ay->", ma, Ft, E, E) / Z
    rhs = np.einsum("a,ayx,ax,ay->", ma, Ft, E, E) / Z
    return KmsReport.make("two-sided", lhs, rhs, depth, tol)
