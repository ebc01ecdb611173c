"""Convolution algebra of groupoid functions and calculus of kernels.

All operations work class by class on depth-``D`` arrays of shape
``(C, n, n)``; see :mod:`haarkit.groupoid` for the layout. A kernel array
holds ``K[c, y, s] = nu^y(s)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cocycles import Cocycle
from .groupoid import (Frame, GroupoidFunction, HaarKernel, Relation, kernel_array,
                       kernel_min_depth)
from .local import LocalFunction
from .measures import CylinderMeasure
from .symbolic import Point, cylinder_prefix, index_word, word_index


class KernelObject:
    """Assignment ``y -> nu^y`` of finite measures on the class of ``y``.

    Parameters
    ----------
    d : int
        Alphabet size.
    rel : Relation
        Relation whose classes carry the measures.
    builder : callable
        ``builder(frame) -> ndarray`` of shape ``(C, n, n)``.
    min_depth : int
        Smallest depth at which ``builder`` is exact.
    """

    def __init__(self, d: int, rel: Relation, builder: Callable[[Frame], np.ndarray],
                 min_depth: int, name: str = "kernel"):
        self.d, self.rel, self.builder = d, rel, builder
        self.min_depth = max(min_depth, rel.r)
        self.name = name

    def array(self, frame: Frame) -> np.ndarray:
        if frame.depth < self.min_depth:
            raise ValueError(f"{self.name} needs depth >= {self.min_depth}")
        return self.builder(frame)

    def frame(self, depth: int | None = None) -> Frame:
        return Frame(self.d, self.rel.r, max(depth or 0, self.min_depth))

    def weights_at(self, p: Point) -> list[tuple[Point, float]]:
        """Weighted fiber list of ``p``."""
        fr = self.frame()
        idx = word_index(cylinder_prefix(p, fr.depth), self.d)
        c, j = idx % fr.C, idx // fr.C
        row = self.array(fr)[c, j]
        return [(p.replace_prefix(index_word(s, self.d, self.rel.r)), float(row[s]))
                for s in range(fr.n)]

    def mass(self, frame: Frame) -> np.ndarray:
        """``nu^y(1)`` for every class slot, shape ``(C, n)``."""
        return self.array(frame).sum(axis=2)

    def __repr__(self) -> str:
        return f"KernelObject({self.name}, rel={self.rel})"


def as_kernel(kernel, rel: Relation, d: int) -> KernelObject:
    if isinstance(kernel, KernelObject):
        return kernel
    if isinstance(kernel, HaarKernel):
        return KernelObject(d, rel, lambda fr: kernel_array(kernel, fr),
                            kernel_min_depth(kernel, rel), kernel.kind)
    raise TypeError(f"not a kernel: {kernel!r}")


def delta_kernel(d: int, rel: Relation) -> KernelObject:
    """Unit mass at ``y`` itself."""
    return KernelObject(d, rel, lambda fr: np.broadcast_to(np.eye(fr.n), (fr.C, fr.n, fr.n)).copy(),
                        rel.r, "delta")


def table_kernel(d: int, rel: Relation, W: np.ndarray) -> KernelObject:
    """Kernel with ``nu^y(s) = W[prefix(y), prefix(s)]`` at level ``log_d len(W)``."""
    W = np.asarray(W, dtype=float)
    m = int(round(np.log(W.shape[0]) / np.log(d)))

    def build(fr):
        py, ps = fr.pair_prefix(m)
        return W[py, ps]

    return KernelObject(d, rel, build, m, "table")


def class_kernel(d: int, rel: Relation, depth: int, arr: np.ndarray) -> KernelObject:
    """Kernel given directly by its ``(C, n, n)`` array at ``depth``."""
    arr = np.asarray(arr, dtype=float)

    def build(fr):
        # a class at a larger depth refines the class named by its leading tail symbols
        return np.repeat(arr, d ** (fr.depth - depth), axis=0)

    return KernelObject(d, rel, build, depth, "class-array")


def transverse_table_kernel(d: int, rel: Relation, w: np.ndarray) -> KernelObject:
    """Transverse kernel ``nu^y(s) = w[prefix(s)]``."""
    w = np.asarray(w, dtype=float)
    return table_kernel(d, rel, np.broadcast_to(w[None, :], (w.size, w.size)))


def is_transverse_kernel(nu: KernelObject, depth: int | None = None, tol: float = 1e-12) -> bool:
    """Exact check that ``nu^y`` does not depend on ``y`` within each class."""
    K = nu.array(nu.frame(depth))
    return bool(np.max(np.abs(K - K[:, :1, :])) <= tol)


def kernel_convolve(l1: KernelObject, l2: KernelObject) -> KernelObject:
    """``(l1 * l2)^y(ds) = int l2^x(ds) l1^y(dx)``."""
    return KernelObject(l1.d, l1.rel, lambda fr: l1.array(fr) @ l2.array(fr),
                        max(l1.min_depth, l2.min_depth), f"({l1.name}*{l2.name})")


def scale_kernel(g: GroupoidFunction, nu: KernelObject) -> KernelObject:
    """``(g nu)^y(ds) = g(s, y) nu^y(ds)``."""
    def build(fr):
        return np.real_if_close(np.swapaxes(g.lift(fr), 1, 2)) * nu.array(fr)
    return KernelObject(nu.d, nu.rel, build, max(nu.min_depth, g.level), f"g.{nu.name}")


def weight_kernel(h: LocalFunction, nu: KernelObject) -> KernelObject:
    """``(h nu)^y(ds) = h(s) nu^y(ds)``."""
    def build(fr):
        hs = fr.to_classes(h.at_depth(fr.depth))
        return hs[:, None, :] * nu.array(fr)
    return KernelObject(nu.d, nu.rel, build, max(nu.min_depth, h.level), f"h.{nu.name}")


def _depth(*levels: int) -> int:
    return max(levels)


def convolve(f: GroupoidFunction, g: GroupoidFunction, kernel, rel: Relation | None = None
             ) -> GroupoidFunction:
    """``(f * g)(x, y) = sum_s g(x, s) f(s, y) nu^y(s)``."""
    rel = rel or f.rel
    nu = as_kernel(kernel, rel, f.d)
    fr = nu.frame(_depth(f.level, g.level))
    F, G, K = f.lift(fr), g.lift(fr), nu.array(fr)
    return GroupoidFunction.from_classes(fr, rel, G @ (F * np.swapaxes(K, 1, 2)))


def involution(f: GroupoidFunction) -> GroupoidFunction:
    """``f~(x, y) = conj(f(y, x))``."""
    return GroupoidFunction(f.d, f.rel, np.conj(f.table.T))


def identity(kernel, rel: Relation, d: int) -> GroupoidFunction:
    """Unit of the convolution algebra of a transverse kernel: ``I_Delta / nu^x({x})``."""
    nu = as_kernel(kernel, rel, d)
    fr = nu.frame()
    K = nu.array(fr)
    diag = np.einsum("cii->ci", K)
    arr = np.zeros_like(K)
    idx = np.arange(fr.n)
    arr[:, idx, idx] = 1.0 / diag
    return GroupoidFunction.from_classes(fr, rel, arr)


def i_norm(f: GroupoidFunction, kernel, classes=None) -> float:
    """I-norm: the larger of the two sup-over-fiber integrals of ``|f|``.

    ``classes`` restricts the sup to a subset of class indices at the
    working depth; ``None`` uses every class.
    """
    nu = as_kernel(kernel, f.rel, f.d)
    fr = nu.frame(f.level)
    A, K = np.abs(f.lift(fr)), nu.array(fr)
    if classes is not None:
        A, K = A[classes], K[classes]
    # sum_x |f(x, y)| nu^y(x) and sum_x |f(y, x)| nu^y(x)
    left = np.einsum("cxy,cyx->cy", A, K)
    right = np.einsum("cyx,cyx->cy", A, K)
    return float(max(left.max(), right.max()))


@dataclass
class PositivityVerdict:
    positive: bool
    hermitian: bool
    min_eigenvalue: float


def is_positive(h: GroupoidFunction, cls: int = 0, depth: int | None = None,
                tol: float = 1e-10) -> PositivityVerdict:
    """PSD test of the fiber matrix ``H[x, y] = h(x, y)`` on one class."""
    fr = Frame(h.d, h.rel.r, max(depth or 0, h.level, h.rel.r))
    H = h.lift(fr)[cls]
    if np.max(np.abs(H - np.conj(H.T))) > 1e-12 * max(1.0, np.max(np.abs(H))):
        return PositivityVerdict(False, False, float("nan"))
    ev = float(np.linalg.eigvalsh(H).min())
    return PositivityVerdict(ev >= -tol, True, ev)


def state_eval(mu: CylinderMeasure, f: GroupoidFunction) -> complex:
    """``sum_{|w| = m} f(w, w) mu([w])`` with ``m`` the level of ``f``."""
    m = max(f.level, f.rel.r)
    fr = Frame(f.d, f.rel.r, m)
    diag = np.einsum("cii->ci", f.lift(fr))
    val = np.sum(diag * fr.to_classes(mu.weights(m)))
    return complex(val) if np.iscomplexobj(val) else float(val)


# Kernels acting on functions


def kernel_apply(nu: KernelObject, f: GroupoidFunction) -> LocalFunction:
    """``nu(f)(y) = sum_s f(s, y) nu^y(s)`` as a local function."""
    fr = nu.frame(f.level)
    F, K = np.real_if_close(f.lift(fr)), nu.array(fr)
    vals = np.einsum("csy,cys->cy", F, K)
    return _classes_to_local(fr, vals)


def kernel_times_function(nu: KernelObject, f: GroupoidFunction) -> GroupoidFunction:
    """``(nu * f)(x, y) = sum_s f(x, s) nu^y(s)``."""
    fr = nu.frame(f.level)
    return GroupoidFunction.from_classes(fr, f.rel, f.lift(fr) @ np.swapaxes(nu.array(fr), 1, 2))


def function_times_kernel(f: GroupoidFunction, nu: KernelObject) -> GroupoidFunction:
    """``(f * nu)(x, y) = sum_s f(s, y) nu^x(s)``."""
    fr = nu.frame(f.level)
    return GroupoidFunction.from_classes(fr, f.rel, nu.array(fr) @ f.lift(fr))


def _classes_to_local(fr: Frame, vals: np.ndarray) -> LocalFunction:
    flat = np.empty(fr.d**fr.depth, dtype=vals.dtype)
    flat[fr.flat()] = vals
    return LocalFunction(fr.d, np.real_if_close(flat).real)


def kernel_max_diff(a: KernelObject, b: KernelObject, depth: int | None = None) -> float:
    fr = a.frame(max(depth or 0, b.min_depth))
    return float(np.max(np.abs(a.array(fr) - b.array(fr))))


# Transverse measures


@dataclass(frozen=True)
class TransverseMeasureSpec:
    """``Lambda(nu) = int sum_s delta(s, x)^-1 nu^x(s) dmu(x)``."""

    mu: CylinderMeasure
    coc: Cocycle


def transverse_measure_eval(spec: TransverseMeasureSpec, nu, depth: int,
                            rel: Relation | None = None) -> float:
    nu = as_kernel(nu, rel, spec.mu.d) if rel is not None else nu
    fr = nu.frame(max(depth, spec.coc.level))
    K = nu.array(fr)
    D = spec.coc.array(fr)
    mu = fr.to_classes(spec.mu.weights(fr.depth))
    # D[c, s, x] = delta(s, x)
    return float(np.einsum("cx,cxs,csx->", mu, K, 1.0 / D))


def modular_kernel(coc: Cocycle, lam: KernelObject) -> KernelObject:
    """``(delta lam)^x(ds) = delta(s, x) lam^x(ds)``."""
    def build(fr):
        return np.swapaxes(coc.array(fr), 1, 2) * lam.array(fr)
    return KernelObject(lam.d, lam.rel, build, max(lam.min_depth, coc.level), f"delta.{lam.name}")


def lambda_functional(spec: TransverseMeasureSpec, nu: KernelObject, h: LocalFunction,
                      depth: int) -> float:
    """``Lambda_nu(h) = Lambda(h nu)``."""
    return transverse_measure_eval(spec, weight_kernel(h, nu), depth)
