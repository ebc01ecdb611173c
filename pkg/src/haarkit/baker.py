"""The T-Baker map ``F(a, b) = (psi_i(a), T(b))`` of an expanding circle map ``T``.

``T`` is given by an increasing lift ``Th`` with ``Th(0) = 0`` and
``Th(1) = deg``; its inverse branches ``psi_i`` map ``[0, 1)`` onto the
injectivity domains ``[c_{i-1}, c_i)``. Going backwards,
``F^{-1}(a, b) = (T(a), psi_{i(a)}(b))`` so the branch sequence applied to
the vertical coordinate is the forward itinerary of ``a``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cocycles import product_tail_bound
from .kms import KmsReport
from .parallel import ordered_map

NEWTON_TOL = 1e-14
NEWTON_MAX = 200


class CircleMap:
    """Expanding map of the circle.

    Parameters
    ----------
    lift, dlift : callable
        Increasing lift ``Th`` on ``[0, 1]`` and its derivative ``T'``.
    deg : int
        Topological degree, ``Th(1) = deg``.
    lam : float
        Lower bound for ``T'``; must exceed 1.
    holder : (float, float)
        ``(C, alpha)`` with ``|log T'(x) - log T'(y)| <= C |x - y|**alpha``.
    """

    def __init__(self, lift: Callable, dlift: Callable, deg: int, lam: float,
                 holder: tuple[float, float], name: str = "map"):
        if lam <= 1.0:
            raise ValueError("expansion bound must exceed 1")
        self.lift, self.dlift, self.deg, self.lam = lift, dlift, int(deg), float(lam)
        self.holder = (float(holder[0]), float(holder[1]))
        self.name = name
        grid = np.linspace(0.0, 1.0, 4097)
        if np.min(dlift(grid)) < lam - 1e-12:
            raise ValueError("T' drops below the declared expansion bound")
        self.breaks = np.empty(self.deg + 1)
        self.breaks[0], self.breaks[-1] = 0.0, 1.0
        for j in range(1, self.deg):
            self.breaks[j] = float(self._solve(np.array([float(j)]), np.array([0.0]), np.array([1.0]))[0])

    @property
    def x0(self) -> float:
        """First branch point, ``T(x0) = 1``."""
        return float(self.breaks[1])

    def T(self, x):
        return np.mod(self.lift(np.asarray(x, dtype=float)), 1.0)

    def dT(self, x):
        return self.dlift(np.asarray(x, dtype=float))

    def branch(self, x) -> np.ndarray:
        """Index ``i`` in ``1..deg`` of the injectivity domain containing ``x``."""
        i = np.searchsorted(self.breaks, np.asarray(x, dtype=float), side="right")
        return np.clip(i, 1, self.deg)

    def _solve(self, target, lo, hi):
        """Solve ``Th(x) = target`` inside ``[lo, hi]``: Newton, bisection fallback."""
        lo, hi = lo.astype(float).copy(), hi.astype(float).copy()
        x = lo + (hi - lo) * np.clip((target - self.lift(lo)) / (self.lift(hi) - self.lift(lo)), 0, 1)
        for _ in range(NEWTON_MAX):
            fx = self.lift(x) - target
            above = fx > 0
            hi = np.where(above, x, hi)
            lo = np.where(above, lo, x)
            xn = x - fx / self.dlift(x)
            bad = (xn < lo) | (xn > hi) | ~np.isfinite(xn)
            xn = np.where(bad, 0.5 * (lo + hi), xn)
            step = np.abs(xn - x)
            x = xn
            if np.all((step <= NEWTON_TOL) | (hi - lo <= NEWTON_TOL)):
                return x
        raise RuntimeError("inverse branch iteration did not converge")

    def inverse(self, i, y) -> np.ndarray:
        """``psi_i(y)``; ``i`` may be an array broadcast against ``y``."""
        y = np.asarray(y, dtype=float)
        i = np.broadcast_to(np.asarray(i, dtype=int), y.shape)
        if np.any((i < 1) | (i > self.deg)):
            raise ValueError("branch index out of range")
        return self._solve(y + (i - 1), self.breaks[i - 1], self.breaks[i])

    def __repr__(self) -> str:
        return f"CircleMap({self.name})"


def doubling() -> CircleMap:
    return CircleMap(lambda x: 2.0 * x, lambda x: np.full_like(np.asarray(x, dtype=float), 2.0),
                     2, 2.0, (0.0, 1.0), "doubling")


def perturbed(eps: float) -> CircleMap:
    """``T(x) = 2x + eps/(2 pi) sin(2 pi x) mod 1`` for ``0 <= eps < 1``."""
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    two_pi = 2.0 * np.pi

    def lift(x):
        return 2.0 * x + eps / two_pi * np.sin(two_pi * x)

    def dlift(x):
        return 2.0 + eps * np.cos(two_pi * x)

    C = two_pi * eps / (2.0 - eps)
    return CircleMap(lift, dlift, 2, 2.0 - eps, (C, 1.0), f"perturbed:{eps:g}")


def parse_map(spec: str) -> CircleMap:
    """``"doubling"`` or ``"perturbed:<eps>"``."""
    if spec == "doubling":
        return doubling()
    if spec.startswith("perturbed:"):
        return perturbed(float(spec.split(":", 1)[1]))
    raise ValueError(f"unknown map {spec!r}")


def baker_apply(cmap: CircleMap, a, b):
    """``F(a, b)``; works elementwise on arrays."""
    b = np.asarray(b, dtype=float)
    return cmap.inverse(cmap.branch(b), a), cmap.T(b)


def itinerary(cmap: CircleMap, a, N: int) -> np.ndarray:
    """Branch symbols of ``a, T a, ..., T^{N-1} a``; shape ``(..., N)``."""
    x = np.asarray(a, dtype=float)
    out = np.empty(x.shape + (N,), dtype=int)
    for n in range(N):
        out[..., n] = cmap.branch(x)
        x = cmap.T(x)
    return out


def preimages(cmap: CircleMap, itin: np.ndarray, y) -> np.ndarray:
    """``y^n = psi_{i_n}(y^{n-1})`` for ``n = 1..N``; shape ``(..., N)``."""
    y = np.broadcast_to(np.asarray(y, dtype=float), itin.shape[:-1]).copy()
    out = np.empty(itin.shape)
    for n in range(itin.shape[-1]):
        y = cmap.inverse(itin[..., n], y)
        out[..., n] = y
    return out


def backward_fiber_orbit(cmap: CircleMap, a: float, b: float, b0: float, N: int):
    """Lists ``(b^n, s^n)``, ``n = 1..N``, along the branch sequence of ``a``."""
    if N < 1:
        raise ValueError("N must be positive")
    it = itinerary(cmap, a, N)
    return preimages(cmap, it, b), preimages(cmap, it, b0)


def log_derivative_sum(cmap: CircleMap, itin: np.ndarray, y) -> np.ndarray:
    """``sum_n log T'(y^n)`` along the backward orbit of ``y``."""
    return np.sum(np.log(cmap.dT(preimages(cmap, itin, y))), axis=-1)


def log_v(cmap: CircleMap, itin: np.ndarray, b, b0: float, reciprocal: bool = False) -> np.ndarray:
    """``sum_n log T'(b^n) - log T'(s^n)`` for the given itineraries."""
    val = log_derivative_sum(cmap, itin, b) - log_derivative_sum(cmap, itin, b0)
    return -val if reciprocal else val


def v_tail_bound(cmap: CircleMap, N: int) -> float:
    """Bound on ``|log V_true - log V_N|``, using ``|b^n - s^n| <= lam**-n``."""
    C, alpha = cmap.holder
    return product_tail_bound(C, alpha, cmap.lam, N)


def v_product(cmap: CircleMap, a: float, b: float, b0: float, N: int) -> tuple[float, float]:
    """``V(a, b) = prod_{n<=N} T'(b^n) / T'(s^n)`` with a bound on the log-tail."""
    it = itinerary(cmap, np.array([a]), N)
    return float(np.exp(log_v(cmap, it, np.array([b]), b0))[0]), v_tail_bound(cmap, N)


def gauss_legendre(order: int, panels: int = 1, lo: float = 0.0, hi: float = 1.0):
    """Composite Gauss-Legendre nodes and weights on ``[lo, hi]``; symmetric about the midpoint."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + (x[None, :] + 1.0) * 0.5 * h[:, None]).ravel()
    weights = (w[None, :] * 0.5 * h[:, None]).ravel()
    return nodes, weights


class FiberDensity:
    """``psi(a, b) = V(a, b) / int V(a, c) dc`` with quadrature normalization.

    Normalizers are cached per itinerary, since ``V`` depends on ``a`` only
    through its first ``N`` branch symbols.
    """

    def __init__(self, cmap: CircleMap, N: int = 40, b0: float = 0.3, order: int = 128,
                 reciprocal: bool = False):
        self.cmap, self.N, self.b0, self.order = cmap, N, b0, order
        self.reciprocal = reciprocal
        self.nodes, self.weights = gauss_legendre(order)
        self._Z: dict[bytes, float] = {}

    def log_v(self, itin, b, s_part=None):
        """``log V``; ``s_part`` may supply the precomputed ``b0`` orbit sum per itinerary."""
        if s_part is None:
            return log_v(self.cmap, itin, b, self.b0, self.reciprocal)
        val = log_derivative_sum(self.cmap, itin, b) - s_part
        return -val if self.reciprocal else val

    def s_part(self, itin):
        return log_derivative_sum(self.cmap, itin, self.b0)

    def normalizers(self, itin: np.ndarray) -> np.ndarray:
        flat = np.ascontiguousarray(itin.reshape(-1, self.N))
        uniq, inv = np.unique(flat, axis=0, return_inverse=True)
        missing = [u for u in uniq if u.tobytes() not in self._Z]
        if missing:
            M = np.array(missing)
            vals = np.exp(self.log_v(np.repeat(M[:, None, :], self.order, axis=1),
                                     np.broadcast_to(self.nodes, (len(M), self.order))))
            for u, z in zip(M, vals @ self.weights):
                self._Z[u.tobytes()] = float(z)
        Z = np.array([self._Z[u.tobytes()] for u in uniq])
        return Z[inv.ravel()].reshape(itin.shape[:-1])

    def psi_itin(self, itin: np.ndarray, b) -> np.ndarray:
        return np.exp(self.log_v(itin, b)) / self.normalizers(itin)

    def __call__(self, a, b) -> np.ndarray:
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        return self.psi_itin(itinerary(self.cmap, a, self.N), b)

    def mass(self, itin: np.ndarray, lo: float, hi: float) -> np.ndarray:
        """``int_lo^hi psi(a, c) dc`` per itinerary row."""
        x, w = gauss_legendre(self.order, 1, lo, hi)
        flat = itin.reshape(-1, self.N)
        v = np.exp(self.log_v(np.repeat(flat[:, None, :], self.order, axis=1),
                              np.broadcast_to(x, (len(flat), self.order))))
        return (v @ w / self.normalizers(flat)).reshape(itin.shape[:-1])


def grid_nodes(n: int) -> np.ndarray:
    """Cell midpoints ``(i + 1/2) / n``."""
    return (np.arange(n) + 0.5) / n


@dataclass
class GridField:
    """Residual field on the ``n x n`` midpoint grid, indexed ``[a, b]``."""

    n: int
    values: np.ndarray
    budget: float = 0.0

    @property
    def max(self) -> float:
        return float(np.max(self.values))

    def rows(self):
        g = grid_nodes(self.n)
        for i in range(self.n):
            for j in range(self.n):
                yield g[i], g[j], float(self.values[i, j])


def _image_itin(itin_a: np.ndarray, ib: np.ndarray) -> np.ndarray:
    """Itinerary of ``psi_i(a)``: the symbol ``i`` followed by that of ``a``."""
    out = np.empty(ib.shape + (itin_a.shape[-1],), dtype=int)
    out[..., 0] = ib
    out[..., 1:] = itin_a[..., :-1]
    return out


def _grid_fields(dens: FiberDensity, n: int, kind: str, chunk: int = 32) -> np.ndarray:
    cmap = dens.cmap
    g = grid_nodes(n)
    it_rows = itinerary(cmap, g, dens.N)
    Z_a = dens.normalizers(it_rows)
    img = np.stack([_image_itin(it_rows, np.full(n, j)) for j in range(1, cmap.deg + 1)], axis=1)
    Z_img = dens.normalizers(img)  # [a, branch]
    S_a, S_img = dens.s_part(it_rows), dens.s_part(img)
    ib = cmap.branch(g)
    Tg, dTb = cmap.T(g), cmap.dT(g)
    if kind == "fiber-mass":
        mass = np.stack([dens.mass(it_rows, cmap.breaks[j - 1], cmap.breaks[j])
                         for j in range(1, cmap.deg + 1)], axis=1)

    def block(lo):
        R = np.arange(lo, min(lo + chunk, n))
        ita = np.broadcast_to(it_rows[R][:, None, :], (len(R), n, dens.N))
        psi = np.exp(dens.log_v(ita, np.broadcast_to(g, (len(R), n)), S_a[R][:, None])) / Z_a[R][:, None]
        itf = img[R][:, ib - 1, :]
        psiF = np.exp(dens.log_v(itf, np.broadcast_to(Tg, (len(R), n)), S_img[R][:, ib - 1])) / Z_img[R][:, ib - 1]
        if kind == "deg-corrected":
            return np.abs(psi * cmap.deg / dTb - psiF)
        if kind == "sbr":
            at = cmap.inverse(ib[None, :], np.broadcast_to(g[R][:, None], (len(R), n)))
            return np.abs(psi * cmap.dT(at) / dTb - psiF)
        if kind == "fiber-mass":
            return np.abs(psi / (dTb * mass[R][:, ib - 1]) - psiF)
        raise ValueError(kind)

    return np.concatenate(ordered_map(block, list(range(0, n, chunk))), axis=0)


def _budget(dens: FiberDensity, values_scale: float) -> float:
    """Truncation plus quadrature allowance for a residual of size ``values_scale``."""
    tau = v_tail_bound(dens.cmap, dens.N)
    probe = itinerary(dens.cmap, grid_nodes(16), dens.N)
    fine = FiberDensity(dens.cmap, dens.N, dens.b0, 2 * dens.order, dens.reciprocal)
    q = float(np.max(np.abs(dens.normalizers(probe) / fine.normalizers(probe) - 1.0)))
    return values_scale * (np.expm1(2.0 * tau + 2.0 * q)) + 1e-12


def density_residual(cmap: CircleMap, grid: int = 512, N: int = 40, order: int = 128,
                         b0: float = 0.3) -> GridField:
    """``|psi(a, b) deg / T'(b) - psi(F(a, b))|`` on the grid, with its error budget."""
    dens = FiberDensity(cmap, N, b0, order)
    vals = _grid_fields(dens, grid, "deg-corrected")
    return GridField(grid, vals, _budget(dens, _scale(dens)))


def _scale(dens: FiberDensity) -> float:
    """Rough sup of ``psi`` and ``psi o F`` terms, from a 64 x 64 probe."""
    g = grid_nodes(64)
    return 2.0 * float(np.max(dens(g[:, None], g[None, :]))) * max(1.0, dens.cmap.deg / dens.cmap.lam)


def fiber_mass_residual(cmap: CircleMap, grid: int = 128, N: int = 40, order: int = 128,
                            b0: float = 0.3) -> GridField:
    """Residual of ``psi'(a, b) / (T'(b) m_a(I_i)) = psi'(F(a, b))``.

    Here ``psi'`` uses the reciprocal product ``prod T'(s^n) / T'(b^n)`` and
    ``m_a(I_i)`` is the ``psi'(a, .)``-mass of the injectivity domain of ``b``.
    """
    dens = FiberDensity(cmap, N, b0, order, reciprocal=True)
    vals = _grid_fields(dens, grid, "fiber-mass")
    return GridField(grid, vals, _budget(dens, _scale(dens)))


def sbr_discrepancy(cmap: CircleMap, grid: int = 512, N: int = 40, order: int = 128,
                    b0: float = 0.3) -> GridField:
    """``|psi(a, b) T'(a~) / T'(b) - psi(F(a, b))|`` with ``F(a, b) = (a~, b~)``."""
    dens = FiberDensity(cmap, N, b0, order)
    return GridField(grid, _grid_fields(dens, grid, "sbr"))


def baker_kms_residual(cmap: CircleMap, f: Callable, order: int = 128, N: int = 40, b0: float = 0.3,
                       tol: float = 1e-6) -> KmsReport:
    """Both sides of the quasi-invariance identity for ``M = psi(a, b) db da``.

    ``f(a, b1, b2)`` is the test function at the pair ``((a, b1), (a, b2))``.
    The left side integrates ``f(s, y)`` over the fiber of ``y``, the right
    side ``f(y, s) delta(y, s)^-1`` with ``delta(y, s) = V(y) / V(s)``.
    """
    dens = FiberDensity(cmap, N, b0, order)
    x, w = gauss_legendre(order)
    it = itinerary(cmap, x, N)
    itb = np.repeat(it[:, None, :], order, axis=1)
    V = np.exp(dens.log_v(itb, np.broadcast_to(x, (order, order))))  # [a, b]
    psi = V / (V @ w)[:, None]
    A = x[:, None, None]
    B = x[None, :, None]
    S = x[None, None, :]
    f_sy = f(A, S, B)  # f((a, s), (a, b)), axes [a, b, s]
    f_ys = f(A, B, S)
    dinv = V[:, None, :] / V[:, :, None]  # V(a, s) / V(a, b)
    lhs = np.einsum("a,b,s,ab,abs->", w, w, w, psi, f_sy)
    rhs = np.einsum("a,b,s,ab,abs,abs->", w, w, w, psi, f_ys, dinv)
    return KmsReport.make("baker-kms", lhs, rhs, N, tol + v_tail_bound(cmap, N))
