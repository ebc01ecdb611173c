"""Randomized identity families over the algebra, transverse measures and two-sided products.

Each family returns ``{name: max residual}`` over its instances.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from .algebra import (TransverseMeasureSpec, as_kernel, class_kernel, convolve, delta_kernel, identity, involution,
                      kernel_apply, kernel_convolve, kernel_max_diff, kernel_times_function,
                      lambda_functional, modular_kernel, scale_kernel, table_kernel,
                      transverse_measure_eval, transverse_table_kernel, weight_kernel)
from .cocycles import potential_diff
from .groupoid import (Frame, GroupoidFunction, bigger_than_two, counting, jacobian, k_tail,
                       random_function)
from .kms import TwoSidedFunction, TwoSidedGroupoidFunction, twosided_check
from .local import LocalFunction
from .measures import bernoulli, markov
from .ruelle import eigendata


def random_jacobian(rng: np.random.Generator, d: int, level: int) -> LocalFunction:
    t = rng.uniform(0.2, 1.0, (d, d ** (level - 1)))
    return LocalFunction(d, (t / t.sum(axis=0)).ravel())


def random_probability(rng: np.random.Generator, d: int) -> np.ndarray:
    p = rng.uniform(0.1, 1.0, d)
    return p / p.sum()


def random_column_stochastic(rng: np.random.Generator, d: int) -> np.ndarray:
    P = rng.uniform(0.1, 1.0, (d, d))
    return P / P.sum(axis=0)


def random_measure(rng: np.random.Generator, d: int):
    kind = rng.integers(3)
    if kind == 0:
        return bernoulli(random_probability(rng, d))
    if kind == 1:
        return markov(random_column_stochastic(rng, d), random_probability(rng, d))
    return eigendata(LocalFunction(d, rng.normal(size=d**2))).eigmeasure


def _random_kernel_setup(rng):
    d = int(rng.choice([2, 3]))
    r = int(rng.choice([1, 2])) if d == 2 else 1
    rel = bigger_than_two() if r == 1 else k_tail(r)
    return d, rel


def _transverse(rng, d, rel, level):
    return transverse_table_kernel(d, rel, rng.uniform(0.1, 1.0, d**level))


def algebra_identities(rng: np.random.Generator, instances: int = 100) -> dict[str, float]:
    """Associativity, involution, unit laws, delta-kernel laws and the kernel rescaling identities."""
    worst: dict[str, float] = defaultdict(float)

    def note(name, val):
        worst[name] = max(worst[name], float(val))

    for _ in range(instances):
        d, rel = _random_kernel_setup(rng)
        lv = rel.r + 1
        kind = rng.integers(3)
        if kind == 0:
            ker = counting()
        elif kind == 1:
            ker = _transverse(rng, d, rel, lv)
        else:
            ker = jacobian(random_jacobian(rng, d, 2))
        f, g, h = (random_function(rng, d, rel, lv, complex_values=True) for _ in range(3))
        note("associativity", convolve(convolve(f, g, ker), h, ker).max_abs_diff(
            convolve(f, convolve(g, h, ker), ker)))
        note("involution", involution(convolve(f, g, ker)).max_abs_diff(
            convolve(involution(g), involution(f), ker)))
        note("involution-twice", involution(involution(f)).max_abs_diff(f))

        for unit_kernel in (counting(), jacobian(random_jacobian(rng, d, 2))):
            u = identity(unit_kernel, rel, d)
            note("unit-" + as_kernel(unit_kernel, rel, d).name,
                 max(convolve(f, u, unit_kernel).max_abs_diff(f), convolve(u, f, unit_kernel).max_abs_diff(f)))

        # delta kernel is a two-sided unit for kernel convolution
        nu = table_kernel(d, rel, rng.uniform(0.1, 1.0, (d**lv, d**lv)))
        dl = delta_kernel(d, rel)
        note("delta-kernel", max(kernel_max_diff(kernel_convolve(dl, nu), nu),
                                 kernel_max_diff(kernel_convolve(nu, dl), nu)))
        l3 = table_kernel(d, rel, rng.uniform(0.1, 1.0, (d**lv, d**lv)))
        l2 = _transverse(rng, d, rel, lv)
        note("kernel-associativity", kernel_max_diff(kernel_convolve(kernel_convolve(nu, l2), l3),
                                                     kernel_convolve(nu, kernel_convolve(l2, l3))))

        # rescaled kernel: nu0 * (g nu) = nu when int g(s, x) nu0^y(dx) = 1
        w0 = rng.uniform(0.1, 1.0, d**lv)
        nu0 = transverse_table_kernel(d, rel, w0)
        nu = _transverse(rng, d, rel, lv)
        fr = Frame(d, rel.r, lv)
        G = rng.uniform(0.1, 1.0, (fr.C, fr.n, fr.n))
        W0 = fr.to_classes(w0)
        G /= np.einsum("csx,cx->cs", G, W0)[:, :, None]
        g_norm = GroupoidFunction.from_classes(fr, rel, G)
        note("rescaled-kernel", kernel_max_diff(kernel_convolve(nu0, scale_kernel(g_norm, nu)), nu))

        # mass inverse: lambda = g0 nu with g0(s) = 1 / nu0^s(1)
        mass = np.empty(d**lv)
        mass[fr.flat()] = nu0.mass(fr)
        lam = weight_kernel(LocalFunction(d, 1.0 / mass), nu)
        note("mass-inverse", kernel_max_diff(kernel_convolve(nu0, lam), nu))

        # scaling commutes: lambda * (g nu) = (lambda * g) nu, lambda arbitrary, nu transverse
        lam = table_kernel(d, rel, rng.uniform(0.1, 1.0, (d**lv, d**lv)))
        gg = random_function(rng, d, rel, lv)
        note("scaling-commutes", kernel_max_diff(kernel_convolve(lam, scale_kernel(gg, nu)),
                                     scale_kernel(kernel_times_function(lam, gg), nu)))

        # kernel exchange: lambda(nu * f) = nu(lambda * f~) for transverse lambda, nu
        lam = _transverse(rng, d, rel, lv)
        fr_ = random_function(rng, d, rel, lv, positive=True)
        a = kernel_apply(lam, kernel_times_function(nu, fr_))
        b = kernel_apply(nu, kernel_times_function(lam, involution(fr_)))
        m = max(a.level, b.level)
        note("kernel-exchange", np.max(np.abs(a.at_depth(m) - b.at_depth(m))))
    return dict(worst)


def transverse_family(rng: np.random.Generator, instances: int = 50, k_max: int = 3) -> list[dict]:
    """Invariance ``Lambda(nu) = Lambda(nu * delta lambda)`` and the companion
    identity ``Lambda_nu'(nu(delta~ f)) = Lambda_nu(nu'(f~))`` on ``KTail(k)``.

    Returns one record per instance with both sides of each identity.
    """
    out = []
    for i in range(instances):
        k = 1 + i % k_max
        d = 2
        rel = k_tail(k)
        depth = k + 1
        phi = LocalFunction(d, rng.normal(size=d**2))
        coc = potential_diff(phi, float(rng.uniform(0.2, 2.0)))
        spec = TransverseMeasureSpec(random_measure(rng, d), coc)
        nu = _transverse(rng, d, rel, depth)
        nu2 = _transverse(rng, d, rel, depth)
        fr = Frame(d, rel.r, depth)
        La = rng.uniform(0.1, 1.0, (fr.C, fr.n, fr.n))
        lam = class_kernel(d, rel, depth, La / La.sum(axis=2, keepdims=True))
        left = transverse_measure_eval(spec, nu, depth)
        right = transverse_measure_eval(spec, kernel_convolve(nu, modular_kernel(coc, lam)), depth)

        f = random_function(rng, d, rel, depth, positive=True)
        D = coc.array(fr)
        dtf = GroupoidFunction.from_classes(fr, rel, f.lift(fr) * np.swapaxes(D, 1, 2))
        c_left = lambda_functional(spec, nu2, kernel_apply(nu, dtf), depth)
        c_right = lambda_functional(spec, nu, kernel_apply(nu2, involution(f)), depth)
        out.append({"k": k, "invariance": (left, right), "companion": (c_left, c_right)})
    return out


def twosided_family(rng: np.random.Generator, instances: int = 50, depth: int = 3, d: int = 2):
    """Reports of the two-sided product construction for random ``(m, nu, V, f)``."""
    out = []
    for _ in range(instances):
        m = random_measure(rng, d)
        nu = random_measure(rng, d)
        V = TwoSidedFunction(d, rng.normal(size=(d**2, d**2)))
        f = TwoSidedGroupoidFunction(d, rng.normal(size=(d**2,) * 3))
        out.append(twosided_check(m, nu, V, f, depth))
    return out
