"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with the measured numbers.
Run ``python3 tests/test_acceptance.py`` for the lines alone, or
``pytest tests/test_acceptance.py -v`` for the pytest verdicts.
"""

from __future__ import annotations

import sys
import time

import numpy as np
import pytest

from haarkit import baker as bk
from haarkit.checks import algebra_identities, random_measure, transverse_family, twosided_family
from haarkit.cocycles import potential_diff
from haarkit.groupoid import bigger_than_two, counting, indicator_pair
from haarkit.kms import (bowen_ratio, kms_indicator_suite, kms_residual, markov_cocycle, markov_counterexample,
                         matrix_kms_residual, max_residual, nonuniqueness_witness, stationary_markov,
                         uniform_initial_markov, verify_gibbs_kms)
from haarkit.local import LocalFunction
from haarkit.measures import bernoulli
from haarkit.ruelle import eigendata
from haarkit.symbolic import random_point

SEED = 0


def _line(num: int, ok: bool, detail: str) -> str:
    return f"{'PASS' if ok else 'FAIL'} criterion {num:2d}: {detail}"


def criterion_1():
    rng = np.random.default_rng(SEED)
    lam_err = meas_err = 0.0
    for i in range(100):
        d = (2, 3, 4)[i % 3]
        A = LocalFunction(d, rng.normal(size=d))
        e = eigendata(A)
        lam = float(np.exp(A.table).sum())
        lam_err = max(lam_err, abs(e.lam - lam))
        ref = bernoulli(np.exp(A.table) / lam)
        meas_err = max(meas_err, float(np.max(np.abs(e.eigmeasure.weights(3) - ref.weights(3)))))
    ok = lam_err < 1e-12 and meas_err < 1e-12
    return ok, f"transfer operator, 100 memory-1 potentials: max |lam err| {lam_err:.1e}, " \
               f"max eigenmeasure err {meas_err:.1e} (tol 1e-12)"


def criterion_2():
    rng = np.random.default_rng(SEED)
    worst, count = 0.0, 0
    for k in (1, 2, 3):
        phi = LocalFunction(2, rng.normal(size=2**k))
        for beta in (0.5, 1.0, 2.0):
            reps = verify_gibbs_kms(phi, beta, [k + 3], level=k + 1)
            count += len(reps)
            worst = max(worst, max_residual(reps))
    return worst < 1e-10, f"Gibbs eigenprobability KMS, k=1..3, beta in (0.5,1,2), {count} indicator tests: " \
                          f"max residual {worst:.1e} (tol 1e-10)"


def criterion_3():
    P = np.array([[0.3, 0.6], [0.7, 0.4]])
    res = markov_counterexample(P, 2, 1)
    # 0.45 is not representable; 0.9 / 2 rounds to the float nearest 0.45
    closed_ok = res.lhs == 0.5 and abs(res.rhs - 0.45) <= 1e-15 and not res.passed
    rel = bigger_than_two()
    coc = markov_cocycle(P)
    stat = max_residual(kms_indicator_suite(stationary_markov(P), counting(), rel, coc, 2, 3))
    exact = kms_residual(uniform_initial_markov(P), counting(), rel, coc, indicator_pair(2, rel, (2,), (1,)), 2)
    ok = closed_ok and stat < 1e-12 and not exact.passed
    return ok, f"uniform-initial Markov: lhs {res.lhs:.17g}, rhs {res.rhs:.17g} -> fails as required; " \
               f"exact measure also fails (rhs {exact.rhs:.6f}); stationary max residual {stat:.1e} (tol 1e-12)"


def criterion_4():
    rng = np.random.default_rng(SEED)
    phi = LocalFunction(2, rng.normal(size=4))
    mu = eigendata(-phi).eigmeasure
    coc = potential_diff(phi)
    worst_res, min_gap = 0.0, np.inf
    for _ in range(20):
        t = rng.uniform(0.0, 2.0, 4)
        v = LocalFunction(2, np.tile(t, 2))
        w = nonuniqueness_witness(mu, v, counting(), coc, level=2, depth=4)
        worst_res = max(worst_res, max_residual(w.base + w.reweighted))
        min_gap = min(min_gap, w.max_weight_gap)
    ok = worst_res < 1e-10 and min_gap > 1e-6
    return ok, f"non-uniqueness, 20 reweightings: min weight gap {min_gap:.2e} (> 1e-6), " \
               f"max KMS residual {worst_res:.1e} (tol 1e-10)"


def criterion_5():
    worst = algebra_identities(np.random.default_rng(SEED), instances=100)
    top = max(worst, key=worst.get)
    ok = max(worst.values()) < 1e-12
    return ok, f"algebra identities ({len(worst)} families x 100 instances): worst {top} {worst[top]:.1e} " \
               f"(tol 1e-12)"


def criterion_6():
    recs = transverse_family(np.random.default_rng(SEED), instances=50, k_max=3)
    inv = max(abs(a - b) for a, b in (r["invariance"] for r in recs))
    con = max(abs(a - b) for a, b in (r["companion"] for r in recs))
    ok = inv < 1e-10 and con < 1e-10
    return ok, f"transverse measure, 50 kernels on KTail(k<=3): invariance {inv:.1e}, companion identity " \
               f"{con:.1e} (tol 1e-10)"


def criterion_7():
    reps = twosided_family(np.random.default_rng(SEED), instances=50, depth=3)
    worst = max_residual(reps)
    return worst < 1e-12, f"two-sided product, 50 random (m, nu, V) at depth 3: max residual {worst:.1e} (tol 1e-12)"


def criterion_8():
    rng = np.random.default_rng(SEED)
    ok, worst_closed = True, 0.0
    for _ in range(10):
        d = int(rng.integers(2, 5))
        p = rng.uniform(0.05, 1.0, d)
        p /= p.sum()
        phi = LocalFunction(d, -np.log(p))
        pts = [random_point(rng, d, 10) for _ in range(100)]
        c1, c2 = bowen_ratio(bernoulli(p), phi, pts, 8)
        ratios = [p[x[0] - 1] / p[x[m] - 1] for x in pts for m in range(1, 9)] + [1.0]
        worst_closed = max(worst_closed, abs(c1 - min(ratios)), abs(c2 - max(ratios)))
        ok &= p.min() / p.max() - 1e-12 <= c1 <= c2 <= p.max() / p.min() + 1e-12
    ok &= worst_closed < 1e-12
    return ok, f"Bowen bounds, 10 normalized memory-1 potentials: inside [min p/max p, max p/min p], " \
               f"closed-form gap {worst_closed:.1e}"


def criterion_9():
    f_kms = lambda a, b, s: np.cos(2 * np.pi * b) * np.sin(2 * np.pi * s)  # noqa: E731
    dbl = bk.doubling()
    v_one = all(bk.v_product(dbl, a, b, 0.3, 40)[0] == 1.0 for a, b in np.random.default_rng(SEED).uniform(size=(20, 2)))
    d_res = max(bk.density_residual(dbl, 128).max, bk.sbr_discrepancy(dbl, 128).max,
                bk.baker_kms_residual(dbl, f_kms).abs_residual)
    pert = bk.perturbed(0.2)
    dens = bk.density_residual(pert, grid=512, N=40, order=128)
    sbr = bk.sbr_discrepancy(pert, grid=512, N=40, order=128)
    kms = bk.baker_kms_residual(pert, f_kms, order=128, N=40)
    parts = {
        "doubling": v_one and d_res < 1e-12,
        "density<=budget": dens.max <= dens.budget,
        "sbr>1e-3": sbr.max > 1e-3,
        "kms<1e-6": kms.abs_residual < 1e-6,
    }
    ok = all(parts.values())
    flags = ", ".join(f"{k} {'ok' if v else 'NO'}" for k, v in parts.items())
    return ok, f"baker: doubling max {d_res:.1e}; eps=0.2 density residual {dens.max:.3g} vs budget {dens.budget:.2e}, " \
               f"sbr {sbr.max:.3g}, kms {kms.abs_residual:.1e} [{flags}]"


def criterion_10():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for i in range(200):
        d = 2 + i % 3
        rep = matrix_kms_residual(rng.normal(size=d), float(rng.uniform(0.0, 3.0)),
                                  rng.normal(size=(d, d)), rng.normal(size=(d, d)))
        worst = max(worst, rep.abs_residual)
    return worst < 1e-12, f"matrix KMS, 200 instances d<=4: max residual {worst:.1e} (tol 1e-12)"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("num", range(1, 11))
def test_criterion(num, capsys):
    t0 = time.perf_counter()
    ok, detail = CRITERIA[num - 1]()
    with capsys.disabled():
        print(f"\n{_line(num, ok, detail)} [{time.perf_counter() - t0:.1f} s]")
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for i, fn in enumerate(CRITERIA, 1):
        ok, detail = fn()
        failed += not ok
        print(_line(i, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
