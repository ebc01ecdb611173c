"""``haarkit`` command line.

Each subcommand writes JSON-lines reports and exits 0 when every check
passes, 1 when some check fails and 2 on an invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import sys
from typing import Sequence

import numpy as np

from . import baker as bk
from .checks import algebra_identities, transverse_family, twosided_family
from .cocycles import birkhoff_sum, potential_diff
from .groupoid import (bigger_than_two, counting, eventually_equal, indicator_pair, jacobian, k_tail,
                       normalized)
from .kms import (KmsReport, bowen_ratio, kms_indicator_suite, kms_residual, markov_cocycle,
                  markov_counterexample, nonuniqueness_witness, stationary_markov,
                  uniform_initial_markov)
from .local import LocalFunction, parse_table
from .measures import bernoulli, thermo_measure
from .ruelle import apply_transfer, eigendata, transfer_matrix
from .symbolic import random_point

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


def parse_floats(text: str) -> np.ndarray:
    try:
        return np.array([float(s) for s in text.split(",") if s.strip()])
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}") from None


def parse_potential(text: str, d: int) -> LocalFunction:
    """``memK:v1,...``, ``prob:p1,...`` or ``file:<path>`` with ``"word value"`` lines."""
    kind, _, body = text.partition(":")
    try:
        if kind.startswith("mem"):
            k = int(kind[3:])
            vals = parse_floats(body)
            if vals.size != d**k:
                raise ConfigError(f"memory-{k} potential needs {d**k} values, got {vals.size}")
            return LocalFunction(d, vals)
        if kind == "prob":
            p = parse_floats(body)
            if p.size != d or np.any(p <= 0) or abs(p.sum() - 1) > 1e-12:
                raise ConfigError("prob: needs a positive probability vector of length d")
            return LocalFunction(d, -np.log(p))
        if kind == "file":
            with open(body) as fh:
                return parse_table(fh.readlines(), d)
    except (ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown potential {text!r}")


def parse_relation(text: str):
    name, _, arg = text.partition(":")
    try:
        if name == "bigger-than-two":
            return bigger_than_two()
        if name == "k-tail":
            return k_tail(int(arg))
        if name == "eventually-equal":
            return eventually_equal(int(arg))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown relation {text!r}")


def read_config(path: str) -> dict[str, str]:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


class Emitter:
    """Collects reports, writes them sorted by test name."""

    def __init__(self):
        self.reports: list[KmsReport] = []

    def add(self, rep: KmsReport):
        self.reports.append(rep)

    def extend(self, reps):
        self.reports.extend(reps)

    def check(self, name: str, lhs: float, rhs: float, ok: bool, depth: int = 0):
        """Report for an inequality-style check whose verdict is decided by the caller."""
        rep = KmsReport.make(name, lhs, rhs, depth)
        rep.passed = bool(ok)
        self.add(rep)

    def write(self, out):
        for rep in sorted(self.reports, key=lambda r: r.test):
            out.write(rep.to_json() + "\n")

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


def _cocycle_for(phi, beta, rel, kernel):
    """Cocycle matching the Gibbs probability of ``-beta phi`` on a first-``r``-free relation."""
    coc = birkhoff_sum(phi, rel.r, beta)
    if kernel.kind != "jacobian":
        return coc
    # weights J_r(s) move into the cocycle: delta_J(x, y) = delta(x, y) J_r(y) / J_r(x)
    L = max(coc.level, rel.r - 1 + kernel.J.level)
    e = beta * coc.energy().at_depth(L)
    logJ = np.log(kernel.J.table)
    e = e + sum(LocalFunction(phi.d, logJ).at_depth(L, i) for i in range(rel.r))
    return potential_diff(LocalFunction(phi.d, e), 1.0)


def _kernel(args, d):
    if args.kernel == "counting":
        return counting()
    if args.kernel == "normalized":
        return normalized()
    if args.kernel == "jacobian":
        if not args.jacobian:
            raise ConfigError("kernel=jacobian needs --jacobian")
        try:
            return jacobian(parse_potential(args.jacobian, d))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown kernel {args.kernel!r}")


def cmd_eigen(args, em: Emitter):
    d = args.d
    A = parse_potential(args.potential, d)
    data = eigendata(A)
    ev = np.linalg.eigvals(transfer_matrix(A))
    em.check("lambda vs dense eigensolve", data.lam, float(np.max(ev.real)),
             abs(data.lam - np.max(ev.real)) <= args.tol * max(1.0, data.lam))
    Lh = apply_transfer(A, data.eigfn)
    h = data.eigfn.at_depth(Lh.level)
    for i, (a, b) in enumerate(zip(Lh.table, data.lam * h)):
        em.add(KmsReport.make(f"L h = lambda h [{i}]", a, b, Lh.level, args.tol * max(1.0, data.lam)))
    m = data.eigmeasure
    lv = max(A.level, 1)
    for j in range(d**lv):
        u = np.zeros(d**lv)
        u[j] = 1.0
        Lu = apply_transfer(A, LocalFunction(d, u))
        lhs = float(np.dot(Lu.table, m.weights(Lu.level)))
        rhs = data.lam * float(np.dot(u, m.weights(lv)))
        em.add(KmsReport.make(f"dual relation [{j}]", lhs, rhs, lv + 1, args.tol * max(1.0, data.lam)))


def cmd_kms_check(args, em: Emitter):
    d = args.d
    phi = parse_potential(args.potential, d)
    rel = parse_relation(args.relation)
    ker = _kernel(args, d)
    coc = _cocycle_for(phi, args.beta, rel, ker)
    depth = args.depth
    if args.measure == "eigen":
        mu = eigendata(-args.beta * phi).eigmeasure
    elif args.measure == "thermo":
        mu = thermo_measure(args.beta * phi, depth)
    else:
        raise ConfigError(f"unknown measure {args.measure!r}")
    level = args.level or min(phi.level + 1, depth)
    if depth < max(level, coc.level, rel.r):
        raise ConfigError(f"depth {depth} too small for level {level} and cocycle level {coc.level}")
    em.extend(kms_indicator_suite(mu, ker, rel, coc, level, depth, args.tol))


def cmd_counterexample(args, em: Emitter):
    vals = parse_floats(args.P)
    d = int(round(np.sqrt(vals.size)))
    if d * d != vals.size or d < 2:
        raise ConfigError("P must list d*d entries row by row")
    P = vals.reshape(d, d)
    try:
        res = markov_counterexample(P, args.i0, args.j0, args.tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rep = KmsReport.make(f"uniform-initial closed form i0={args.i0} j0={args.j0}", res.lhs, res.rhs, 1, args.tol)
    em.add(rep)
    rel = bigger_than_two()
    coc = markov_cocycle(P)
    h = indicator_pair(d, rel, (args.i0,), (args.j0,))
    rep = kms_residual(uniform_initial_markov(P), counting(), rel, coc, h, 2, args.tol,
                       test=f"uniform-initial exact i0={args.i0} j0={args.j0}")
    em.add(rep)
    for r in kms_indicator_suite(stationary_markov(P), counting(), rel, coc, 2, 3, args.tol):
        r.test = "stationary " + r.test
        em.add(r)


def _random_v(rng, d, level):
    """Positive level-``level`` function independent of the first coordinate."""
    t = rng.uniform(0.0, 2.0, d ** (level - 1))
    return LocalFunction(d, np.tile(t, d))


def cmd_nonuniqueness(args, em: Emitter):
    d = args.d
    rng = np.random.default_rng(args.seed)
    phi = parse_potential(args.potential, d) if args.potential else LocalFunction(d, rng.normal(size=d**2))
    mu = eigendata(-args.beta * phi).eigmeasure
    coc = potential_diff(phi, args.beta)
    v = parse_potential(args.v, d) if args.v else _random_v(rng, d, 3)
    if v.depends_on_first():
        raise ConfigError("v must not depend on the first coordinate")
    depth = max(args.depth, v.level, coc.level, args.level or 2)
    try:
        w = nonuniqueness_witness(mu, v, counting(), coc, level=args.level or 2, depth=depth, tol=args.tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for r in w.base:
        r.test = "base " + r.test
    for r in w.reweighted:
        r.test = "reweighted " + r.test
    em.extend(w.base + w.reweighted)
    em.check("measures differ (gap > 1e-6)", w.max_weight_gap, 0.0, w.max_weight_gap > 1e-6, depth)


def cmd_transverse(args, em: Emitter):
    rng = np.random.default_rng(args.seed)
    for i, rec in enumerate(transverse_family(rng, args.instances, args.k_max)):
        em.add(KmsReport.make(f"invariance #{i:03d} k={rec['k']}", *rec["invariance"], rec["k"] + 1, args.tol))
        em.add(KmsReport.make(f"companion #{i:03d} k={rec['k']}", *rec["companion"], rec["k"] + 1, args.tol))


def cmd_bowen(args, em: Emitter):
    d = args.d
    rng = np.random.default_rng(args.seed)
    if args.p:
        p = parse_floats(args.p)
        if p.size != d:
            raise ConfigError("p must have d entries")
        rho = bernoulli(p)
        phi = LocalFunction(d, -np.log(p))
        lo_b, hi_b = p.min() / p.max(), p.max() / p.min()
    elif args.potential:
        phi = parse_potential(args.potential, d)
        rho = eigendata(-phi).eigmeasure
        lo_b, hi_b = 0.0, np.inf
    else:
        raise ConfigError("bowen needs --p or --potential")
    pts = [random_point(rng, d, 10) for _ in range(args.points)]
    c1, c2 = bowen_ratio(rho, phi, pts, args.m_max, args.pressure)
    em.check("bowen c1 >= lower", c1, lo_b, c1 >= lo_b - 1e-12 and c1 > 0)
    em.check("bowen c2 <= upper", c2, hi_b, c2 <= hi_b + 1e-12 and np.isfinite(c2))


def cmd_twosided(args, em: Emitter):
    rng = np.random.default_rng(args.seed)
    for i, rep in enumerate(twosided_family(rng, args.instances, args.depth, args.d)):
        rep.test = f"two-sided #{i:03d}"
        rep.passed = rep.abs_residual <= min(args.tol, 1e-12)
        em.add(rep)


def cmd_baker(args, em: Emitter):
    try:
        cmap = bk.parse_map(args.map)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    N, n, q = args.trunc, args.grid, args.order
    dens = bk.density_residual(cmap, n, N, q, args.b0)
    em.check("ali-residual (deg-corrected density) <= budget", dens.max, dens.budget, dens.max <= dens.budget, N)
    sbr = bk.sbr_discrepancy(cmap, n, N, q, args.b0)
    if cmap.name == "doubling":
        em.check("sbr-discrepancy == 0", sbr.max, 0.0, sbr.max <= 1e-12, N)
    else:
        em.check("sbr-discrepancy > 1e-3", sbr.max, 1e-3, sbr.max > 1e-3, N)
    fm = bk.fiber_mass_residual(cmap, min(n, 128), N, q, args.b0)
    em.check("fiber-mass residual <= budget", fm.max, fm.budget, fm.max <= fm.budget, N)
    em.add(bk.baker_kms_residual(cmap, lambda a, b, s: np.cos(2 * np.pi * b) * np.sin(2 * np.pi * s),
                                 q, N, args.b0))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["a", "b", "value"])
            for row in dens.rows():
                w.writerow([f"{row[0]:.10g}", f"{row[1]:.10g}", f"{row[2]:.17g}"])


def cmd_algebra_props(args, em: Emitter):
    rng = np.random.default_rng(args.seed)
    worst = algebra_identities(rng, args.instances)
    for name in sorted(worst):
        em.check(f"{name} max residual", worst[name], 0.0, worst[name] <= min(args.tol, 1e-12))


COMMANDS = {
    "eigen": cmd_eigen,
    "kms-check": cmd_kms_check,
    "counterexample": cmd_counterexample,
    "nonuniqueness": cmd_nonuniqueness,
    "transverse": cmd_transverse,
    "bowen": cmd_bowen,
    "twosided": cmd_twosided,
    "baker": cmd_baker,
    "algebra-props": cmd_algebra_props,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file; flags override it")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("--out", help="report path (default stdout)")
    common.add_argument("--d", type=int, default=2)

    p = argparse.ArgumentParser(prog="haarkit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("eigen", parents=[common])
    s.add_argument("--potential", required=True)

    s = sub.add_parser("kms-check", parents=[common])
    s.add_argument("--relation", default="bigger-than-two")
    s.add_argument("--kernel", default="counting")
    s.add_argument("--jacobian")
    s.add_argument("--potential", required=True)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--depth", type=int, default=4)
    s.add_argument("--level", type=int)
    s.add_argument("--measure", default="eigen")

    s = sub.add_parser("counterexample", parents=[common])
    s.add_argument("--P", required=True)
    s.add_argument("--i0", type=int, default=2)
    s.add_argument("--j0", type=int, default=1)

    s = sub.add_parser("nonuniqueness", parents=[common])
    s.add_argument("--potential")
    s.add_argument("--v")
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--depth", type=int, default=4)
    s.add_argument("--level", type=int)

    s = sub.add_parser("transverse", parents=[common])
    s.add_argument("--instances", type=int, default=50)
    s.add_argument("--k-max", type=int, default=3)

    s = sub.add_parser("bowen", parents=[common])
    s.add_argument("--p")
    s.add_argument("--potential")
    s.add_argument("--pressure", type=float)
    s.add_argument("--points", type=int, default=100)
    s.add_argument("--m-max", type=int, default=8)

    s = sub.add_parser("twosided", parents=[common])
    s.add_argument("--instances", type=int, default=50)
    s.add_argument("--depth", type=int, default=3)

    s = sub.add_parser("baker", parents=[common])
    s.add_argument("--map", default="perturbed:0.2")
    s.add_argument("--grid", type=int, default=512)
    s.add_argument("--trunc", type=int, default=40)
    s.add_argument("--order", type=int, default=128)
    s.add_argument("--b0", type=float, default=0.3)
    s.add_argument("--csv", help="write the density residual field as a,b,value")

    s = sub.add_parser("algebra-props", parents=[common])
    s.add_argument("--instances", type=int, default=100)
    return p


def _apply_config(parser, argv):
    """Read ``--config`` first so its values become defaults; flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    cmd = next((a for a in argv if a in COMMANDS), None)
    if known.config and cmd:
        cfg = read_config(known.config)
        sub = parser._subparsers._group_actions[0].choices[cmd]
        acts = {a.dest: a for a in sub._actions}
        unknown = set(cfg) - set(acts)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        typed = {}
        for k, v in cfg.items():
            a = acts[k]
            try:
                typed[k] = a.type(v) if a.type else v
            except ValueError:
                raise ConfigError(f"bad value for {k}: {v!r}") from None
            a.required = False
        sub.set_defaults(**typed)
    return parser.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    except (ConfigError, OSError) as exc:
        print(f"haarkit: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.d < 2:
        print("haarkit: invalid config: d must be at least 2", file=sys.stderr)
        return EXIT_CONFIG
    em = Emitter()
    try:
        COMMANDS[args.command](args, em)
    except ConfigError as exc:
        print(f"haarkit: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        with open(args.out, "w") as fh:
            em.write(fh)
    else:
        em.write(sys.stdout)
    return EXIT_OK if em.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
