"""Command line interface: ``quadcusp <verb> ...``.

Tabular output goes to stdout as CSV; progress and timings go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .io import dumps, fmt


def _csv_out(header, rows) -> None:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])


def _floats(text: str) -> list[float]:
    return [float(Fraction(x)) for x in text.replace(",", " ").split()]


def _config(args) -> ExperimentConfig:
    over = {}
    if args.seed is not None:
        over[("run", "seed")] = args.seed
    if args.threads is not None:
        over[("run", "threads")] = args.threads
    if args.out is not None:
        over[("run", "out")] = args.out
    return ExperimentConfig.load(args.config, over)


def _setup(form: str, qmax: int, region: str, threads: int = 1):
    from .conepoints import enumerate_isotropic, parse_region
    from .experiments import frame_for, suspended
    L = suspended(form)
    fr = frame_for(form)
    reg = parse_region(fr, region)
    pts = enumerate_isotropic(L, qmax, threads=threads)
    return L, fr, reg, pts


# ---------------------------------------------------------------- verbs

def cmd_enumerate(args) -> int:
    from .conepoints import enumerate_isotropic, parse_region
    from .experiments import frame_for, suspended
    L = suspended(args.form)
    region = parse_region(frame_for(args.form), args.region) if args.region != "all" else None
    pts = enumerate_isotropic(L, args.qmax, region=region, threads=args.threads or 1)
    n = L.dim
    _csv_out([f"x{i + 1}" for i in range(n - 1)] + ["q"], (list(map(int, r)) for r in pts.coords))
    return 0


def cmd_count(args) -> int:
    from .conepoints import counting_histogram, fit_exponent
    _, _, reg, pts = _setup(args.form, args.qmax, args.region, args.threads or 1)
    hist = counting_histogram(pts, Fraction(args.base), reg)
    complete = set(hist.complete_bins)
    _csv_out(["k", "count", "complete"], ([k, hist.bins[k], k in complete] for k in sorted(hist.bins)))
    if args.verb == "fit":
        slope, r2 = fit_exponent(hist)
        print(f"# slope={fmt(slope)} r2={fmt(r2)} k_min={hist.k_min}", file=sys.stderr)
        _csv_out(["slope", "r2", "k_min"], [[slope, r2, hist.k_min]])
    return 0


def cmd_experiment(name):
    def run(args) -> int:
        from .harness import criterion_lines, format_lines
        from .experiments import run_experiment
        cfg = _config(args)
        res = run_experiment(cfg, name, Path(cfg.get("run", "out")))
        _csv_out(["check", "criterion", "passed", "value", "target"],
                 ([c.name, c.criterion if c.criterion is not None else "", c.passed,
                   c.value if not isinstance(c.value, (dict, list)) else dumps(c.value).replace("\n", " "),
                   c.target] for c in res.checks))
        sys.stderr.write(format_lines(criterion_lines([res])))
        return 0 if res.passed else 1
    return run


def cmd_approximants(args) -> int:
    from .conepoints import enumerate_isotropic
    from .dioph import ApproxFunction, approximants
    from .experiments import suspended
    L = suspended(args.form)
    pool = enumerate_isotropic(L, args.qmax)
    psi = ApproxFunction.power(args.alpha)
    x = np.array(_floats(args.x))
    if len(x) != L.dim - 1:
        raise ValueError(f"--x needs {L.dim - 1} coordinates for this form")
    hits = approximants(x, psi, args.qmax, pool)
    _csv_out([f"p{i + 1}" for i in range(len(x))] + ["q", "error"], ([*p, q, e] for p, q, e in hits))
    return 0


def cmd_aprox_check(args) -> int:
    from .dioph import ApproxFunction, HypothesisError, check_rigidity
    from .forms import resolve_form
    psi = ApproxFunction.power(args.alpha)
    try:
        rep = check_rigidity(resolve_form(args.form), psi, args.qmax, args.trials, args.seed or 0,
                                enforce_hypothesis=not args.force)
    except HypothesisError as exc:
        print(f"error: {exc} (use --force for a diagnostic scan)", file=sys.stderr)
        return 2
    d = rep.to_dict()
    _csv_out(list(d), [list(d.values())])
    return 0 if rep.passed else 1


def cmd_crossover(args) -> int:
    from .dioph import DYADIC_T, ApproxFunction, critical_exponent_upper, predicted_dimension
    L, fr, reg, pts = _setup(args.form, args.qmax, args.region, args.threads or 1)
    psi = ApproxFunction.power(args.alpha)
    step = Fraction(args.s_step)
    grid = [float(step * k) for k in range(1, int(1 / step) + 1)]
    rep = critical_exponent_upper(pts, psi.to_depth(), fr, DYADIC_T, grid, reg)
    _csv_out(["s", "verdict"], ([s, rep.verdicts[s]] for s in grid))
    pred = predicted_dimension(psi, L.dim - 1)
    print(f"# crossover={rep.crossover} predicted={pred}", file=sys.stderr)
    return 0


def cmd_ubiquity(args) -> int:
    from .dioph import DYADIC_T, ApproxFunction
    from .ubiquity import (cusp_system, divergence_classifier, fit_kappa, local_ubiquity_estimate,
                           u_regular_check)
    if args.action == "classify":
        rho = ApproxFunction.depth_exp(1)
        psi = ApproxFunction.power(args.alpha).to_depth()
        v = divergence_classifier(Fraction(args.s), psi, rho, Fraction(args.delta))
        _csv_out(["s", "alpha", "delta", "verdict", "exponent", "power"],
                 [[args.s, args.alpha, args.delta, v.verdict, str(v.exponent), str(v.power)]])
        return 0
    _, fr, reg, pts = _setup(args.form, args.qmax, args.region, args.threads or 1)
    kappa = fit_kappa(pts, fr, reg, DYADIC_T, seed=args.seed or 0)
    if args.action == "kappa":
        _csv_out(["kappa"], [[kappa]])
        return 0
    spec = cusp_system(pts, fr, reg, DYADIC_T, kappa=kappa)
    n_range = range(max(1, spec.n_max - args.levels + 1), spec.n_max + 1)
    rep = local_ubiquity_estimate(spec, args.balls, n_range, args.seed or 0)
    reg_ok = u_regular_check(spec, 1)
    _csv_out(["kappa", "kappa_hat", "unstable_balls", "u_regular"],
             [[kappa, rep.kappa_hat, rep.unstable_balls, reg_ok]])
    return 0 if rep.kappa_hat > 0 and rep.unstable_balls == 0 and reg_ok else 1


def cmd_excursion(args) -> int:
    if args.action == "sl-identity":
        from .excursion import sl_depth_identity
        x = np.array(_floats(args.x))
        p = [int(v) for v in args.p.replace(",", " ").split()]
        r = sl_depth_identity(x, p, args.q, args.t, args.slope)
        _csv_out(["closed_form", "matrix_form", "discrepancy"], [[r.closed_form, r.matrix_form, r.discrepancy]])
        return 0
    from .excursion import flow_and_record, rbeta_event_summary
    L, fr, reg, pool = _setup(args.form, args.qmax, "all", args.threads or 1)
    beta = float(Fraction(args.beta))
    if args.action == "trace":
        tr = flow_and_record(fr, _floats(args.b), args.tmax, args.dt, pool, beta)
        _csv_out(["t", "depth", "witness"], tr.rows())
        return 0
    # grid: evenly spaced start points in [-h, h]^delta
    h = args.half_width
    axes = [np.linspace(-h, h, args.grid)] * fr.delta
    starts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(fr.delta, -1).T
    traces = [flow_and_record(fr, b, args.tmax, args.dt, pool, beta) for b in starts]
    summ = rbeta_event_summary(traces, beta)
    _csv_out(["trace", "b", "events", "last_event", "persistent"],
             ([r["trace"], " ".join(r["b"]), r["events"], r["last_event"] or "", r["persistent"]]
              for r in summ.rows))
    return 0


def cmd_run(args) -> int:
    from .harness import criterion_lines, format_lines, run
    cfg = _config(args)
    names = args.experiments or None
    results = run(cfg, names)
    lines = criterion_lines(results)
    sys.stdout.write(format_lines(lines))
    print(f"# results in {cfg.get('run', 'out')}", file=sys.stderr)
    return 0 if all(ok for _, ok, _ in lines) else 1


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker processes for enumeration")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output directory for experiment reports")
    common.add_argument("--config", default=None, help="INI file overriding the experiment defaults")

    p = argparse.ArgumentParser(prog="quadcusp",
                                description="Rational points on quadrics, cusps of orthogonal groups and "
                                            "Diophantine approximation experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    def form_args(sp, qmax=512, region="cube:1"):
        sp.add_argument("form", help="circle, sphere, hyperboloid, nopoints or a form file")
        sp.add_argument("--qmax", type=int, default=qmax)
        sp.add_argument("--region", default=region, help="box:lo;hi | cube:h | cap:x;angle | all")

    sp = sub.add_parser("enumerate", parents=[common], help="primitive points (x, q) on the cone, q <= qmax")
    form_args(sp, region="all")
    sp.set_defaults(func=cmd_enumerate)
    for verb in ("count", "fit"):
        sp = sub.add_parser(verb, parents=[common], help=f"{verb} dyadic height bins on a patch")
        form_args(sp)
        sp.add_argument("--base", default="2")
        sp.set_defaults(func=cmd_count)
    sp = sub.add_parser("verify-geometry", parents=[common], help="closed-form geometry checks")
    sp.set_defaults(func=cmd_experiment("geometry"))

    dio = sub.add_parser("dioph", help="Diophantine approximation on the quadric")
    dsub = dio.add_subparsers(dest="action", required=True)
    sp = dsub.add_parser("approximants", parents=[common])
    form_args(sp)
    sp.add_argument("--x", required=True, help="point, comma separated")
    sp.add_argument("--alpha", default="1")
    sp.set_defaults(func=cmd_approximants)
    sp = dsub.add_parser("aprox-check", parents=[common])
    sp.add_argument("form")
    sp.add_argument("--alpha", default="3/2")
    sp.add_argument("--qmax", type=int, default=500)
    sp.add_argument("--trials", type=int, default=5)
    sp.add_argument("--force", action="store_true", help="scan even if the decay hypothesis fails")
    sp.set_defaults(func=cmd_aprox_check)
    sp = dsub.add_parser("crossover", parents=[common])
    form_args(sp)
    sp.add_argument("--alpha", default="2")
    sp.add_argument("--s-step", default="1/100")
    sp.set_defaults(func=cmd_crossover)

    ub = sub.add_parser("ubiquity", help="local ubiquity of the cusp system")
    usub = ub.add_subparsers(dest="action", required=True)
    for action in ("check", "kappa"):
        sp = usub.add_parser(action, parents=[common])
        form_args(sp, qmax=4096)
        sp.add_argument("--balls", type=int, default=50)
        sp.add_argument("--levels", type=int, default=6)
        sp.set_defaults(func=cmd_ubiquity)
    sp = usub.add_parser("classify", parents=[common])
    sp.add_argument("--s", required=True)
    sp.add_argument("--alpha", required=True)
    sp.add_argument("--delta", default="1")
    sp.set_defaults(func=cmd_ubiquity)

    ex = sub.add_parser("excursion", help="cusp excursions of chart geodesics")
    esub = ex.add_subparsers(dest="action", required=True)
    for action in ("trace", "grid"):
        sp = esub.add_parser(action, parents=[common])
        sp.add_argument("form")
        sp.add_argument("--qmax", type=int, default=1024)
        sp.add_argument("--beta", default="1/2")
        sp.add_argument("--tmax", type=float, default=40.0)
        sp.add_argument("--dt", type=float, default=0.05)
        if action == "trace":
            sp.add_argument("--b", required=True, help="chart point, comma separated")
        else:
            sp.add_argument("--grid", type=int, default=5)
            sp.add_argument("--half-width", type=float, default=1.0)
        sp.set_defaults(func=cmd_excursion)
    sp = esub.add_parser("sl-identity", parents=[common])
    sp.add_argument("--x", required=True)
    sp.add_argument("--p", required=True)
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--t", type=float, default=0.0)
    sp.add_argument("--slope", type=int, default=1)
    sp.set_defaults(func=cmd_excursion)

    sp = sub.add_parser("run", parents=[common], help="run experiments and write the report directory")
    sp.add_argument("experiments", nargs="*", help="subset of experiments (default: all)")
    sp.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
