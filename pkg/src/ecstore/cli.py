"""Command-line front end: ecstore {bound,simulate,compare,optimize,sweep,export}.

Every CSV starts with a provenance comment (tool version, seed, scenario
hash) and a header row; floats are written with 17 significant digits.
Exit codes: 0 success, 2 parse error, 3 infeasible scenario, 4 instability
under --strict.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .core import Exponential, ShiftedExponential
from .errors import (
    BoundInfeasible,
    DomainError,
    InfeasibleProjection,
    InfeasibleTError,
    InstabilityError,
    ValidationError,
)
from .scenario import Scenario, ScenarioError, export_scenario, load_scenario, preset, resolve_pi

EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_UNSTABLE = 4

BOUND_IDS = (
    "fj-upper", "fj-lower", "fj-approx", "ps-mean", "ps-moment", "ps-tail",
    "stall-mean", "stall-tail", "qbd-reservation", "qbd-mkmn", "relaunch",
)


class Instability(Exception):
    """Simulation flagged instability while --strict was set."""


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def write_csv(out, header, rows, seed, digest):
    buf = io.StringIO()
    buf.write(f"# ecstore {__version__} seed={seed} scenario={digest}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    out.write(buf.getvalue())


# ---------------------------------------------------------------- bound


def _homogeneous(wl, cls):
    services = [s.service for s in wl.cluster.servers]
    if not all(isinstance(s, cls) for s in services) or len(set(services)) != 1:
        names = "/".join(c.__name__ for c in (cls if isinstance(cls, tuple) else (cls,)))
        raise BoundInfeasible(f"needs identical {names} servers")
    return services[0]


def _single_file(wl):
    if wl.r != 1:
        raise BoundInfeasible("needs a single-file scenario")
    return wl.files[0]


def _bound_rows(sc: Scenario, which):
    from . import fj_bounds, ps_bounds, qbd, relaunch, video

    wl, run = sc.workload, sc.run
    rows = []
    pi = None
    for pol in sc.policies:
        if pol.pi is not None:
            pi = np.asarray(pol.pi, dtype=float)
    if pi is None:
        pi = resolve_pi("uniform", wl, run)

    def per_file(fn):
        for i, f in enumerate(wl.files):
            try:
                value, params = fn(i)
                rows.append((f.id, bid, value, params))
            except (BoundInfeasible, InfeasibleTError, DomainError) as exc:
                rows.append((f.id, bid, f"INFEASIBLE:{exc}", ""))

    def whole(fn, fid="*"):
        try:
            value, params = fn()
            rows.append((fid, bid, value, params))
        except (BoundInfeasible, InfeasibleTError, DomainError) as exc:
            rows.append((fid, bid, f"INFEASIBLE:{exc}", ""))

    def fj(fn):
        def inner():
            f = _single_file(wl)
            mu = _homogeneous(wl, Exponential).rate
            return fn(f.code.n, f.code.k, f.arrival_rate, mu), f"n={f.code.n};k={f.code.k};lambda={fmt(f.arrival_rate)};mu={fmt(mu)}"
        return inner

    for bid in which:
        if bid == "fj-upper":
            whole(fj(fj_bounds.fj_upper_exp))
        elif bid == "fj-lower":
            whole(fj(fj_bounds.fj_lower_exp))
        elif bid == "fj-approx":
            whole(fj(fj_bounds.fj_approx_exp))
        elif bid in ("ps-mean", "ps-moment", "ps-tail"):
            state = ps_bounds.ServerState.build(wl, pi)
            if bid == "ps-mean":
                def f_mean(i):
                    t, v = ps_bounds.optimize_t(wl, pi, i, state)
                    return v, f"t={fmt(t)}"
                per_file(f_mean)
            elif bid == "ps-moment":
                def f_mom(i):
                    v, z = ps_bounds.mean_latency_bound_moment(wl, pi, i, state=state)
                    return v, f"z={fmt(z)}"
                per_file(f_mom)
            else:
                def f_tail(i):
                    tb = ps_bounds.tail_probability_bound(wl, pi, i, run.sigma, state=state)
                    return tb.value, f"sigma={fmt(run.sigma)};raw={fmt(tb.raw)}"
                per_file(f_tail)
        elif bid in ("stall-mean", "stall-tail"):
            vstate = video.VideoState.build(wl, pi)
            if bid == "stall-mean":
                def f_smean(i):
                    t, v = video.optimize_mean_t(wl, pi, i, run.d_s, vstate)
                    return v, f"t={fmt(t)};d_s={fmt(run.d_s)}"
                per_file(f_smean)
            else:
                def f_stail(i):
                    t, v = video.optimize_tail_t(wl, pi, i, run.x, run.d_s, vstate)
                    return float(v), f"t={fmt(t)};x={fmt(run.x)};raw={fmt(v.raw)}"
                per_file(f_stail)
        elif bid in ("qbd-reservation", "qbd-mkmn"):
            def f_qbd():
                f = _single_file(wl)
                mu = _homogeneous(wl, Exponential).rate
                t = next((p.t for p in sc.policies if p.t is not None), 1)
                policy = qbd.RESERVATION if bid == "qbd-reservation" else qbd.MKMN
                v = qbd.mean_latency(policy, f.code.n, f.code.k, t, f.arrival_rate, mu)
                return v, f"t={t}"
            whole(f_qbd)
        elif bid == "relaunch":
            def f_rel():
                f = _single_file(wl)
                svc = _homogeneous(wl, (ShiftedExponential, Exponential))
                c = getattr(svc, "shift", 0.0)
                mu = svc.rate
                pol = next((p for p in sc.policies if p.n0 is not None), None)
                n0 = pol.n0 if pol else f.code.n
                l0 = pol.l0 if pol else 1
                plan = relaunch.ForkPlan(f.code.n, f.code.k, n0, l0, c, mu)
                es = relaunch.mean_completion_time(plan)
                ew = relaunch.mean_utilization_cost(plan)
                return es, f"n0={n0};l0={l0};E[W]={fmt(ew)}"
            whole(f_rel)
        else:
            raise ScenarioError(f"unknown bound id {bid!r}; expected one of {list(BOUND_IDS)}")
    return rows


def cmd_bound(sc: Scenario, args, out):
    which = args.which or list(sc.run.bounds) or ["ps-mean"]
    rows = _bound_rows(sc, which)
    write_csv(out, ["file", "bound", "value", "parameters"], rows, _seed(sc, args), sc.digest)


# ---------------------------------------------------------------- simulate / compare


def _seed(sc, args):
    return args.seed if getattr(args, "seed", None) is not None else sc.run.seed


def _jobs(sc, args):
    return args.jobs if getattr(args, "jobs", None) is not None else sc.run.jobs


def cmd_simulate(sc: Scenario, args, out):
    from . import sim
    from .relaunch import ForkPlan

    seed = _seed(sc, args)
    pol = sc.policy
    if pol.kind == sim.SINGLE_FORK:
        wl = sc.workload
        f = _single_file(wl)
        svc = _homogeneous(wl, (ShiftedExponential, Exponential))
        plan = ForkPlan(f.code.n, f.code.k, pol.n0, pol.l0, getattr(svc, "shift", 0.0), svc.rate)
        reps = args.samples if args.samples is not None else sc.run.samples
        est = sim.single_fork_monte_carlo(plan, reps, seed)
        rows = [
            ("mean_completion", f.id, est.mean_completion, est.se_completion),
            ("mean_cost", f.id, est.mean_cost, est.se_cost),
        ]
        write_csv(out, ["record", "subject", "value", "standard_error"], rows, seed, sc.digest)
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = sim.run_scenario(sc.workload, pol, _jobs(sc, args), sc.run.warmup, seed, sc.run.thresholds)
    rows = []
    for f, m, c in zip(sc.workload.files, rep.per_file_mean, rep.per_file_ci):
        rows.append(("mean", f.id, "", m, c))
    rows.append(("mean", "*", "", rep.mean, rep.ci))
    for th, p, lo, hi in zip(rep.thresholds, rep.ccdf, rep.ccdf_lo, rep.ccdf_hi):
        rows.append(("ccdf", "*", th, p, f"{fmt(lo)}..{fmt(hi)}"))
    for sid, u in zip(sc.workload.cluster.ids, rep.utilization):
        rows.append(("utilization", sid, "", u, ""))
    rows.append(("jobs", "*", "", rep.jobs_completed, ""))
    for msg in rep.warnings:
        rows.append(("warning", "*", "", msg, ""))
    write_csv(out, ["record", "subject", "threshold", "value", "ci99"], rows, seed, sc.digest)
    if rep.warnings and args.strict:
        raise Instability("; ".join(rep.warnings))


def cmd_compare(sc: Scenario, args, out):
    from . import sim

    seed = _seed(sc, args)
    jobs = _jobs(sc, args)
    scales = list(sc.run.lambda_scale)
    tasks = [(pol, s) for pol in sc.policies for s in scales]

    def one(task):
        pol, s = task
        return sim.compare_policies(sc.workload, [pol], [s], jobs, seed, sc.run.ceiling)[0]

    threads = max(1, args.threads or 1)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, tasks))
    else:
        results = [one(t) for t in tasks]
    rows = [(r.policy, r.scale, r.mean, r.ci, r.diverged) for r in results]
    write_csv(out, ["policy", "lambda_scale", "mean", "ci99", "diverged"], rows, seed, sc.digest)
    if args.strict and any(r.diverged for r in results):
        raise Instability("at least one policy diverged")


# ---------------------------------------------------------------- optimize / sweep


def _problem(sc: Scenario):
    from .optimizer import OptProblem

    run = sc.run
    threshold = run.x if run.mode == "video" else run.sigma
    return OptProblem(sc.workload, theta=run.theta, threshold=threshold, mode=run.mode, d_s=run.d_s, margin=run.margin)


def cmd_optimize(sc: Scenario, args, out):
    from .optimizer import optimize

    trace = optimize(_problem(sc), sc.run.max_outer, _seed(sc, args))
    rows = []
    for it, (obj, viol) in enumerate(zip(trace.objectives, trace.violations)):
        rows.append(("trace", it, "", "", obj, viol))
    wl = sc.workload
    for i, f in enumerate(wl.files):
        for j, sid in enumerate(wl.cluster.ids):
            if wl.support[i, j]:
                rows.append(("pi", "", f.id, sid, trace.pi[i, j], ""))
        rows.append(("t_mean", "", f.id, "", trace.t_mean[i], ""))
    tail_ids = wl.file_ids if sc.run.mode == "video" else wl.cluster.ids
    for sid, t in zip(tail_ids, trace.t_tail):
        rows.append(("t_tail", "", sid, "", t, ""))
    rows.append(("objective", "", "", "", trace.objective, ""))
    rows.append(("mean_metric", "", "", "", trace.mean_metric, ""))
    rows.append(("tail_metric", "", "", "", trace.tail_metric, ""))
    write_csv(out, ["record", "iteration", "file", "server", "value", "violation"], rows, _seed(sc, args), sc.digest)


def cmd_sweep(sc: Scenario, args, out):
    from .optimizer import tradeoff_sweep

    thetas = args.thetas if args.thetas else list(sc.run.theta_grid)
    rows = tradeoff_sweep(_problem(sc), thetas, sc.run.max_outer)
    write_csv(out, ["theta", "mean_metric", "tail_metric", "objective"],
              [(r.theta, r.mean_metric, r.tail_metric, r.objective) for r in rows], _seed(sc, args), sc.digest)


def cmd_export(sc: Scenario, args, out):
    out.write(export_scenario(sc))


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecstore", description="Latency bounds, simulation and optimization for erasure-coded storage.")
    parser.add_argument("--version", action="version", version=f"ecstore {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_required=True):
        if scenario_required:
            p.add_argument("scenario", help="scenario YAML file")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--strict", action="store_true", help="exit 4 when a simulation looks unstable")
        p.add_argument("--jobs", type=int, default=None, help="override run.jobs")
        p.add_argument("--threads", type=int, default=1, help="worker threads for independent grid points")
        return p

    p = common(sub.add_parser("bound", help="analytic bounds"))
    p.add_argument("--which", action="append", choices=BOUND_IDS, help="bound id (repeatable)")
    p = common(sub.add_parser("simulate", help="simulate the first policy"))
    p.add_argument("--samples", type=int, default=None, help="Monte Carlo replications for the single-fork policy")
    common(sub.add_parser("compare", help="mean latency per policy over run.lambda_scale"))
    common(sub.add_parser("optimize", help="optimize access probabilities"))
    p = common(sub.add_parser("sweep", help="mean/tail frontier over theta"))
    p.add_argument("--thetas", type=float, nargs="+", default=None)
    p = common(sub.add_parser("export", help="write the canonical scenario YAML"), scenario_required=False)
    p.add_argument("scenario", nargs="?", default=None, help="scenario YAML file")
    p.add_argument("--preset", choices=("mm1", "fork_join", "twelve_server", "video"), default=None)
    return parser


COMMANDS = {
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "export": cmd_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "export" and args.preset:
            sc = preset(args.preset)
        elif args.scenario is None:
            parser.error("a scenario file or --preset is required")
        else:
            sc = load_scenario(args.scenario)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    buf = io.StringIO()
    try:
        COMMANDS[args.command](sc, args, buf)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InstabilityError, InfeasibleProjection, BoundInfeasible) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Instability as exc:
        _emit(buf.getvalue(), args.out)
        print(f"unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    _emit(buf.getvalue(), args.out)
    return 0


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    sys.exit(main())
