"""Command-line harness: ``dirgrad run | plan | verify | sweep``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import planner, verification
from .algorithms import run_ardd, run_arddsc, run_rdd, run_rddsc
from .config import RESTART, ConfigError, ExperimentConfig, from_dict, ground_truth_constants, loads, parse_seed_list
from .oracle import make_quadratic, noise_levels
from .prox_geometry import ProxSetup, ShiftedProx, rho_constant

log = logging.getLogger("dirgrad")

TRACE_HEADER = "# dirgrad-trace v1"
SWEEP_HEADER = "# dirgrad-sweep v1"
BOUND_ID = {"ardd": 1, "rdd": 2, "arddsc": 3, "rddsc": 4}
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


# ---------------------------------------------------------------------------
# running one (config, seed)


class _NoTruth:
    """Objective wrapper that hides the optimal value."""

    f_star = None

    def __init__(self, obj):
        self._obj = obj

    def __getattr__(self, name):
        return getattr(self._obj, name)


def resolve(cfg: ExperimentConfig, n=None, p=None, algorithm=None):
    """Build the problem and fix every run parameter (planning if asked)."""
    n = cfg.problem.n if n is None else n
    p = cfg.p if p is None else p
    algorithm = cfg.algorithm if algorithm is None else algorithm
    obj = cfg.objective(n)
    setup = ProxSetup(p, n)
    x0 = cfg.start(n)
    oracle = cfg.oracle.build()
    truth = ground_truth_constants(obj, setup, x0)
    prm = dict(cfg.parameters)
    info = dict(algorithm=algorithm, n=n, p=p, L2=obj.L2, sigma_sq=obj.sigma_sq)
    theta = prm.get("Theta_p", truth["Theta_p"])
    R_p = prm.get("R_p", truth["R_p"])
    mu_p = truth["mu_p"]
    if "epsilon" in prm:
        eps = prm["epsilon"]
        if algorithm in RESTART:
            fn = planner.plan_arddsc if algorithm == "arddsc" else planner.plan_rddsc
            plan = fn(eps, n, setup, obj.L2, obj.sigma_sq, mu_p, R_p, a=prm.get("a"))
            prm["K"] = plan.K
        else:
            fn = planner.plan_ardd if algorithm == "ardd" else planner.plan_rdd
            plan = fn(eps, n, setup, obj.L2, obj.sigma_sq, theta)
            prm.update(N=plan.N, m=plan.m)
        info["plan"] = plan.to_dict()
    info.update(Theta_p=theta, R_p=R_p, mu_p=mu_p)
    info.update({k: prm[k] for k in ("N", "m", "K", "a", "Delta") if k in prm})
    if not cfg.problem.ground_truth:
        obj = _NoTruth(obj)
    return obj, oracle, setup, x0, info


def execute(cfg: ExperimentConfig, seed: int, *, n=None, p=None, algorithm=None, checkpoints=()):
    obj, oracle, setup, x0, info = resolve(cfg, n, p, algorithm)
    rng = np.random.default_rng(seed)
    alg = info["algorithm"]
    if alg in RESTART:
        fn = run_arddsc if alg == "arddsc" else run_rddsc
        _, rec = fn(
            obj, oracle, setup, x0, info["R_p"], info["K"], rng,
            mu=info["mu_p"], a=info.get("a"), delta=info.get("Delta"), seed=seed,
        )
        info.update(N0=rec.params.get("N0"), Delta=rec.params.get("Delta"), m_schedule=rec.params.get("m_schedule"))
    else:
        fn = run_ardd if alg == "ardd" else run_rdd
        _, rec = fn(obj, oracle, setup, x0, info["N"], info["m"], rng, seed=seed, checkpoints=checkpoints)
    return rec, info


def _task(raw: dict, seed: int, overrides: dict):
    """Process-pool entry point; returns plain data only."""
    cfg = from_dict(raw)
    t0 = time.time()
    rec, info = execute(cfg, seed, **overrides)
    rows = [(r.k, r.oracle_calls, r.f_gap, r.elapsed_ns) for r in rec.rows]
    return seed, rows, info, time.time() - t0


def _map(raw, seeds, overrides_list, jobs):
    tasks = [(raw, s, o) for o in overrides_list for s in seeds]
    if jobs <= 1 or len(tasks) == 1:
        return [_task(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_task, *t) for t in tasks]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# output


def _fmt_gap(g):
    return "" if g is None else repr(float(g))


def trace_csv(rows, timing=False) -> str:
    buf = io.StringIO()
    buf.write(TRACE_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "oracle_calls", "f_gap", "elapsed_ns"])
    for k, calls, gap, ns in rows:
        w.writerow([k, calls, _fmt_gap(gap), ns if timing else ""])
    return buf.getvalue()


def trace_json(rows, timing=False) -> str:
    data = {
        "schema": "dirgrad-trace v1",
        "rows": [
            {"k": k, "oracle_calls": c, "f_gap": g, "elapsed_ns": ns if timing else None}
            for k, c, g, ns in rows
        ],
    }
    return json.dumps(data, indent=1) + "\n"


def _bound_at(info, k, obj_noise):
    theorem = BOUND_ID[info["algorithm"]]
    dz, de = obj_noise
    if theorem in (1, 2):
        return planner.bound_rhs(
            theorem, N=k, m=info["m"], n=info["n"], rho_n=rho_constant(info["n"], ProxSetup(info["p"], info["n"]).q),
            L2=info["L2"], sigma_sq=info["sigma_sq"], Theta_p=info["Theta_p"], delta_zeta=dz, delta_eta=de,
        )
    return planner.bound_rhs(theorem, K=k, mu_p=info["mu_p"], R_p=info["R_p"], Delta=info["Delta"])


def summarize(cfg: ExperimentConfig, results) -> dict:
    """Aggregate per-seed traces; seeds share checkpoints by construction."""
    info = results[0][2]
    ks = [r[0] for r in results[0][1]]
    calls = [r[1] for r in results[0][1]]
    gaps = [[row[2] for row in rows] for _, rows, _, _ in results]
    have_truth = all(g is not None for seed_gaps in gaps for g in seed_gaps)
    checkpoints = []
    verdict_ok = True
    noise = noise_levels(cfg.objective(info["n"]), cfg.oracle.build())
    for i, k in enumerate(ks):
        entry = {"k": k, "oracle_calls": calls[i]}
        if have_truth:
            col = [g[i] for g in gaps]
            entry.update(mean_gap=float(np.mean(col)), max_gap=float(np.max(col)))
            if k >= 1:
                b = _bound_at(info, k, noise)
                entry["bound"] = b
                verdict_ok &= entry["mean_gap"] <= b
        checkpoints.append(entry)
    out = {
        "algorithm": info["algorithm"],
        "parameters": {k: v for k, v in info.items() if k != "algorithm"},
        "seeds": [r[0] for r in results],
        "total_oracle_calls": int(sum(rows[-1][1] for _, rows, _, _ in results)),
        "checkpoints": checkpoints,
        "bound_id": BOUND_ID[info["algorithm"]],
    }
    if have_truth:
        out["bound_satisfied"] = "yes" if verdict_ok else "no"
    else:
        log.warning("no ground truth available: bound verdict omitted")
    return out


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _sidecar(out: Path, lines):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "timing.log", "a", encoding="utf-8") as fh:
        stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
        for line in lines:
            fh.write(f"{stamp} {line}\n")


# ---------------------------------------------------------------------------
# commands


def _config(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("--config", "a config file is required")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    data = loads(text)
    if args.seed:
        data["seeds"] = parse_seed_list(args.seed)
    cfg = from_dict(data)
    if args.out:
        cfg.output = args.out
    return cfg


def cmd_run(args) -> int:
    cfg = _config(args)
    if cfg.sweep is not None:
        log.info("config has a sweep section; 'run' ignores it")
    results = _map(cfg.raw, cfg.seeds, [{}], args.jobs)
    out = Path(cfg.output)
    writer, ext = (trace_json, "json") if args.format == "json" else (trace_csv, "csv")
    for seed, rows, _, _ in results:
        _write(out / f"trace-seed{seed}.{ext}", writer(rows, args.timing))
    summary = summarize(cfg, results)
    _write(out / "summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    _sidecar(out, [f"seed={s} wall_s={w:.3f}" for s, _, _, w in results])
    last = summary["checkpoints"][-1]
    print(f"algorithm: {summary['algorithm']}  seeds: {len(results)}  oracle calls: {summary['total_oracle_calls']}")
    if "mean_gap" in last:
        print(f"final k={last['k']}: mean gap {last['mean_gap']:.6g}  max gap {last['max_gap']:.6g}")
    if "bound_satisfied" in summary:
        print(f"bound satisfied: {summary['bound_satisfied']}")
    print(f"wrote {out}")
    return EXIT_OK


def _plan_inputs(args):
    """Problem constants for ``plan`` from a config, explicit flags, or both."""
    vals = {}
    if args.config:
        cfg = _config(args)
        obj = cfg.objective()
        setup = cfg.setup()
        vals.update(ground_truth_constants(obj, setup, cfg.start()))
        vals.update(n=cfg.problem.n, p=cfg.p, L2=obj.L2, sigma_sq=obj.sigma_sq, algorithm=cfg.algorithm)
        vals.update({k: cfg.parameters[k] for k in ("Theta_p", "R_p", "a") if k in cfg.parameters})
    for key in ("algorithm", "n", "p", "L2", "sigma_sq", "Theta_p", "mu_p", "R_p", "a"):
        v = getattr(args, key, None)
        if v is not None:
            vals[key] = v
    return vals


def cmd_plan(args) -> int:
    if args.eps is None or not args.eps > 0:
        raise ConfigError("--eps", f"target accuracy must be positive, got {args.eps!r}")
    vals = _plan_inputs(args)
    vals.setdefault("algorithm", "ardd")
    vals.setdefault("p", 2)
    vals.setdefault("L2", 1.0)
    vals.setdefault("sigma_sq", 0.0)
    alg = vals["algorithm"]
    if alg not in BOUND_ID:
        raise ConfigError("algorithm", f"unknown algorithm {alg!r}")
    if "n" not in vals:
        raise ConfigError("--n", "dimension is required (flag or config)")
    setup = ProxSetup(vals["p"], vals["n"])
    common = (args.eps, vals["n"], setup, vals["L2"], vals["sigma_sq"])
    if alg in RESTART:
        for key in ("mu_p", "R_p"):
            if key not in vals:
                raise ConfigError(f"--{key.replace('_', '-')}", "required for restart plans")
        fn = planner.plan_arddsc if alg == "arddsc" else planner.plan_rddsc
        plan = fn(*common, vals["mu_p"], vals["R_p"], a=vals.get("a"))
        bound = planner.plan_bound(plan, vals["n"], setup, vals["L2"], vals["sigma_sq"], mu_p=vals["mu_p"], R_p=vals["R_p"])
    else:
        if "Theta_p" not in vals:
            raise ConfigError("--theta", "required for ardd/rdd plans")
        fn = planner.plan_ardd if alg == "ardd" else planner.plan_rdd
        plan = fn(*common, vals["Theta_p"])
        bound = planner.plan_bound(plan, vals["n"], setup, vals["L2"], vals["sigma_sq"], Theta_p=vals["Theta_p"])
    data = plan.to_dict()
    data["bound_at_plan"] = bound
    if args.format == "json":
        print(json.dumps(data, sort_keys=True))
    else:
        width = max(len(k) for k in data)
        for k, v in data.items():
            print(f"{k:<{width}}  {v}")
        print(json.dumps(data, sort_keys=True))
    return EXIT_OK


def _ints(text, default):
    if text is None:
        return default
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("--n", f"cannot parse dimension list {text!r}") from None


def _mirror_reports(ns, instances, rng, tol=1e-6):
    from .prox_geometry import mirror_step

    reports = []
    for n in ns:
        worst = 0.0
        for i in range(instances):
            base = ProxSetup(1, n)
            setup = ShiftedProx(base, rng.standard_normal(n), float(rng.uniform(0.5, 2.0))) if i % 2 else base
            z = rng.standard_normal(n)
            g = rng.standard_normal(n)
            step = float(rng.uniform(0.01, 1.0))
            closed = mirror_step(setup, z, g, step)
            brute = verification.brute_force_mirror_step(setup, z, g, step)
            worst = max(worst, float(np.max(np.abs(closed - brute))))
        reports.append(verification.MonteCarloReport(
            f"mirror step vs brute force (n={n})", instances, worst, 0.0, tol, worst <= tol, "max",
            "max-norm disagreement; odd instances use a shifted prox",
        ))
    return reports


def run_suite(suite, ns=None, samples=100_000, instances=100, seed=0):
    rng = np.random.default_rng(seed)
    reports = []
    if suite in ("lemma1", "all"):
        for n in ns or [8, 100]:
            for q in (2.0, math.inf):
                reports.extend(verification.check_lemma1(n, q, samples, rng))
    if suite in ("mirror", "all"):
        reports.extend(_mirror_reports(ns or [8, 32], instances, rng))
    if suite in ("estimator", "all"):
        for n in ns or [8, 64]:
            obj = make_quadratic(n, spectrum=np.linspace(0.1, 1.0, n), rng=rng)
            x = obj.x_star + rng.standard_normal(n)
            reports.extend(verification.check_estimator_identity(obj, x, samples, rng))
    if suite in ("fd-noise", "all"):
        for n in ns or [8]:
            obj = make_quadratic(n, spectrum=np.linspace(0.1, 1.0, n), rng=rng)
            reports.extend(verification.check_fd_noise_bounds(obj, 0.1, 1e-3, min(samples, 10_000), rng))
    return reports


def cmd_verify(args) -> int:
    seed = parse_seed_list(args.seed)[0] if args.seed else 0
    reports = run_suite(args.suite, _ints(args.n, None), args.samples, args.instances, seed)
    for r in reports:
        print(r.line())
    if args.out:
        _write(Path(args.out) / "verify.jsonl", "".join(r.to_json() + "\n" for r in reports))
    ok = all(r.passed for r in reports)
    print(f"{sum(r.passed for r in reports)}/{len(reports)} reports passed")
    return EXIT_OK if ok else EXIT_FAIL


def loglog_slope(xs, ys) -> float:
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def sweep_table(cfg: ExperimentConfig, jobs=1):
    """Long-format rows ``(value, algorithm, p, mean_gap, oracle_calls)``."""
    sw = cfg.sweep
    rows = []
    combos = [(a, p) for a in sw.algorithms for p in sw.p]
    # workers see a plain run config
    base = {k: v for k, v in cfg.raw.items() if k != "sweep"}
    if sw.axis == "N":
        top = max(sw.values)
        overrides = [
            dict(algorithm=a, p=p, checkpoints=tuple(sw.values)) for a, p in combos
        ]
        raw = dict(base, parameters={"N": top, "m": cfg.parameters.get("m", 1)})
        results = _map(raw, cfg.seeds, overrides, jobs)
        for i, (a, p) in enumerate(combos):
            chunk = results[i * len(cfg.seeds):(i + 1) * len(cfg.seeds)]
            for v in sw.values:
                col, calls = [], None
                for _, trace, _, _ in chunk:
                    hit = next(r for r in trace if r[0] == v)
                    col.append(hit[2])
                    calls = hit[1]
                rows.append((v, a, p, float(np.mean(col)), calls))
        return rows
    raw = dict(base, parameters={"epsilon": sw.epsilon}) if sw.epsilon is not None else base
    overrides = [dict(algorithm=a, p=p, n=v) for a, p in combos for v in sw.values]
    results = _map(raw, cfg.seeds, overrides, jobs)
    S = len(cfg.seeds)
    for j, o in enumerate(overrides):
        chunk = results[j * S:(j + 1) * S]
        gaps = [trace[-1][2] for _, trace, _, _ in chunk]
        rows.append((o["n"], o["algorithm"], o["p"], float(np.mean(gaps)), chunk[0][1][-1][1]))
    return rows


def sweep_report(cfg: ExperimentConfig, rows) -> dict:
    sw = cfg.sweep
    out = {"axis": sw.axis, "values": sw.values, "slopes": {}, "call_slopes": {}}
    for a in sw.algorithms:
        for p in sw.p:
            sel = [r for r in rows if r[1] == a and r[2] == p]
            key = f"{a}/p={p}"
            if all(r[3] > 0 for r in sel):
                out["slopes"][key] = loglog_slope([r[0] for r in sel], [r[3] for r in sel])
            out["call_slopes"][key] = loglog_slope([r[0] for r in sel], [r[4] for r in sel])
    if sw.axis == "n" and set(sw.p) == {1, 2}:
        ratios = {}
        for a in sw.algorithms:
            calls = {(r[0], r[2]): r[4] for r in rows if r[1] == a}
            ratios[a] = [calls[(v, 2)] / calls[(v, 1)] for v in sw.values]
        out["call_ratio_p2_over_p1"] = ratios
    return out


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if cfg.sweep is None:
        raise ConfigError("sweep", "config has no sweep section")
    rows = sweep_table(cfg, args.jobs)
    out = Path(cfg.output)
    buf = io.StringIO()
    buf.write(SWEEP_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["axis_value", "algorithm", "p", "mean_gap", "oracle_calls"])
    for v, a, p, g, c in rows:
        w.writerow([v, a, p, repr(g), c])
    _write(out / "sweep.csv", buf.getvalue())
    report = sweep_report(cfg, rows)
    _write(out / "sweep.json", json.dumps(report, indent=1, sort_keys=True) + "\n")
    if args.format == "json":
        print(json.dumps(report, sort_keys=True))
    else:
        for key, s in report["slopes"].items():
            print(f"slope of mean gap vs {cfg.sweep.axis}, {key}: {s:.4f}")
        for a, r in report.get("call_ratio_p2_over_p1", {}).items():
            print(f"{a} oracle-call ratio p=2 / p=1: " + ", ".join(f"{x:.4g}" for x in r))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dirgrad", description="Directional-derivative optimization experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, formats=("csv", "json"), default="csv"):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", help="seed list, e.g. 1,2,5-8 (overrides the config)")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        p.add_argument("--format", choices=formats, default=default)
        p.add_argument("--out", help="output directory (overrides the config)")

    p = sub.add_parser("run", help="run an algorithm over seeds")
    common(p)
    p.add_argument("--timing", action="store_true", help="fill elapsed_ns (breaks byte reproducibility)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plan", help="print parameters reaching a target accuracy")
    common(p, ("text", "json"), "text")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--algorithm", choices=sorted(BOUND_ID))
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int, choices=(1, 2))
    p.add_argument("--L2", type=float)
    p.add_argument("--sigma-sq", dest="sigma_sq", type=float)
    p.add_argument("--theta", dest="Theta_p", type=float)
    p.add_argument("--mu", dest="mu_p", type=float)
    p.add_argument("--R", dest="R_p", type=float)
    p.add_argument("--a", type=float, help="override the restart inner-length constant")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("verify", help="run a Monte-Carlo / oracle suite")
    common(p)
    p.add_argument("suite", choices=("lemma1", "mirror", "estimator", "fd-noise", "all"))
    p.add_argument("--n", help="comma-separated dimensions")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--instances", type=int, default=100)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="sweep N or n and fit log-log slopes")
    common(p)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    level = os.environ.get("DIRGRAD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs: must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
