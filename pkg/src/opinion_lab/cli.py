"""Scenario-driven command line front end.

Subcommands::

    opinion-lab simulate <config.yaml>      run a scenario, write artifacts
    opinion-lab counterexample [flags]      cycling-construction report
    opinion-lab picard-check <config.yaml>  windowed fixed-point report
    opinion-lab report <run-dir>            summarize a finished run

Exit codes: 0 all enabled checks pass, 2 at least one check failed,
1 runtime or usage error.  Artifacts land in the config's output_dir (or
--output): trajectory.csv, summary.csv, report.json, run_meta.json.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, backend
from . import counterexample as cx
from . import picard as pc
from .checks import RunContext, run_checks
from .config import ConfigError, load_config
from .ensemble import integrate, uniform_ensemble
from .reports import write_json, write_summary_csv, write_trajectory_csv

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CHECK_FAILED = 2


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("OPINION_LAB_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            pass
    return os.cpu_count() or 1


def _parse_check_overrides(items):
    out = {}
    for item in items or ():
        name, _, tol = item.partition("=")
        if not tol:
            raise ValueError(f"--check expects name=tolerance, got {item!r}")
        out[name] = float(tol)
    return out


def _meta(config_raw, seed, threads, extra=None) -> dict:
    payload = {
        "version": __version__,
        "backend": backend.BACKEND,
        "seed": seed,
        "threads": threads,
        "config": config_raw,
    }
    if extra:
        payload.update(extra)
    return payload


def cmd_simulate(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    out_dir = args.output or config.output_dir or f"runs/{config.name}"
    threads = _threads(args)
    seed = args.seed_override if args.seed_override is not None else config.rng_seed
    overrides = _parse_check_overrides(args.check)

    specs = [dict(s) for s in config.diagnostics]
    known = {s["name"] for s in specs}
    for name, tol in overrides.items():
        if name in known:
            for s in specs:
                if s["name"] == name:
                    s["tolerance"] = tol
        else:
            specs.append({"name": name, "tolerance": tol})

    t0 = time.perf_counter()
    traj = None
    try:
        os.makedirs(out_dir, exist_ok=True)
        ens = uniform_ensemble(config.n, config.initial_profile())
        traj = integrate(ens, config.kernel, config.integrator, n_threads=threads)
        ctx = RunContext(trajectory=traj, kernel=config.kernel,
                         n_threads=threads, rng_seed=seed)
        results = run_checks(ctx, specs)
        wall = time.perf_counter() - t0

        write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"), traj)
        write_summary_csv(os.path.join(out_dir, "summary.csv"), traj,
                          config.kernel, threads)
        overall = all(r.passed for r in results)
        write_json(os.path.join(out_dir, "report.json"), {
            "scenario": config.name,
            "wall_time": wall,
            "overall_pass": overall,
            "checks": [r.to_dict() for r in results],
            "artifacts": ["trajectory.csv", "summary.csv"],
        })
        write_json(os.path.join(out_dir, "run_meta.json"),
                   _meta(config.raw, seed, threads))
    except (OSError, RuntimeError, ValueError, KeyError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        if traj is not None and os.path.isdir(out_dir):
            try:
                with open(os.path.join(out_dir, "trajectory.csv.partial"), "w") as fh:
                    fh.write("t,agent_index,opinion\n")
                    for snap in traj.snapshots:
                        for a, x in zip(snap.alphas, snap.opinions):
                            fh.write(f"{snap.t!r},{a!r},{x!r}\n")
            except OSError:
                pass
        return EXIT_RUNTIME

    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name}: worst={r.worst_violation:.3g} "
              f"tol={r.tolerance:.3g}")
    print(f"scenario {config.name}: {'PASS' if overall else 'FAIL'} "
          f"({wall:.2f}s, outputs in {out_dir})")
    return EXIT_OK if overall else EXIT_CHECK_FAILED


def cmd_counterexample(args) -> int:
    raw = {}
    if args.config:
        try:
            import yaml

            with open(args.config) as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            print(f"runtime error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
    p = args.p if args.p is not None else raw.get("p", 0.75)
    c0 = args.c0 if args.c0 is not None else raw.get("c0", 8.05)
    n = args.n_interval if args.n_interval is not None else raw.get("n_interval", 2000)
    n_cluster = args.n_cluster if args.n_cluster is not None else raw.get("n_cluster", 1)
    t_end = args.t_end if args.t_end is not None else raw.get("t_end", 80.0)
    delta = args.delta if args.delta is not None else raw.get("delta", 0.01)
    verify_times = args.verify_time or raw.get("verify_times", [0.5, 5.0, 50.0])
    out_dir = args.output or raw.get("output_dir", "runs/counterexample")

    t0 = time.perf_counter()
    try:
        params = cx.CounterexampleParams(p=p, c0=c0, n_interval=n,
                                         n_cluster=n_cluster)
        report = cx.run_counterexample_report(params, t_end)
        verify = {str(t): cx.verify_rhs(params, float(t), exclusion_radius=delta)
                  for t in verify_times if float(t) <= t_end}
        os.makedirs(out_dir, exist_ok=True)
        traj = cx.analytic_trajectory(params, report.sampled_times,
                                      min(n, args.csv_nodes))
        write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"), traj)
        payload = report.to_dict()
        payload["verify_max_abs_error"] = verify
        payload["exclusion_radius"] = delta
        payload["wall_time"] = time.perf_counter() - t0
        write_json(os.path.join(out_dir, "counterexample_report.json"), payload)
        write_json(os.path.join(out_dir, "run_meta.json"),
                   _meta({"p": p, "c0": c0, "n_interval": n, "t_end": t_end,
                          "delta": delta}, 0, 1))
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    ok = report.uniformity_ok and report.cluster_gap_ok
    print(f"band W1 to uniform: max={report.w1_uniform_max:.2e} "
          f"(bound {report.w1_uniform_bound:.2e})")
    print(f"fold crossings: {report.fold_crossings}")
    print(f"cluster gap: min={report.cluster_gap_min:.4f} "
          f"(floor {report.cluster_gap_floor:.4f})")
    for t, err in verify.items():
        print(f"velocity check at t={t}: max error {err:.2e}")
    print(f"outputs in {out_dir}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_picard_check(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    out_dir = args.output or config.output_dir or f"runs/{config.name}"
    threads = _threads(args)
    pico = config.picard
    t_end = float(pico.get("t_end", config.integrator.t_end))
    tol = float(pico.get("tol", 1e-9))
    grid_points = int(pico.get("grid_points", pc.DEFAULT_GRID_POINTS))
    b = pico.get("b")
    rk4_dt = float(pico.get("rk4_dt", 1e-3))

    t0 = time.perf_counter()
    try:
        os.makedirs(out_dir, exist_ok=True)
        ens = uniform_ensemble(config.n, config.initial_profile())
        result = pc.cross_validate(config.kernel, ens, t_end, tol=tol,
                                   grid_points=grid_points, rk4_dt=rk4_dt,
                                   n_threads=threads,
                                   b=float(b) if b is not None else None)
        windows = result["windows"]
        payload = {
            "scenario": config.name,
            "t_end": t_end,
            "tol": tol,
            "grid_points": grid_points,
            "sup_distance_to_rk4": result["sup_distance"],
            "contraction_bound": result["contraction_bound"],
            "max_observed_ratio": result["max_ratio"],
            "windows": [
                {
                    "t_start": w.t_start,
                    "b": w.b,
                    "iterations": w.iterations,
                    "residuals": w.residuals,
                    "ratios": w.contraction_ratios(),
                    "fixed_point_residual": w.residuals[-1] if w.residuals else 0.0,
                    "converged": w.converged,
                }
                for w in windows
            ],
            "wall_time": time.perf_counter() - t0,
        }
        write_json(os.path.join(out_dir, "picard_report.json"), payload)
        write_json(os.path.join(out_dir, "run_meta.json"),
                   _meta(config.raw, config.rng_seed, threads))
    except (OSError, RuntimeError, ValueError, pc.LipschitzRequiredError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    ok = (all(w.converged for w in windows)
          and result["max_ratio"] <= result["contraction_bound"] + 0.05)
    print(f"{len(windows)} windows, max ratio {result['max_ratio']:.3f} "
          f"(bound {result['contraction_bound']:.3f}), "
          f"sup distance to rk4 {result['sup_distance']:.2e}")
    print(f"outputs in {out_dir}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_report(args) -> int:
    path = os.path.join(args.run_dir, "report.json")
    alt = os.path.join(args.run_dir, "counterexample_report.json")
    palt = os.path.join(args.run_dir, "picard_report.json")
    try:
        if os.path.exists(path):
            with open(path) as fh:
                rep = json.load(fh)
            print(f"scenario: {rep['scenario']}   overall: "
                  f"{'PASS' if rep['overall_pass'] else 'FAIL'}   "
                  f"wall: {rep['wall_time']:.2f}s")
            print(f"{'check':32s} {'status':6s} {'worst':>12s} {'tolerance':>12s}")
            for c in rep["checks"]:
                print(f"{c['name']:32s} {'PASS' if c['pass'] else 'FAIL':6s} "
                      f"{c['worst_violation']:12.4g} {c['tolerance']:12.4g}")
            return EXIT_OK if rep["overall_pass"] else EXIT_CHECK_FAILED
        if os.path.exists(alt):
            with open(alt) as fh:
                rep = json.load(fh)
            for key in ("band_w1_to_uniform_max", "band_w1_to_uniform_bound",
                        "fold_crossings", "cluster_gap_min", "cluster_gap_floor",
                        "verify_max_abs_error"):
                print(f"{key}: {rep.get(key)}")
            return EXIT_OK
        if os.path.exists(palt):
            with open(palt) as fh:
                rep = json.load(fh)
            print(f"scenario: {rep['scenario']}  windows: {len(rep['windows'])}  "
                  f"max ratio: {rep['max_observed_ratio']:.3f}  "
                  f"sup distance: {rep['sup_distance_to_rk4']:.2e}")
            return EXIT_OK
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"no report found in {args.run_dir}", file=sys.stderr)
    return EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opinion-lab",
        description="numerical laboratory for continuum opinion dynamics")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario config")
    sim.add_argument("config")
    sim.add_argument("--output", help="override the config's output_dir")
    sim.add_argument("--threads", type=int, default=None)
    sim.add_argument("--seed-override", type=int, default=None)
    sim.add_argument("--check", action="append", metavar="NAME=TOL",
                     help="enable a check or override its tolerance (repeatable)")
    sim.set_defaults(fn=cmd_simulate)

    cex = sub.add_parser("counterexample",
                         help="cycling construction: stationary distribution, "
                              "no pointwise limit")
    cex.add_argument("--config", help="optional YAML with the same flags")
    cex.add_argument("--p", type=float, default=None)
    cex.add_argument("--c0", type=float, default=None)
    cex.add_argument("--n-interval", "--n", dest="n_interval", type=int, default=None)
    cex.add_argument("--n-cluster", type=int, default=None)
    cex.add_argument("--t-end", type=float, default=None)
    cex.add_argument("--delta", type=float, default=None,
                     help="fold-point exclusion radius for the velocity check")
    cex.add_argument("--verify-time", action="append", type=float,
                     help="time at which to verify velocities (repeatable)")
    cex.add_argument("--csv-nodes", type=int, default=400,
                     help="band nodes written to trajectory.csv")
    cex.add_argument("--output")
    cex.set_defaults(fn=cmd_counterexample)

    pch = sub.add_parser("picard-check",
                         help="windowed fixed-point solve with contraction report")
    pch.add_argument("config")
    pch.add_argument("--output")
    pch.add_argument("--threads", type=int, default=None)
    pch.set_defaults(fn=cmd_picard_check)

    rep = sub.add_parser("report", help="print a finished run's report")
    rep.add_argument("run_dir")
    rep.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
