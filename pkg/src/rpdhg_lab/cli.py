"""Command-line front end.

Subcommands: generate, solve, analyze, probe, experiment.  Every run that
writes output also writes a JSON manifest capturing the full configuration
and the seeds involved.  Exit codes: 0 success, 1 usage error, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__, harness, kernel
from .instances import (MatrixDistribution, SolutionDistribution, gen_disparity,
                        gen_instance, load_instance, save_instance, write_mps)
from .metrics import condition_report, verify_bound_chain
from .probes import probe_kappa, probe_phi, probe_sigma_max, probe_sigma_min
from .solver import SolverConfig, solve


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dist-tol", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=10_000_000)
    p.add_argument("--check-period", type=int, default=64)
    p.add_argument("--beta", type=float, default=1.0 / math.e)
    p.add_argument("--trace-stride", type=int, default=1)
    p.add_argument("--backend", choices=("auto",) + kernel.available_backends(), default="auto")


def _solver_config(args) -> SolverConfig:
    return SolverConfig(beta=args.beta, check_period=args.check_period,
                        dist_tol=args.dist_tol, max_iters=args.max_iters,
                        trace_stride=args.trace_stride, backend=args.backend)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpdhg-lab",
                                     description="restarted-PDHG laboratory for random LPs")
    parser.add_argument("--version", action="version", version=f"rpdhg-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate one instance file")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--dist", choices=("gaussian", "rademacher", "uniform-unit-var"),
                   default="gaussian")
    g.add_argument("--solution", choices=("folded-gaussian", "disparity"),
                   default="folded-gaussian")
    g.add_argument("--level", type=int, default=0, help="disparity level l")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--presolve", action="store_true")
    g.add_argument("--shuffle", action="store_true")
    g.add_argument("--out", required=True)
    g.add_argument("--mps", help="also export fixed-format MPS here")

    s = sub.add_parser("solve", help="solve one instance file")
    s.add_argument("--instance", required=True)
    s.add_argument("--csv", help="write a one-row run CSV here")
    s.add_argument("--stop-mode", choices=("distance", "kkt"), default="distance")
    s.add_argument("--kkt-tol", type=float, default=1e-8)
    _add_solver_flags(s)

    a = sub.add_parser("analyze", help="condition report for one instance file")
    a.add_argument("--instance", required=True)
    a.add_argument("--csv", help="write the report as one CSV row here")

    p = sub.add_parser("probe", help="Monte-Carlo tail probes")
    p.add_argument("kind", choices=("sigma-max", "sigma-min", "kappa", "phi"))
    p.add_argument("--m", type=int, default=25)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--dist", choices=("gaussian", "rademacher", "uniform-unit-var"),
                   default="gaussian")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--eps", type=float, nargs="+", help="eps grid for sigma-min")
    p.add_argument("--thresholds", type=float, nargs="+", help="t grid for phi")
    p.add_argument("--csv", help="write probe rows here")

    e = sub.add_parser("experiment", help="run an experiment preset")
    e.add_argument("preset", choices=("tail", "dims", "disparity", "custom"))
    e.add_argument("--m", type=int, default=50)
    e.add_argument("--n", type=int, default=100)
    e.add_argument("--count", type=int, default=None, help="instances per cell")
    e.add_argument("--seed", type=int, default=1)
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--threads", type=int, default=1)
    e.add_argument("--n-grid", type=int, nargs="+", help="n values for dims/custom")
    e.add_argument("--levels", type=int, nargs="+", help="levels for disparity")
    e.add_argument("--no-presolve", action="store_true")
    e.add_argument("--no-condition", action="store_true",
                   help="skip per-instance condition reports")
    _add_solver_flags(e)

    return parser


def _matrix_dist(name: str) -> MatrixDistribution:
    return MatrixDistribution(kind=name.replace("-", "_"))


def _cmd_generate(args) -> int:
    if args.solution == "disparity":
        if args.n != 2 * args.m:
            print("generate: disparity family requires n = 2m", file=sys.stderr)
            return 1
        inst, _ = gen_disparity(args.m, args.level, _matrix_dist(args.dist), args.seed,
                                presolve=args.presolve)
    else:
        inst = gen_instance(args.m, args.n, _matrix_dist(args.dist),
                            SolutionDistribution(kind="folded_gaussian"),
                            args.seed, presolve=args.presolve, shuffle=args.shuffle)
    save_instance(inst, args.out)
    if args.mps:
        write_mps(inst, args.mps)
    harness.write_manifest(args.out + ".manifest.json", {
        "tool": "rpdhg-lab", "version": __version__, "command": "generate",
        "args": {k: v for k, v in vars(args).items() if k != "command"},
    })
    print(f"wrote {args.out} (m={inst.m}, n={inst.n}, certified={inst.certified})")
    return 0


def _cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    cfg = _solver_config(args)
    cfg.stop_mode = args.stop_mode
    cfg.kkt_tol = args.kkt_tol
    cfg.keep_traces = False
    rec = solve(inst, cfg)
    print(f"solved={rec.solved} iters={rec.total_iters} final_dist={rec.final_dist:.3e} "
          f"epochs={rec.epochs} T_basis={rec.t_basis} T_local={rec.t_local}")
    if args.csv:
        rep = condition_report(inst)
        row = {"cell_id": 0, "seed": inst.seed, "m": inst.m, "n": inst.n,
               "l": inst.meta.get("level_l"), "phi": rep.phi, "kappa": rep.kappa,
               "Phi": rep.Phi, "T_basis": rec.t_basis, "T_local": rec.t_local,
               "T_total": rec.total_iters, "epochs": rec.epochs,
               "final_dist": rec.final_dist, "solved": rec.solved}
        harness.write_run_csv(args.csv, [row])
        harness.write_manifest(args.csv + ".manifest.json", {
            "tool": "rpdhg-lab", "version": __version__, "command": "solve",
            "instance": args.instance, "seed": inst.seed,
            "solver": {"dist_tol": cfg.dist_tol, "max_iters": cfg.max_iters,
                       "check_period": cfg.check_period, "beta": cfg.beta,
                       "trace_stride": cfg.trace_stride, "stop_mode": cfg.stop_mode},
        })
    return 0


def _cmd_analyze(args) -> int:
    inst = load_instance(args.instance)
    rep = condition_report(inst)
    ok = verify_bound_chain(rep)
    print(f"kappa={rep.kappa:.6g} Phi={rep.Phi:.6g} phi={rep.phi:.6g} "
          f"||B^-1||*||A||={rep.norm_binv_times_norm_a:.6g} "
          f"Z_p={rep.z_primal:.6g} Z_d={rep.z_dual:.6g} min_xs={rep.min_xs:.6g} "
          f"bound_chain_ok={ok}")
    if args.csv:
        header = "seed,m,n,kappa,Phi,phi,norm_binv_times_norm_a,tableau_bound,Z_p,Z_d,min_xs,bound_chain_ok"
        vals = [inst.seed, inst.m, inst.n, rep.kappa, rep.Phi, rep.phi,
                rep.norm_binv_times_norm_a, rep.tableau_bound, rep.z_primal,
                rep.z_dual, rep.min_xs, ok]
        lines = [header, ",".join(harness._fmt(v) for v in vals)]
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def _cmd_probe(args) -> int:
    dist = _matrix_dist(args.dist)
    rows = []
    if args.kind == "sigma-max":
        r = probe_sigma_max(args.m, args.n, dist, args.trials, args.seed)
        rows.append({"probe": "sigma_max", "m": args.m, "n": args.n, "dist": dist.kind,
                     "trials": r.trials, "threshold": r.threshold,
                     "exceed_count": r.exceed_count, "empirical_rate": r.empirical_rate,
                     "bound_rate": r.bound_rate})
    elif args.kind == "sigma-min":
        eps = args.eps or [0.05, 0.1, 0.2, 0.4, 0.8]
        for r in probe_sigma_min(args.m, args.n, dist, args.trials, eps, args.seed):
            rows.append({"probe": "sigma_min", "m": args.m, "n": args.n, "dist": dist.kind,
                         "trials": r.trials, "threshold": r.threshold,
                         "exceed_count": r.exceed_count, "empirical_rate": r.empirical_rate,
                         "bound_rate": r.bound_rate})
    elif args.kind == "kappa":
        q = probe_kappa(args.m, args.n, dist, args.trials, args.seed)
        for level, val in q.items():
            rows.append({"probe": "kappa_quantile", "m": args.m, "n": args.n,
                         "dist": dist.kind, "trials": args.trials, "threshold": level,
                         "exceed_count": None, "empirical_rate": None, "bound_rate": val})
        print("kappa quantiles:", {k: round(v, 3) for k, v in q.items()})
    else:  # phi
        ts = args.thresholds or list(np.logspace(3, 5.5, 11))
        for r in probe_phi(args.n, args.trials, ts, args.seed):
            rows.append({"probe": "phi", "m": None, "n": args.n, "dist": "folded_gaussian",
                         "trials": r.trials, "threshold": r.threshold,
                         "exceed_count": r.exceed_count, "empirical_rate": r.empirical_rate,
                         "bound_rate": r.bound_rate})
    for r in rows:
        if r["empirical_rate"] is not None:
            print(f"{r['probe']} threshold={r['threshold']:.6g} rate={r['empirical_rate']:.6g}")
    if args.csv:
        harness.write_probe_csv(args.csv, rows)
        harness.write_manifest(args.csv + ".manifest.json", {
            "tool": "rpdhg-lab", "version": __version__, "command": "probe",
            "args": {k: v for k, v in vars(args).items() if k != "command"},
        })
    return 0


def _cmd_experiment(args) -> int:
    common = dict(master_seed=args.seed, solver=_solver_config(args),
                  presolve=not args.no_presolve, threads=args.threads,
                  compute_condition=not args.no_condition)
    if args.preset == "tail":
        cfg = harness.preset_tail(count=args.count or 1000, m=args.m, n=args.n, **common)
    elif args.preset == "dims":
        n_values = tuple(args.n_grid) if args.n_grid else (4, 8, 16, 32, 64, 128, 256)
        cfg = harness.preset_dims(n_values=n_values, count=args.count or 100, **common)
    elif args.preset == "disparity":
        levels = tuple(args.levels) if args.levels else tuple(range(11))
        cfg = harness.preset_disparity(levels=levels, m=args.m,
                                       count=args.count or 100, **common)
    else:  # custom: one cell per n in the grid, m from --m unless n/2 fits
        n_values = tuple(args.n_grid) if args.n_grid else (args.n,)
        cells = [harness.CellSpec(i, args.m if len(n_values) == 1 else n // 2, n)
                 for i, n in enumerate(n_values)]
        cfg = harness.ExperimentConfig(preset="custom", cells=cells,
                                       instance_count=args.count or 100, **common)

    result = harness.run_batch(cfg)
    if args.preset == "tail":
        harness.analyze_tail(result)
    elif args.preset == "dims":
        harness.analyze_dims(result)
    elif args.preset == "disparity":
        harness.analyze_disparity(result)
    else:
        harness._cell_quantiles(result)
    harness.write_experiment(result, args.out)
    unsolved = sum(1 for r in result.rows if not r["solved"])
    print(f"{len(result.rows)} runs, {unsolved} unsolved; tables written to {args.out}")
    return 0


_COMMANDS = {"generate": _cmd_generate, "solve": _cmd_solve, "analyze": _cmd_analyze,
             "probe": _cmd_probe, "experiment": _cmd_experiment}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; remap to 1
        return 0 if exc.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except BrokenPipeError:
        return 0
    except Exception as exc:  # runtime failure contract
        print(f"rpdhg-lab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
