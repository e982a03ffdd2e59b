"""Batch orchestration, summary statistics and CSV emission.

A batch is a grid of cells (problem sizes, or disparity levels), each filled
with ``instance_count`` seeded instances.  Instance seeds derive from
``(master_seed, cell_id, index, attempt)``, so results are reproducible row
by row and independent of how work is distributed over workers: workers get
static round-robin slices of the task list and results are re-assembled in
task order before serialization.

Output is CSV plus a JSON manifest; no plotting.  Schemas (UTF-8, header
row):

* run table:      cell_id,seed,m,n,l,phi,kappa,Phi,T_basis,T_local,T_total,epochs,final_dist,solved
* tail table:     stage,delta,iters
* quantile table: cell_id,stage,q25,q50,q75
* slope table:    curve,slope,intercept,r2,fit_lo,fit_hi

Infinite values serialize as ``inf``; unavailable fields are empty.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .instances import MatrixDistribution, SolutionDistribution, gen_disparity, gen_instance
from .metrics import condition_report
from .rng import derive_seed
from .solver import RunRecord, SolverConfig, solve

__all__ = ["CellSpec", "ExperimentConfig", "ExperimentResult", "run_batch",
           "tail_curve", "loglog_slope", "quantiles",
           "preset_tail", "preset_dims", "preset_disparity",
           "write_run_csv", "write_tail_csv", "write_quantile_csv",
           "write_slope_csv", "write_probe_csv", "write_manifest",
           "analyze_tail", "analyze_dims", "analyze_disparity"]

RUN_HEADER = "cell_id,seed,m,n,l,phi,kappa,Phi,T_basis,T_local,T_total,epochs,final_dist,solved"
MAX_GEN_ATTEMPTS = 10

_STAGE_KEYS = {"basis": "T_basis", "local": "T_local", "total": "T_total"}


@dataclass(frozen=True)
class CellSpec:
    cell_id: int
    m: int
    n: int
    level: Optional[int] = None  # disparity level, when applicable

    @property
    def label(self) -> str:
        if self.level is not None:
            return f"m{self.m}_l{self.level}"
        return f"m{self.m}_n{self.n}"


@dataclass
class ExperimentConfig:
    preset: str
    cells: list
    instance_count: int
    master_seed: int
    solver: SolverConfig = field(default_factory=SolverConfig)
    matrix_kind: str = "gaussian"
    presolve: bool = True
    threads: int = 1
    compute_condition: bool = True

    def validate(self) -> None:
        if not self.cells:
            raise ValueError("ExperimentConfig: cell grid must be nonempty")
        if self.instance_count < 1:
            raise ValueError("ExperimentConfig: instance_count must be >= 1")
        if self.threads < 1:
            raise ValueError("ExperimentConfig: threads must be >= 1")
        self.solver.validate()


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list  # one dict per instance, run-table fields
    tail_curves: list = field(default_factory=list)      # dicts: stage, delta, iters
    quantile_tables: list = field(default_factory=list)  # dicts: cell_id, stage, q25, q50, q75
    slope_fits: list = field(default_factory=list)       # dicts: curve, slope, intercept, r2, fit_lo, fit_hi
    manifest: dict = field(default_factory=dict)


def _run_task(task: dict) -> dict:
    """Generate, solve and summarize one (cell, index) pair.  Top-level for pickling."""
    cell = task["cell"]
    solver_cfg = SolverConfig(**task["solver"])
    solver_cfg.keep_traces = False
    mdist = MatrixDistribution(kind=task["matrix_kind"])
    seed = None
    inst = None
    attempts = 0
    for attempt in range(MAX_GEN_ATTEMPTS):
        attempts = attempt + 1
        seed = derive_seed(task["master_seed"], cell["cell_id"], task["index"], attempt)
        try:
            if cell["level"] is not None:
                inst, _ = gen_disparity(cell["m"], cell["level"], mdist, seed,
                                        presolve=task["presolve"])
            else:
                inst = gen_instance(cell["m"], cell["n"], mdist,
                                    SolutionDistribution(kind="folded_gaussian"),
                                    seed, presolve=task["presolve"])
        except Exception:
            inst = None
            continue
        if inst.certified:
            break
        inst = None
    if inst is None:
        raise RuntimeError(
            f"cell {cell['cell_id']} index {task['index']}: no certified instance "
            f"in {MAX_GEN_ATTEMPTS} attempts")

    rec: RunRecord = solve(inst, solver_cfg)
    row = {
        "cell_id": cell["cell_id"],
        "index": task["index"],
        "seed": seed,
        "m": inst.m,
        "n": inst.n,
        "l": cell["level"],
        "phi": None,
        "kappa": None,
        "Phi": None,
        "T_basis": rec.t_basis,
        "T_local": rec.t_local,
        "T_total": rec.total_iters,
        "epochs": rec.epochs,
        "final_dist": rec.final_dist,
        "solved": rec.solved,
        "attempts": attempts,
    }
    if task["compute_condition"]:
        rep = condition_report(inst)
        row["phi"] = rep.phi
        row["kappa"] = rep.kappa
        row["Phi"] = rep.Phi
    return row


def _run_slice(tasks: list) -> list:
    return [_run_task(t) for t in tasks]


def run_batch(cfg: ExperimentConfig) -> ExperimentResult:
    """Solve every (cell, index) pair of the grid; deterministic in the master seed.

    Certification failures are resampled with recorded replacement attempts;
    unsolved runs are recorded with ``solved=False`` and never abort the
    batch.  Results are identical for any worker count.
    """
    cfg.validate()
    solver_dict = asdict(cfg.solver)
    tasks = []
    for cell in cfg.cells:
        for index in range(cfg.instance_count):
            tasks.append({
                "cell": {"cell_id": cell.cell_id, "m": cell.m, "n": cell.n, "level": cell.level},
                "index": index,
                "master_seed": cfg.master_seed,
                "matrix_kind": cfg.matrix_kind,
                "presolve": cfg.presolve,
                "solver": solver_dict,
                "compute_condition": cfg.compute_condition,
            })

    if cfg.threads == 1:
        rows = [_run_task(t) for t in tasks]
    else:
        nw = min(cfg.threads, len(tasks))
        slices = [tasks[w::nw] for w in range(nw)]
        rows_by_slot: list = [None] * len(tasks)
        with ProcessPoolExecutor(max_workers=nw) as pool:
            futures = [pool.submit(_run_slice, s) for s in slices]
            for w, fut in enumerate(futures):
                for j, row in enumerate(fut.result()):
                    rows_by_slot[w + j * nw] = row
        rows = rows_by_slot

    manifest = {
        "tool": "rpdhg-lab",
        "version": __version__,
        "preset": cfg.preset,
        "master_seed": cfg.master_seed,
        "instance_count": cfg.instance_count,
        "matrix_kind": cfg.matrix_kind,
        "presolve": cfg.presolve,
        "threads_requested": cfg.threads,
        "solver": solver_dict,
        "cells": [
            {
                "cell_id": cell.cell_id,
                "label": cell.label,
                "m": cell.m,
                "n": cell.n,
                "level": cell.level,
                "seeds": [r["seed"] for r in rows if r["cell_id"] == cell.cell_id],
                "attempts": [r["attempts"] for r in rows if r["cell_id"] == cell.cell_id],
            }
            for cell in cfg.cells
        ],
    }
    return ExperimentResult(config=cfg, rows=rows, manifest=manifest)


# ---------------------------------------------------------------------------
# statistics

def tail_curve(records: Sequence[dict], stage: str, delta_grid: Sequence[float]) -> list[tuple[float, int]]:
    """Iteration budget covering at least a (1 - delta) fraction, per delta.

    For each delta the value is the ceil((1-delta) N)-th smallest stage
    count.  All records must be solved; offenders are listed in the error.
    """
    key = _STAGE_KEYS[stage]
    unsolved = [r.get("seed") for r in records if not r["solved"]]
    if unsolved:
        raise ValueError(f"tail_curve: unsolved records present (seeds {unsolved})")
    counts = np.sort(np.asarray([r[key] for r in records], dtype=np.int64))
    N = len(counts)
    if N == 0:
        raise ValueError("tail_curve: no records")
    out = []
    for delta in delta_grid:
        if not 0.0 < delta < 1.0:
            raise ValueError(f"tail_curve: delta must lie in (0, 1), got {delta}")
        k = math.ceil((1.0 - delta) * N - 1e-9)
        k = min(max(k, 1), N)
        out.append((float(delta), int(counts[k - 1])))
    return out


def loglog_slope(points: Sequence[tuple[float, float]],
                 fit_range: Optional[tuple[float, float]] = None) -> dict:
    """Ordinary least squares on (ln x, ln y) over ``fit_range`` in x.

    Returns ``{"slope", "intercept", "r2", "fit_lo", "fit_hi"}``.  Requires
    at least two in-range points with positive coordinates.
    """
    if fit_range is None:
        xs_all = [p[0] for p in points]
        fit_range = (min(xs_all), max(xs_all))
    lo, hi = fit_range
    sel = [(x, y) for x, y in points if lo <= x <= hi]
    if len(sel) < 2:
        raise ValueError(f"loglog_slope: need >= 2 points in range [{lo}, {hi}], got {len(sel)}")
    if any(x <= 0 or y <= 0 for x, y in sel):
        raise ValueError("loglog_slope: points must be strictly positive")
    lx = np.log([x for x, _ in sel])
    ly = np.log([y for _, y in sel])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2,
            "fit_lo": float(lo), "fit_hi": float(hi)}


def quantiles(records: Sequence[dict], stage: str) -> dict:
    """Linear-interpolation quartiles {q25, q50, q75} of a stage count."""
    key = _STAGE_KEYS[stage]
    vals = [r[key] for r in records if r[key] is not None]
    if not vals:
        raise ValueError("quantiles: no records")
    arr = np.asarray(vals, dtype=np.float64)
    q25, q50, q75 = np.quantile(arr, [0.25, 0.5, 0.75])
    return {"q25": float(q25), "q50": float(q50), "q75": float(q75)}


# ---------------------------------------------------------------------------
# presets

def preset_tail(count: int = 1000, m: int = 50, n: int = 100, master_seed: int = 1,
                **kwargs) -> ExperimentConfig:
    """1000 Gaussian/folded-Gaussian instances at one size; tail curves over delta."""
    return ExperimentConfig(preset="tail", cells=[CellSpec(0, m, n)],
                            instance_count=count, master_seed=master_seed, **kwargs)


def preset_dims(n_values: Sequence[int] = (4, 8, 16, 32, 64, 128, 256),
                count: int = 100, master_seed: int = 1, **kwargs) -> ExperimentConfig:
    """Dimension scaling with m = n/2 along a doubling grid of n."""
    cells = [CellSpec(i, n // 2, n) for i, n in enumerate(n_values)]
    return ExperimentConfig(preset="dims", cells=cells, instance_count=count,
                            master_seed=master_seed, **kwargs)


def preset_disparity(levels: Sequence[int] = tuple(range(11)), m: int = 50,
                     count: int = 100, master_seed: int = 1, **kwargs) -> ExperimentConfig:
    """Disparity-controlled family at n = 2m for each level."""
    cells = [CellSpec(i, m, 2 * m, level=l) for i, l in enumerate(levels)]
    return ExperimentConfig(preset="disparity", cells=cells, instance_count=count,
                            master_seed=master_seed, **kwargs)


DEFAULT_TAIL_DELTAS = tuple(np.round(np.logspace(np.log10(0.005), np.log10(0.5), 25), 10))
TAIL_FIT_RANGE_DELTA = (0.01, 0.1)


def analyze_tail(result: ExperimentResult, delta_grid: Sequence[float] = DEFAULT_TAIL_DELTAS,
                 fit_delta_range: tuple[float, float] = TAIL_FIT_RANGE_DELTA) -> None:
    """Fill tail curves per stage and their log-log slopes versus 1/delta."""
    solved = [r for r in result.rows if r["solved"]]
    for stage in ("basis", "local"):
        curve = tail_curve(solved, stage, delta_grid)
        result.tail_curves.extend({"stage": stage, "delta": d, "iters": it} for d, it in curve)
        pts = [(1.0 / d, it) for d, it in curve if it > 0]
        fit = loglog_slope(pts, (1.0 / fit_delta_range[1], 1.0 / fit_delta_range[0]))
        fit["curve"] = f"tail_{stage}_vs_inv_delta"
        result.slope_fits.append(fit)


def _cell_quantiles(result: ExperimentResult) -> dict:
    per_cell = {}
    for cell in result.config.cells:
        rows = [r for r in result.rows if r["cell_id"] == cell.cell_id and r["solved"]]
        per_cell[cell.cell_id] = {stage: quantiles(rows, stage) for stage in ("basis", "local")}
        for stage in ("basis", "local"):
            q = per_cell[cell.cell_id][stage]
            result.quantile_tables.append({"cell_id": cell.cell_id, "stage": stage, **q})
    return per_cell


def analyze_dims(result: ExperimentResult) -> None:
    """Quartiles per cell plus median-vs-n log-log slopes for both stages."""
    per_cell = _cell_quantiles(result)
    for stage in ("basis", "local"):
        pts = [(cell.n, per_cell[cell.cell_id][stage]["q50"]) for cell in result.config.cells]
        pts = [(x, y) for x, y in pts if y > 0]
        fit = loglog_slope(pts)
        fit["curve"] = f"median_{stage}_vs_n"
        result.slope_fits.append(fit)


def analyze_disparity(result: ExperimentResult, fit_max_level: int = 6) -> None:
    """Quartiles per level plus the median Stage-I slope versus the disparity ratio."""
    from .instances import disparity_ratio_level

    per_cell = _cell_quantiles(result)
    pts = []
    for cell in result.config.cells:
        if cell.level is None or cell.level > fit_max_level:
            continue
        phi_l = disparity_ratio_level(cell.m, cell.level)
        med = per_cell[cell.cell_id]["basis"]["q50"]
        if med > 0:
            pts.append((phi_l, med))
    fit = loglog_slope(pts)
    fit["curve"] = "median_basis_vs_phi"
    result.slope_fits.append(fit)


# ---------------------------------------------------------------------------
# serialization

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_run_csv(path, rows: Sequence[dict]) -> None:
    lines = [RUN_HEADER]
    for r in rows:
        lines.append(",".join(_fmt(r[k]) for k in RUN_HEADER.split(",")))
    _write_text(path, lines)


def write_tail_csv(path, curve_rows: Sequence[dict]) -> None:
    lines = ["stage,delta,iters"]
    lines += [f"{r['stage']},{_fmt(float(r['delta']))},{r['iters']}" for r in curve_rows]
    _write_text(path, lines)


def write_quantile_csv(path, q_rows: Sequence[dict]) -> None:
    lines = ["cell_id,stage,q25,q50,q75"]
    lines += [f"{r['cell_id']},{r['stage']},{_fmt(r['q25'])},{_fmt(r['q50'])},{_fmt(r['q75'])}"
              for r in q_rows]
    _write_text(path, lines)


def write_slope_csv(path, fits: Sequence[dict]) -> None:
    lines = ["curve,slope,intercept,r2,fit_lo,fit_hi"]
    lines += [f"{f['curve']},{_fmt(f['slope'])},{_fmt(f['intercept'])},{_fmt(f['r2'])},"
              f"{_fmt(f['fit_lo'])},{_fmt(f['fit_hi'])}" for f in fits]
    _write_text(path, lines)


def write_probe_csv(path, rows: Sequence[dict]) -> None:
    header = "probe,m,n,dist,trials,threshold,exceed_count,empirical_rate,bound_rate"
    lines = [header]
    for r in rows:
        lines.append(",".join(_fmt(r.get(k)) for k in header.split(",")))
    _write_text(path, lines)


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_text(path, lines: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_experiment(result: ExperimentResult, out_dir) -> None:
    """Write every table the result carries into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    write_run_csv(os.path.join(out_dir, "runs.csv"), result.rows)
    if result.tail_curves:
        write_tail_csv(os.path.join(out_dir, "tail.csv"), result.tail_curves)
    if result.quantile_tables:
        write_quantile_csv(os.path.join(out_dir, "quantiles.csv"), result.quantile_tables)
    if result.slope_fits:
        write_slope_csv(os.path.join(out_dir, "slopes.csv"), result.slope_fits)
    write_manifest(os.path.join(out_dir, "manifest.json"), result.manifest)
