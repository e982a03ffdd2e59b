"""Restarted primal-dual hybrid gradient for standard-form LPs.

One inner iteration is

    x+ = P_+(x - tau (c - A^T y)),   y+ = y + sigma (b - A (2 x+ - x))

with step sizes ``tau = s_min / (2 s_max)`` and ``sigma = 1 / (2 s_min s_max)``
from the extreme nonzero singular values of ``A``.  Every ``check_period``
inner iterations the normalized duality gap of the running average is
compared against the gap at the epoch start; when it has shrunk to a ``beta``
fraction, the method restarts from the average.  Termination is by Euclidean
distance to the stored optimum (instances here always carry one) or, behind a
flag, by relative KKT residuals.

The inner loop runs in a compiled kernel when available (see
:mod:`rpdhg_lab.kernel`); this module owns all restart and termination logic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernel
from .errors import NumericalDivergenceError
from .instances import LpInstance
from .linalg import SpectralExtremes, spectral_extremes

__all__ = ["StepSizes", "SolverConfig", "IterateState", "RunRecord",
           "one_pdhg", "normalized_gap", "solve"]

DIVERGENCE_GUARD = 1e12  # abort when ||(x, y)|| exceeds this times (1 + ||z*||)


@dataclass(frozen=True)
class StepSizes:
    """Primal and dual step sizes; valid when ``tau sigma sigma_max^2 <= 1/4``."""

    tau: float
    sigma: float

    def __post_init__(self):
        if self.tau <= 0 or self.sigma <= 0:
            raise ValueError("step sizes must be positive")

    @classmethod
    def from_extremes(cls, se: SpectralExtremes) -> "StepSizes":
        return cls(tau=se.sigma_min_nonzero / (2.0 * se.sigma_max),
                   sigma=1.0 / (2.0 * se.sigma_min_nonzero * se.sigma_max))

    def valid_for(self, sigma_max: float) -> bool:
        return self.tau * self.sigma * sigma_max**2 <= 0.25 + 1e-9


@dataclass
class SolverConfig:
    beta: float = 1.0 / math.e          # restart factor
    check_period: int = 64              # inner iterations between restart checks
    dist_tol: float = 1e-4              # termination distance to the optimum
    max_iters: int = 10_000_000
    spectral_rel_tol: float = 1e-6      # accuracy of the step-size singular values
    gap_bisect_tol: float = 1e-9        # ball-multiplier bisection accuracy
    trace_stride: int = 1               # trace granularity (iterations)
    stop_mode: str = "distance"         # "distance" or "kkt"
    kkt_tol: float = 1e-8               # relative KKT residual target (kkt mode)
    backend: str = "auto"               # kernel backend: auto / cython / python
    keep_traces: bool = True            # drop per-run traces after stage detection

    def validate(self) -> None:
        if not (0.0 < self.beta < 1.0):
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        for name in ("check_period", "max_iters", "trace_stride"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive count")
        for name in ("dist_tol", "spectral_rel_tol", "gap_bisect_tol", "kkt_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.stop_mode not in ("distance", "kkt"):
            raise ValueError(f"stop_mode must be 'distance' or 'kkt', got {self.stop_mode!r}")


@dataclass
class IterateState:
    """Solver state: current iterate plus running epoch sums.

    ``x_avg``/``y_avg`` are the arithmetic means of the inner iterates since
    the last restart (the epoch-start point itself is excluded); with no
    steps taken yet they fall back to the current point.
    """

    x: np.ndarray
    y: np.ndarray
    xsum: np.ndarray
    ysum: np.ndarray
    inner_count: int = 0
    epoch_index: int = 0
    total_iters: int = 0

    @classmethod
    def initial(cls, m: int, n: int) -> "IterateState":
        return cls(x=np.zeros(n), y=np.zeros(m), xsum=np.zeros(n), ysum=np.zeros(m))

    @property
    def x_avg(self) -> np.ndarray:
        return self.xsum / self.inner_count if self.inner_count else self.x.copy()

    @property
    def y_avg(self) -> np.ndarray:
        return self.ysum / self.inner_count if self.inner_count else self.y.copy()


@dataclass
class RunRecord:
    """Outcome of one solve.

    ``support_trace`` records ``(iteration, support)`` whenever the exact
    zero pattern of ``x`` changed at a recorded point (run-length encoding:
    the pattern persists until the next entry); ``dist_trace`` records
    ``(iteration, distance)`` at ``trace_stride`` granularity.  ``t_basis``
    and ``t_local`` are filled from the traces when the run solved a
    certified instance, else left None.
    """

    solved: bool
    total_iters: int
    final_dist: float
    epochs: int
    t_basis: Optional[int] = None
    t_local: Optional[int] = None
    settled: bool = False
    support_trace: list = field(default_factory=list)
    dist_trace: list = field(default_factory=list)
    restarts: list = field(default_factory=list)
    trace_stride: int = 1
    matvec_count: int = 0
    gap_evals: int = 0
    kkt_residual: float = math.nan


def one_pdhg(state: IterateState, inst: LpInstance, steps: StepSizes) -> IterateState:
    """One PDHG iteration; returns the advanced state.

    Exactly two matrix-vector products with A / A^T are performed.  Raises
    ``NumericalDivergenceError`` (carrying the iteration index) if the new
    iterate is not finite.
    """
    A = inst.A
    if state.x.shape != (inst.n,) or state.y.shape != (inst.m,):
        raise ValueError("one_pdhg: state dimensions do not match the instance")
    w = A.T @ state.y
    x_new = np.maximum(0.0, state.x - steps.tau * (inst.c - w))
    y_new = state.y + steps.sigma * (inst.b - A @ (2.0 * x_new - state.x))
    t = state.total_iters + 1
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(y_new))):
        raise NumericalDivergenceError("one_pdhg produced non-finite values", t)
    return IterateState(x=x_new, y=y_new,
                        xsum=state.xsum + x_new, ysum=state.ysum + y_new,
                        inner_count=state.inner_count + 1,
                        epoch_index=state.epoch_index,
                        total_iters=t)


def normalized_gap(x, y, r: float, inst: LpInstance, bisect_tol: float = 1e-9) -> float:
    """Normalized duality gap of ``(x, y)`` at radius ``r``.

    Maximizes the Lagrangian difference over the radius-``r`` ball around
    ``(x, y)`` intersected with ``x + dx >= 0`` and divides by ``r``.  The
    objective is linear, ``g . d`` with ``g = (A^T y - c, b - A x)``, so the
    maximizer has the closed form ``dx = max(-x, gx / lam)``, ``dy = gy / lam``
    for a ball multiplier ``lam > 0`` found by bisection on ``||d(lam)|| = r``
    (to ``bisect_tol * r``).  Zero exactly at saddle points.
    """
    if r <= 0:
        raise ValueError(f"normalized_gap: radius must be positive, got {r}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    g_x = inst.A.T @ y - inst.c
    g_y = inst.b - inst.A @ x
    gnorm = math.sqrt(float(g_x @ g_x) + float(g_y @ g_y))
    if gnorm == 0.0:
        return 0.0

    # Unconstrained maximizer r g / ||g||: valid whenever it keeps x + dx >= 0.
    scale = r / gnorm
    if np.all(x + scale * g_x >= 0.0):
        return gnorm

    def direction(lam):
        dx = np.maximum(-x, g_x / lam)
        dy = g_y / lam
        return dx, dy, math.sqrt(float(dx @ dx) + float(dy @ dy))

    lam_hi = 2.0 * gnorm / r          # ||d|| <= gnorm/lam = r/2 < r here
    lam_lo = gnorm / r
    floor = lam_hi * 1e-200
    _, _, nd = direction(lam_lo)
    while nd < r and lam_lo > floor:
        lam_lo *= 0.5
        _, _, nd = direction(lam_lo)
    if nd < r:
        # Ball never active: the feasible ascent directions are bounded
        # (g_y ~ 0 and g_x <= 0 componentwise); take the limiting value.
        dx, dy, _ = direction(lam_lo)
        value = float(g_x @ dx) + float(g_y @ dy)
        return max(value, 0.0) / r

    dx, dy, nd = direction(lam_lo)
    for _ in range(500):
        if abs(nd - r) <= bisect_tol * r:
            break
        lam_mid = math.sqrt(lam_lo * lam_hi)
        dx, dy, nd = direction(lam_mid)
        if nd >= r:
            lam_lo = lam_mid
        else:
            lam_hi = lam_mid
    value = float(g_x @ dx) + float(g_y @ dy)
    return max(value, 0.0) / r


def _kkt_residual(x, y, inst: LpInstance) -> float:
    primal = np.linalg.norm(inst.A @ x - inst.b) / (1.0 + np.linalg.norm(inst.b))
    s = inst.c - inst.A.T @ y
    dual = np.linalg.norm(np.minimum(s, 0.0)) / (1.0 + np.linalg.norm(inst.c))
    cx = float(inst.c @ x)
    by = float(inst.b @ y)
    gap = abs(cx - by) / (1.0 + abs(cx) + abs(by))
    return max(primal, dual, gap)


class _Tracer:
    """Accumulates the support / distance traces across kernel spans."""

    def __init__(self, n: int):
        self.support = np.zeros(n, dtype=np.uint8)
        self.support_trace: list[tuple[int, tuple[int, ...]]] = []
        self.dist_trace: list[tuple[int, float]] = []

    def record_state(self, t: int, x: np.ndarray, dist: float) -> None:
        """Record (or overwrite) the trace point at iteration ``t``."""
        if self.dist_trace and self.dist_trace[-1][0] == t:
            self.dist_trace[-1] = (t, dist)
        else:
            self.dist_trace.append((t, dist))
        pattern = (x > 0.0).view(np.uint8)
        if self.support_trace and not np.array_equal(pattern, self.support):
            self.support[:] = pattern
            entry = (t, tuple(int(i) for i in np.nonzero(pattern)[0]))
            if self.support_trace and self.support_trace[-1][0] == t:
                self.support_trace[-1] = entry
            else:
                self.support_trace.append(entry)
        elif not self.support_trace:
            self.support[:] = pattern
            self.support_trace.append((t, tuple(int(i) for i in np.nonzero(pattern)[0])))

    def merge_span(self, n_sup, sup_iters, sup_pats, n_dist, dist_iters, dist_vals) -> None:
        for k in range(n_dist):
            self.dist_trace.append((int(dist_iters[k]), float(dist_vals[k])))
        for k in range(n_sup):
            idx = tuple(int(i) for i in np.nonzero(sup_pats[k])[0])
            self.support_trace.append((int(sup_iters[k]), idx))


def solve(inst: LpInstance, cfg: Optional[SolverConfig] = None) -> RunRecord:
    """Run restarted PDHG from the origin until tolerance or the iteration cap.

    Returns a ``RunRecord``; an exhausted iteration budget yields
    ``solved=False`` rather than an exception.  Numerical divergence raises
    ``NumericalDivergenceError``.
    """
    cfg = cfg if cfg is not None else SolverConfig()
    cfg.validate()
    backend = kernel.resolve(cfg.backend)

    A = np.ascontiguousarray(inst.A, dtype=np.float64)
    b = np.ascontiguousarray(inst.b, dtype=np.float64)
    c = np.ascontiguousarray(inst.c, dtype=np.float64)
    m, n = A.shape

    se = spectral_extremes(A, cfg.spectral_rel_tol)
    steps = StepSizes.from_extremes(se)

    xstar = np.ascontiguousarray(inst.x_star, dtype=np.float64)
    ystar = np.ascontiguousarray(inst.y_star, dtype=np.float64)
    zstar_norm = math.sqrt(float(xstar @ xstar) + float(ystar @ ystar))
    guard = DIVERGENCE_GUARD * (1.0 + zstar_norm)

    distance_mode = cfg.stop_mode == "distance"
    kernel_tol = cfg.dist_tol if distance_mode else 0.0

    x = np.zeros(n)
    y = np.zeros(m)
    xsum = np.zeros(n)
    ysum = np.zeros(m)

    def dist_to_opt():
        dx = x - xstar
        dy = y - ystar
        return math.sqrt(float(dx @ dx) + float(dy @ dy))

    tracer = _Tracer(n)
    dist0 = dist_to_opt()
    tracer.record_state(0, x, dist0)

    matvecs = 0
    gap_evals = 0
    restarts: list[dict] = []
    epoch = 0
    solved = False
    final_dist = dist0
    kkt = math.nan

    if distance_mode and dist0 <= cfg.dist_tol:
        solved = True
    elif not distance_mode:
        kkt = _kkt_residual(x, y, inst)
        matvecs += 2
        solved = kkt <= cfg.kkt_tol

    cp = int(cfg.check_period)
    stride = int(cfg.trace_stride)
    w_buf = np.empty(n)
    xnew_buf = np.empty(n)
    u_buf = np.empty(n)
    sup_iters = np.empty(cp, dtype=np.int64)
    sup_pats = np.empty((cp, n), dtype=np.uint8)
    dist_iters = np.empty(cp + 1, dtype=np.int64)
    dist_vals = np.empty(cp + 1, dtype=np.float64)

    epoch_start_x = x.copy()
    epoch_start_y = y.copy()
    gap_epoch_start = None  # first epoch: radius fixed at the first check
    t = 0
    inner = 0

    def gap_at(px, py, radius):
        nonlocal matvecs, gap_evals
        matvecs += 2
        gap_evals += 1
        return normalized_gap(px, py, radius, inst, cfg.gap_bisect_tol)

    while not solved and t < cfg.max_iters:
        span = min(cp - inner % cp if inner % cp else cp, cfg.max_iters - t)
        done, status, n_sup, n_dist, last_dist = backend.pdhg_span(
            A, b, c, steps.tau, steps.sigma, x, y, xsum, ysum, xstar, ystar,
            kernel_tol, guard, t, span, stride, tracer.support,
            sup_iters, sup_pats, dist_iters, dist_vals, w_buf, xnew_buf, u_buf)
        tracer.merge_span(n_sup, sup_iters, sup_pats, n_dist, dist_iters, dist_vals)
        t += done
        inner += done
        matvecs += 2 * done
        if status == kernel.SPAN_NONFINITE:
            raise NumericalDivergenceError("solve: iterate became non-finite", t)
        if status == kernel.SPAN_GUARD:
            raise NumericalDivergenceError(
                f"solve: iterate norm exceeded {guard:.3e}", t)
        if status == kernel.SPAN_SOLVED:
            solved = True
            final_dist = last_dist
            break
        if t >= cfg.max_iters:
            break

        # Reached a restart-check point.
        x_avg = xsum / inner
        y_avg = ysum / inner
        dxa = x_avg - epoch_start_x
        dya = y_avg - epoch_start_y
        r_avg = math.sqrt(float(dxa @ dxa) + float(dya @ dya))
        if gap_epoch_start is None:
            r0 = r_avg if r_avg > 0 else 1.0
            gap_epoch_start = gap_at(epoch_start_x, epoch_start_y, r0)
        g_avg = gap_at(x_avg, y_avg, r_avg if r_avg > 0 else 1.0)

        if not distance_mode:
            kkt = _kkt_residual(x, y, inst)
            matvecs += 2
            if kkt <= cfg.kkt_tol:
                solved = True
                final_dist = dist_to_opt()
                tracer.record_state(t, x, final_dist)
                break

        if g_avg <= cfg.beta * gap_epoch_start:
            restarts.append({"iter": t, "epoch": epoch,
                             "gap_avg": g_avg, "gap_epoch_start": gap_epoch_start})
            prev_x, prev_y = epoch_start_x, epoch_start_y
            x[:] = x_avg
            y[:] = y_avg
            xsum[:] = 0.0
            ysum[:] = 0.0
            inner = 0
            epoch += 1
            epoch_start_x = x.copy()
            epoch_start_y = y.copy()
            dpx = x - prev_x
            dpy = y - prev_y
            r_new = math.sqrt(float(dpx @ dpx) + float(dpy @ dpy))
            gap_epoch_start = gap_at(x, y, r_new if r_new > 0 else 1.0)

            d_now = dist_to_opt()
            tracer.record_state(t, x, d_now)
            if distance_mode and d_now <= cfg.dist_tol:
                solved = True
                final_dist = d_now
                break

    if not solved:
        final_dist = dist_to_opt()
        tracer.record_state(t, x, final_dist)
    elif distance_mode is False:
        kkt = _kkt_residual(x, y, inst)
        matvecs += 2

    record = RunRecord(solved=solved, total_iters=t, final_dist=final_dist,
                       epochs=epoch + 1, support_trace=tracer.support_trace,
                       dist_trace=tracer.dist_trace, restarts=restarts,
                       trace_stride=stride, matvec_count=matvecs,
                       gap_evals=gap_evals, kkt_residual=kkt)

    if solved and distance_mode and inst.certified:
        from .metrics import detect_stages  # local import avoids a module cycle

        stages = detect_stages(record.support_trace, record.dist_trace,
                               inst.basis, cfg.dist_tol)
        record.t_basis = stages.t_basis
        record.t_local = stages.t_local
        record.settled = stages.settled
    if not cfg.keep_traces:
        record.support_trace = []
        record.dist_trace = []
    return record
