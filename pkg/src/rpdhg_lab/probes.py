"""Monte-Carlo probes of random-matrix and random-vector tail behavior,
plus a brute-force LP oracle for tiny instances.

The probes measure empirical exceedance frequencies of the events behind the
random-matrix tail bounds (largest/smallest singular value, condition number,
disparity ratio).  Where a bound carries explicit constants the probe reports
it; where the constants are existential only the empirical curve is reported
and tests statements about its functional form (decay exponents,
monotonicity, scale collapse).

Singular values inside the probes come from numpy's LAPACK-backed SVD on
purpose: the probes then double as an independent cross-check of the
power-iteration/Jacobi routines used elsewhere in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .errors import InfeasibleError
from .instances import LpInstance, MatrixDistribution, sample_entries
from .rng import derive_seed, folded_normals, make_rng

__all__ = ["TailProbeResult", "BruteForceResult", "probe_sigma_max",
           "probe_sigma_min", "probe_kappa", "probe_phi", "brute_force_lp"]

_PHI_BLOCK = 4096  # trials per derived sub-seed in probe_phi


@dataclass(frozen=True)
class TailProbeResult:
    """Empirical frequency of one tail event over seeded trials."""

    trials: int
    exceed_count: int
    threshold: float
    bound_rate: Optional[float] = None  # None when the bound's constants are unknown

    @property
    def empirical_rate(self) -> float:
        return self.exceed_count / self.trials


def _singular_values(m: int, n: int, dist: MatrixDistribution, seed: int, trials: int) -> np.ndarray:
    out = np.empty((trials, min(m, n)))
    for k in range(trials):
        A = sample_entries(m, n, dist, make_rng(derive_seed(seed, k)))
        out[k] = np.linalg.svd(A, compute_uv=False)
    return out


def probe_sigma_max(m: int, n: int, dist: MatrixDistribution, trials: int, seed: int) -> TailProbeResult:
    """Frequency of sigma_1(A) >= 5 sigma_A sqrt(n), against the e^{-6n} bound."""
    if trials < 1:
        raise ValueError("probe_sigma_max: trials must be >= 1")
    sv = _singular_values(m, n, dist, seed, trials)
    threshold = 5.0 * dist.sigma_A * math.sqrt(n)
    exceed = int(np.count_nonzero(sv[:, 0] >= threshold))
    return TailProbeResult(trials=trials, exceed_count=exceed, threshold=threshold,
                           bound_rate=math.exp(-6.0 * n))


def probe_sigma_min(m: int, n: int, dist: MatrixDistribution, trials: int,
                    eps_grid: Sequence[float], seed: int) -> list[TailProbeResult]:
    """Frequency of sigma_m(A) <= eps (sqrt(n) - sqrt(m-1)) for each eps.

    The matching tail bound has existential constants, so ``bound_rate`` is
    left unset; consumers check the qualitative power-law decay in eps.
    Requires ``m <= n``.
    """
    if m > n:
        raise ValueError("probe_sigma_min: need m <= n")
    eps_grid = [float(e) for e in eps_grid]
    if any(e <= 0 for e in eps_grid):
        raise ValueError("probe_sigma_min: eps_grid must be positive")
    sv = _singular_values(m, n, dist, seed, trials)
    sigma_m = sv[:, m - 1]
    scale = math.sqrt(n) - math.sqrt(m - 1)
    results = []
    for eps in eps_grid:
        threshold = eps * scale
        count = int(np.count_nonzero(sigma_m <= threshold))
        results.append(TailProbeResult(trials=trials, exceed_count=count, threshold=threshold))
    return results


def probe_kappa(m: int, n: int, dist: MatrixDistribution, trials: int, seed: int,
                levels: Sequence[float] = (0.5, 0.9, 0.99)) -> dict[float, float]:
    """Empirical quantiles of the condition number kappa = sigma_1 / sigma_m."""
    if trials < 100:
        raise ValueError("probe_kappa: need trials >= 100 for stable quantiles")
    sv = _singular_values(m, n, dist, seed, trials)
    with np.errstate(divide="ignore"):
        kappas = np.where(sv[:, m - 1] > 0, sv[:, 0] / sv[:, m - 1], np.inf)
    return {float(q): float(np.quantile(kappas, q)) for q in levels}


def probe_phi(n: int, trials: int, t_grid: Sequence[float], seed: int) -> list[TailProbeResult]:
    """Frequency of the sum-based disparity ratio exceeding each threshold.

    Samples folded-Gaussian vectors u of length ``n`` and measures
    ``Pr[sum(u)/min(u) >= t]``.  The bound's constant is existential, so only
    the empirical curve is reported; its log-log decay slope is close to -1
    in the tail.
    """
    if n < 1 or trials < 1:
        raise ValueError("probe_phi: n and trials must be >= 1")
    t_grid = [float(t) for t in t_grid]
    ratios = np.empty(trials)
    done = 0
    block_idx = 0
    while done < trials:
        count = min(_PHI_BLOCK, trials - done)
        rng = make_rng(derive_seed(seed, block_idx))
        u = folded_normals(rng, count * n).reshape(count, n)
        mins = u.min(axis=1)
        with np.errstate(divide="ignore"):
            ratios[done : done + count] = np.where(mins > 0, u.sum(axis=1) / mins, np.inf)
        done += count
        block_idx += 1
    return [TailProbeResult(trials=trials,
                            exceed_count=int(np.count_nonzero(ratios >= t)),
                            threshold=t)
            for t in t_grid]


@dataclass(frozen=True)
class BruteForceResult:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    basis: tuple[int, ...]
    objective: float
    unique: bool


def brute_force_lp(inst: LpInstance, feas_tol: float = 1e-10) -> BruteForceResult:
    """Exhaustive basic-solution enumeration; the test oracle for tiny LPs.

    Tries every m-column subset, keeps the feasible basic solutions
    (componentwise >= -feas_tol) and returns the objective minimizer with its
    dual certificate ``y = B^-T c_B`` and slack ``s = c - A^T y``.  Objective
    ties within 1e-10 keep the lexicographically smallest basis and clear the
    ``unique`` flag.  Guarded to n <= 20.

    Raises ``InfeasibleError`` when no basis is feasible.
    """
    m, n = inst.m, inst.n
    if n > 20:
        raise ValueError(f"brute_force_lp: combinatorial guard n <= 20, got n={n}")
    A, b, c = inst.A, inst.b, inst.c
    best_obj = math.inf
    best = None
    unique = True
    for cols in combinations(range(n), m):
        Bsub = A[:, cols]
        try:
            xb = np.linalg.solve(Bsub, b)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(xb)):
            continue
        # Reject spurious solutions of near-singular bases.
        if np.linalg.norm(Bsub @ xb - b) > 1e-8 * (1.0 + np.linalg.norm(b) + np.linalg.norm(xb)):
            continue
        if np.any(xb < -feas_tol):
            continue
        obj = float(c[list(cols)] @ xb)
        if obj < best_obj - 1e-10:
            best_obj = obj
            best = (cols, xb)
            unique = True
        elif best is not None and obj <= best_obj + 1e-10:
            unique = False
    if best is None:
        raise InfeasibleError("brute_force_lp: no feasible basis")
    cols, xb = best
    x = np.zeros(n)
    x[list(cols)] = xb
    y = np.linalg.solve(A[:, cols].T, c[list(cols)])
    s = c - A.T @ y
    return BruteForceResult(x=x, y=y, s=s, basis=tuple(cols),
                            objective=best_obj, unique=unique)
