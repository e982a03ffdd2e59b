"""Two-stage decomposition of solver runs and condition measures of instances.

Stage I of a run ends when the exact zero pattern of the iterate settles on
the optimal basis for good; Stage II is the remainder until the distance
tolerance is met.  The condition report collects the quantities that govern
those stage lengths for an instance with a certified unique optimum:

* ``kappa``: condition number sigma_1(A) / sigma_m(A);
* ``Phi``: the closed-form basis-identification measure built from the
  l1 norm of ``x* + s*`` and the augmented column/row norms of the optimal
  simplex tableau ``B^-1 N`` over the smallest solution components;
* ``phi``: disparity ratio mean(x* + s*) / min(x* + s*), >= 1 with equality
  iff the components are perfectly balanced;
* ``z_primal`` / ``z_dual``: the largest augmented column/row norms of the
  tableau.  The dual value uses the null-space identity that maps the dual
  tableau to ``-(B^-1 N)^T``, so the null-space basis is never formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernel
from .errors import SingularMatrixError, UnsolvedRunError
from .instances import LpInstance
from .linalg import lu_solve, spectral_extremes, spectral_norm

__all__ = ["StageDecomposition", "ConditionReport", "detect_stages",
           "condition_report", "verify_bound_chain"]


@dataclass(frozen=True)
class StageDecomposition:
    t_basis: int
    t_local: int
    t_total: int
    settled: bool


@dataclass(frozen=True)
class ConditionReport:
    """Condition measures of one instance; ``Phi`` is inf without a certified optimum."""

    n: int
    kappa: float
    Phi: float
    phi: float
    norm_binv_times_norm_a: float   # ||B^-1|| * ||A||
    tableau_bound: float            # phi_raw * ||B^-1 A||, an upper bound on Phi
    z_primal: float
    z_dual: float
    min_xs: float                   # min_i (x*_i + s*_i)

    @property
    def phi_raw(self) -> float:
        """Sum-based disparity ratio ||x*+s*||_1 / min(x*+s*) = n * phi."""
        return self.n * self.phi


def detect_stages(support_trace: Sequence, dist_trace: Sequence,
                  basis, dist_tol: float) -> StageDecomposition:
    """Split a recorded run into basis-identification and local phases.

    ``support_trace`` holds iteration-sorted ``(iter, support)`` pairs where
    each support persists until the next entry (a full per-iteration trace is
    the special case with every point recorded).  ``t_total`` is the first
    recorded iteration with distance at most ``dist_tol``; ``t_basis`` is the
    smallest recorded iteration from which the support equals ``basis`` all
    the way to ``t_total`` (the last settling wins if the support flickers).
    If the support never settles, ``t_basis = t_total`` and ``settled`` is
    False.

    Raises ``UnsolvedRunError`` when no recorded distance meets the
    tolerance.
    """
    if not len(support_trace) or not len(dist_trace):
        raise ValueError("detect_stages: traces must be nonempty")
    sup_iters = [int(it) for it, _ in support_trace]
    dist_iters = [int(it) for it, _ in dist_trace]
    if any(a > b for a, b in zip(sup_iters, sup_iters[1:])) or \
       any(a > b for a, b in zip(dist_iters, dist_iters[1:])):
        raise ValueError("detect_stages: traces must be iteration-sorted")

    t_total = None
    for it, dist in dist_trace:
        if dist <= dist_tol:
            t_total = int(it)
            break
    if t_total is None:
        raise UnsolvedRunError(f"detect_stages: no recorded distance <= {dist_tol}")

    basis_set = frozenset(int(i) for i in np.asarray(basis).ravel())
    candidate = None
    for it, sup in support_trace:
        if int(it) > t_total:
            break
        if frozenset(int(i) for i in sup) == basis_set:
            if candidate is None:
                candidate = int(it)
        else:
            candidate = None
    settled = candidate is not None
    t_basis = candidate if settled else t_total
    return StageDecomposition(t_basis=t_basis, t_local=t_total - t_basis,
                              t_total=t_total, settled=settled)


def _basis_split(inst: LpInstance) -> tuple[np.ndarray, np.ndarray]:
    basis = np.asarray(inst.basis, dtype=np.int64)
    mask = np.zeros(inst.n, dtype=bool)
    mask[basis] = True
    nonbasis = np.nonzero(~mask)[0]
    return basis, nonbasis


def condition_report(inst: LpInstance, rel_tol: float = 1e-6) -> ConditionReport:
    """Compute the condition measures of an instance.

    ``Phi`` is reported infinite when the instance is not certified (singular
    basis block or a vanishing solution component); all other fields are
    computed where possible.
    """
    A = inst.A
    m, n = inst.m, inst.n
    u = inst.x_star + inst.s_star
    min_xs = float(u.min())
    sum_u = float(u.sum())
    phi = (sum_u / n) / min_xs if min_xs > 0 else math.inf
    phi_raw = sum_u / min_xs if min_xs > 0 else math.inf

    se = spectral_extremes(A, rel_tol)
    kappa = se.sigma_max / se.sigma_min_nonzero

    basis, nonbasis = _basis_split(inst)
    B = np.ascontiguousarray(A[:, basis])
    N = np.ascontiguousarray(A[:, nonbasis])

    # True smallest singular value of B (not thresholded) for ||B^-1||.
    sig_b = np.sqrt(np.clip(kernel.jacobi_eigvals(B @ B.T), 0.0, None))
    sigma_min_b = float(sig_b.min())
    norm_binv_a = se.sigma_max / sigma_min_b if sigma_min_b > 0 else math.inf

    try:
        tableau = lu_solve(B, N)
        binv_a = lu_solve(B, A)
    except SingularMatrixError:
        return ConditionReport(n=n, kappa=kappa, Phi=math.inf, phi=phi,
                               norm_binv_times_norm_a=norm_binv_a,
                               tableau_bound=math.inf, z_primal=math.inf,
                               z_dual=math.inf, min_xs=min_xs)

    col2 = np.sum(tableau * tableau, axis=0)
    row2 = np.sum(tableau * tableau, axis=1)
    z_primal = float(np.sqrt(col2.max() + 1.0))
    z_dual = float(np.sqrt(row2.max() + 1.0))
    tableau_bound = phi_raw * spectral_norm(binv_a, rel_tol)[0]

    if inst.certified and min_xs > 0:
        x_b = inst.x_star[basis]
        s_n = inst.s_star[nonbasis]
        col_term = float(np.max(np.sqrt(col2 + 1.0) / s_n))
        row_term = float(np.max(np.sqrt(row2 + 1.0) / x_b))
        Phi = sum_u * max(col_term, row_term)
    else:
        Phi = math.inf

    return ConditionReport(n=n, kappa=kappa, Phi=Phi, phi=phi,
                           norm_binv_times_norm_a=norm_binv_a,
                           tableau_bound=tableau_bound,
                           z_primal=z_primal, z_dual=z_dual, min_xs=min_xs)


def verify_bound_chain(report: ConditionReport, slack: float = 1e-9) -> bool:
    """Check ``Phi`` against its two deterministic upper bounds.

    Returns True iff ``Phi <= (1 + slack) * min(phi_raw * ||B^-1 A||,
    phi_raw * max(z_primal, z_dual))``; vacuously True when ``Phi`` is
    infinite.
    """
    if not math.isfinite(report.Phi):
        return True
    n_phi = report.n * report.phi
    bound = min(report.tableau_bound, n_phi * max(report.z_primal, report.z_dual))
    return report.Phi <= (1.0 + slack) * bound
