"""Pure-NumPy fallback for the compiled kernels.

Implements the same entry points as the Cython extension ``_kernel`` with
identical semantics (projection behavior, trace recording, status codes).
Floating-point results can differ from the compiled kernel at rounding level
because the summation orders differ (BLAS vs. explicit loops).
"""

from __future__ import annotations

import math

import numpy as np

# status codes shared with the compiled kernel
SPAN_DONE = 0
SPAN_SOLVED = 1
SPAN_NONFINITE = 2
SPAN_GUARD = 3


def pdhg_span(A, b, c, tau, sigma, x, y, xsum, ysum, xstar, ystar,
              dist_tol, guard_radius, t0, nsteps, stride, support,
              sup_iters, sup_pats, dist_iters, dist_vals, w, xnew, u):
    """Run up to ``nsteps`` PDHG iterations in place.

    One iteration is

        x+ = max(0, x - tau * (c - A^T y))
        y+ = y + sigma * (b - A (2 x+ - x))

    Updates ``x, y`` (current iterate), ``xsum, ysum`` (running epoch sums)
    and ``support`` (zero pattern at the last recorded trace point); ``w``,
    ``xnew`` and ``u`` are scratch buffers.  Trace points are taken at
    iterations divisible by ``stride`` and at the solved iteration; a support
    event is emitted whenever the recorded pattern changes.

    Returns ``(steps_done, status, n_sup, n_dist, last_dist)`` where the
    counts index into the ``sup_*`` / ``dist_*`` output buffers.
    """
    tol2 = dist_tol * dist_tol
    guard2 = guard_radius * guard_radius
    n_sup = 0
    n_dist = 0
    last_dist = math.nan
    status = SPAN_DONE
    steps = 0
    for s in range(int(nsteps)):
        t = int(t0) + s + 1
        np.matmul(A.T, y, out=w)
        np.subtract(c, w, out=w)
        w *= tau
        np.subtract(x, w, out=xnew)
        np.maximum(0.0, xnew, out=xnew)
        np.multiply(xnew, 2.0, out=u)
        u -= x
        y += sigma * (b - A @ u)
        x[:] = xnew
        xsum += x
        ysum += y
        steps = s + 1

        dist2 = 0.0
        znorm2 = 0.0
        dx = x - xstar
        dy = y - ystar
        dist2 = float(dx @ dx) + float(dy @ dy)
        znorm2 = float(x @ x) + float(y @ y)
        if not (math.isfinite(dist2) and math.isfinite(znorm2)):
            return steps, SPAN_NONFINITE, n_sup, n_dist, math.nan
        if znorm2 > guard2:
            return steps, SPAN_GUARD, n_sup, n_dist, math.sqrt(dist2)

        solved = dist2 <= tol2
        if solved or t % int(stride) == 0:
            last_dist = math.sqrt(dist2)
            dist_iters[n_dist] = t
            dist_vals[n_dist] = last_dist
            n_dist += 1
            pattern = (x > 0.0).view(np.uint8)
            if not np.array_equal(pattern, support):
                support[:] = pattern
                sup_iters[n_sup] = t
                sup_pats[n_sup, :] = pattern
                n_sup += 1
        if solved:
            return steps, SPAN_SOLVED, n_sup, n_dist, last_dist
    return steps, status, n_sup, n_dist, last_dist


def jacobi_eigvals(S, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps row-by-row until the off-diagonal Frobenius norm drops below
    ``1e-14`` of the matrix norm.  Accuracy is at machine level, far inside
    any caller tolerance.
    """
    A = np.array(S, dtype=np.float64, copy=True)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise ValueError("jacobi_eigvals: matrix must be square")
    if n == 1:
        return A[0, :1].copy()
    total = float(np.linalg.norm(A))
    if total == 0.0:
        return np.zeros(n)
    for _ in range(max_sweeps):
        off2 = float(np.sum(A * A) - np.sum(np.diag(A) ** 2))
        if off2 <= (1e-14 * total) ** 2:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    tval = 1.0 / (2.0 * theta)
                else:
                    tval = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                cos = 1.0 / math.sqrt(tval * tval + 1.0)
                sin = tval * cos
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = cos * rp - sin * rq
                A[q, :] = sin * rp + cos * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = cos * cp - sin * cq
                A[:, q] = sin * cp + cos * cq
                A[p, q] = 0.0
                A[q, p] = 0.0
    return np.diag(A).copy()
