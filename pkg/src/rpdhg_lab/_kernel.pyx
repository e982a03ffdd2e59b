# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: the PDHG inner loop and a Jacobi eigensolver.

Semantics mirror the pure-Python fallback ``_kernel_py`` exactly; see there
for the contract documentation.
"""

from libc.math cimport isfinite, sqrt, fabs, hypot, copysign, NAN

import numpy as np

cimport numpy as cnp

SPAN_DONE = 0
SPAN_SOLVED = 1
SPAN_NONFINITE = 2
SPAN_GUARD = 3


def pdhg_span(double[:, ::1] A, double[::1] b, double[::1] c,
              double tau, double sigma,
              double[::1] x, double[::1] y,
              double[::1] xsum, double[::1] ysum,
              double[::1] xstar, double[::1] ystar,
              double dist_tol, double guard_radius,
              long long t0, long long nsteps, long long stride,
              unsigned char[::1] support,
              long long[::1] sup_iters, unsigned char[:, ::1] sup_pats,
              long long[::1] dist_iters, double[::1] dist_vals,
              double[::1] w, double[::1] xnew, double[::1] u):
    """Run up to ``nsteps`` PDHG iterations in place; see ``_kernel_py.pdhg_span``."""
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t n = A.shape[1]
    cdef double tol2 = dist_tol * dist_tol
    cdef double guard2 = guard_radius * guard_radius
    cdef Py_ssize_t n_sup = 0, n_dist = 0
    cdef double last_dist = NAN
    cdef Py_ssize_t steps = 0
    cdef long long t
    cdef Py_ssize_t s, i, j
    cdef double yi, acc, xv, dxj, dyi, dist2, znorm2
    cdef bint solved, changed
    cdef unsigned char bit

    for s in range(nsteps):
        t = t0 + s + 1

        # w = A^T y
        for j in range(n):
            w[j] = 0.0
        for i in range(m):
            yi = y[i]
            for j in range(n):
                w[j] += yi * A[i, j]

        # x+ = max(0, x - tau (c - w)); u = 2 x+ - x
        for j in range(n):
            xv = x[j] - tau * (c[j] - w[j])
            if xv <= 0.0:
                xv = 0.0
            xnew[j] = xv
            u[j] = 2.0 * xv - x[j]

        # y+ = y + sigma (b - A u)
        for i in range(m):
            acc = 0.0
            for j in range(n):
                acc += A[i, j] * u[j]
            y[i] += sigma * (b[i] - acc)

        dist2 = 0.0
        znorm2 = 0.0
        for j in range(n):
            xv = xnew[j]
            x[j] = xv
            xsum[j] += xv
            dxj = xv - xstar[j]
            dist2 += dxj * dxj
            znorm2 += xv * xv
        for i in range(m):
            ysum[i] += y[i]
            dyi = y[i] - ystar[i]
            dist2 += dyi * dyi
            znorm2 += y[i] * y[i]
        steps = s + 1

        if not (isfinite(dist2) and isfinite(znorm2)):
            return steps, SPAN_NONFINITE, n_sup, n_dist, NAN
        if znorm2 > guard2:
            return steps, SPAN_GUARD, n_sup, n_dist, sqrt(dist2)

        solved = dist2 <= tol2
        if solved or t % stride == 0:
            last_dist = sqrt(dist2)
            dist_iters[n_dist] = t
            dist_vals[n_dist] = last_dist
            n_dist += 1
            changed = False
            for j in range(n):
                bit = 1 if x[j] > 0.0 else 0
                if bit != support[j]:
                    changed = True
                    break
            if changed:
                for j in range(n):
                    bit = 1 if x[j] > 0.0 else 0
                    support[j] = bit
                    sup_pats[n_sup, j] = bit
                sup_iters[n_sup] = t
                n_sup += 1
        if solved:
            return steps, SPAN_SOLVED, n_sup, n_dist, last_dist

    return steps, SPAN_DONE, n_sup, n_dist, last_dist


def jacobi_eigvals(S, int max_sweeps=60):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    A_arr = np.array(S, dtype=np.float64, copy=True, order="C")
    if A_arr.ndim != 2 or A_arr.shape[0] != A_arr.shape[1]:
        raise ValueError("jacobi_eigvals: matrix must be square")
    cdef double[:, ::1] A = A_arr
    cdef Py_ssize_t n = A.shape[0]
    if n == 1:
        return A_arr[0, :1].copy()

    cdef double total = 0.0, off2, apq, theta, tval, cos, sin, tmp_p, tmp_q
    cdef Py_ssize_t p, q, k, sweep
    for p in range(n):
        for q in range(n):
            total += A[p, q] * A[p, q]
    total = sqrt(total)
    if total == 0.0:
        return np.zeros(n)
    cdef double off_target = (1e-14 * total) * (1e-14 * total)

    for sweep in range(max_sweeps):
        off2 = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off2 += A[p, q] * A[p, q]
        if off2 <= off_target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if fabs(theta) > 1e150:
                    tval = 1.0 / (2.0 * theta)
                else:
                    tval = copysign(1.0, theta) / (fabs(theta) + hypot(theta, 1.0))
                cos = 1.0 / sqrt(tval * tval + 1.0)
                sin = tval * cos
                for k in range(n):  # rotate rows p, q
                    tmp_p = A[p, k]
                    tmp_q = A[q, k]
                    A[p, k] = cos * tmp_p - sin * tmp_q
                    A[q, k] = sin * tmp_p + cos * tmp_q
                for k in range(n):  # rotate columns p, q
                    tmp_p = A[k, p]
                    tmp_q = A[k, q]
                    A[k, p] = cos * tmp_p - sin * tmp_q
                    A[k, q] = sin * tmp_p + cos * tmp_q
                A[p, q] = 0.0
                A[q, p] = 0.0

    return np.diagonal(A_arr).copy()
