# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loop of the distributed equilibrium-seeking iteration.

Same contract as ``dpnash._pykernel.advance``; see that module for the
argument description.
"""

from libc.math cimport sqrt, fabs

cdef enum:
    RUNNING = 0
    CONVERGED = 1
    DIVERGED = 2


def advance(double[:, ::1] y,
            double[:, ::1] work,
            const long long[::1] nbr_ptr,
            const long long[::1] nbr_idx,
            const double[:, ::1] f,
            const double[::1] target,
            double omega,
            double alpha,
            double tau,
            long long n_steps,
            long long first_stop,
            double[::1] res_sum,
            double[::1] res_fro,
            double limit):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t i, j, c, p
    cdef long long k = 0
    cdef int status = RUNNING
    cdef double g, acc, diff, row_sq, total_sq, rsum, v, worst = 0.0

    with nogil:
        while k < n_steps:
            rsum = 0.0
            total_sq = 0.0
            for i in range(n):
                g = 0.0
                for c in range(n):
                    g = g + f[i, c] * y[i, c]
                g = g - target[i]
                row_sq = 0.0
                for c in range(n):
                    acc = 0.0
                    for p in range(nbr_ptr[i], nbr_ptr[i + 1]):
                        j = nbr_idx[p]
                        acc = acc + (y[i, c] - y[j, c])
                    v = y[i, c] - omega * acc - alpha * f[i, c] * g
                    work[i, c] = v
                    diff = v - y[i, c]
                    row_sq = row_sq + diff * diff
                    # NaN fails both comparisons
                    if not (fabs(v) <= limit):
                        status = DIVERGED
                        if not (fabs(v) <= worst):
                            worst = fabs(v)
                rsum = rsum + sqrt(row_sq)
                total_sq = total_sq + row_sq
            for i in range(n):
                for c in range(n):
                    y[i, c] = work[i, c]
            res_sum[k] = rsum
            res_fro[k] = sqrt(total_sq)
            k = k + 1
            if status == DIVERGED:
                break
            if rsum < tau and k >= first_stop:
                status = CONVERGED
                break
    return k, status, worst
