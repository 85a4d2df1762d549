# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled simplex pivot loop.

Mirrors ``_lpcore_py.pivot_loop`` operation for operation (compiled with
fp-contraction off) so that both kernels return bit-identical tableaus.
"""

import numpy as np

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITERATION_LIMIT = 2


def pivot_loop(double[:, ::1] T, long long[::1] basis, int n_total, double tol, int max_iter):
    cdef int m = T.shape[0] - 1
    cdef int rhs = n_total
    cdef int it, i, j, enter, leave, k
    cdef double a, ratio, best_ratio, piv, f
    cdef long long best_var
    cdef int width = n_total + 1

    for it in range(max_iter):
        enter = -1
        for j in range(n_total):
            if T[m, j] > tol:
                enter = j
                break
        if enter < 0:
            return STATUS_OPTIMAL, it

        leave = -1
        best_ratio = np.inf
        best_var = n_total + 1
        for i in range(m):
            a = T[i, enter]
            if a > tol:
                ratio = T[i, rhs] / a
                if ratio < best_ratio or (ratio == best_ratio and basis[i] < best_var):
                    best_ratio = ratio
                    best_var = basis[i]
                    leave = i
        if leave < 0:
            return STATUS_UNBOUNDED, it

        piv = T[leave, enter]
        for k in range(width):
            T[leave, k] /= piv
        for i in range(m + 1):
            if i == leave:
                continue
            f = T[i, enter]
            if f != 0.0:
                for k in range(width):
                    T[i, k] -= f * T[leave, k]
        for i in range(m + 1):
            T[i, enter] = 0.0
        T[leave, enter] = 1.0
        basis[leave] = enter
    return STATUS_ITERATION_LIMIT, max_iter
