"""Pure-numpy simplex pivot loop.

Fallback for the compiled kernel in ``_lpcore.pyx``; both must perform the
same floating-point operations in the same order so that results are
bit-identical whichever is loaded.
"""

from __future__ import annotations

import numpy as np

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITERATION_LIMIT = 2


def pivot_loop(T: np.ndarray, basis: np.ndarray, n_total: int, tol: float, max_iter: int):
    """Run Bland-rule pivots in place on a dense tableau.

    ``T`` has one row per constraint plus a final reduced-cost row and one
    trailing RHS column; ``basis[i]`` is the variable occupying row ``i``.
    Returns ``(status, iterations)``.
    """
    m = T.shape[0] - 1
    rhs = n_total
    obj = T[m]
    for it in range(max_iter):
        # Bland: entering variable = smallest index with positive reduced cost
        enter = -1
        for j in range(n_total):
            if obj[j] > tol:
                enter = j
                break
        if enter < 0:
            return STATUS_OPTIMAL, it

        col = T[:m, enter]
        leave = -1
        best_ratio = np.inf
        best_var = n_total + 1
        for i in range(m):
            a = col[i]
            if a > tol:
                ratio = T[i, rhs] / a
                if ratio < best_ratio or (ratio == best_ratio and basis[i] < best_var):
                    best_ratio = ratio
                    best_var = basis[i]
                    leave = i
        if leave < 0:
            return STATUS_UNBOUNDED, it

        piv = T[leave, enter]
        T[leave, :] /= piv
        factors = T[:, enter].copy()
        factors[leave] = 0.0
        T -= factors[:, None] * T[leave, :][None, :]
        T[:, enter] = 0.0
        T[leave, enter] = 1.0
        basis[leave] = enter
    return STATUS_ITERATION_LIMIT, max_iter
