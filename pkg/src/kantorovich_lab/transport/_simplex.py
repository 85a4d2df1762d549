"""Dense-tableau primal simplex for small maximization LPs.

Solves ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0`` (slack basis is
feasible, so no phase 1).  Bland's rule guarantees finite termination on the
degenerate instances produced by pseudometrics.  The pivot loop lives in a
compiled kernel when available, with a numpy fallback selected at import.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _lpcore_py

try:  # pragma: no cover - exercised only when the extension is built
    from . import _lpcore as _compiled
    HAVE_COMPILED_KERNEL = True
except ImportError:  # pragma: no cover
    _compiled = None
    HAVE_COMPILED_KERNEL = False

_default_kernel = _compiled.pivot_loop if HAVE_COMPILED_KERNEL else _lpcore_py.pivot_loop

PIVOT_TOL = 1e-9


def kernel_backend() -> str:
    return "compiled" if HAVE_COMPILED_KERNEL else "python"


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    value: float
    iterations: int


def simplex_max(A, b, c, tol: float = PIVOT_TOL, max_iter: int = 200_000, kernel=None) -> SimplexResult:
    A = np.ascontiguousarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if b.shape != (m,) or c.shape != (n,):
        raise ValueError("inconsistent LP dimensions")
    if np.any(b < -1e-9):
        raise ValueError("RHS must be nonnegative for the slack starting basis")
    # sub-tolerance dust from validated triangle inequalities
    b = np.maximum(b, 0.0)

    n_total = n + m
    T = np.zeros((m + 1, n_total + 1))
    T[:m, :n] = A
    T[:m, n:n_total] = np.eye(m)
    T[:m, n_total] = b
    T[m, :n] = c
    basis = np.arange(n, n_total, dtype=np.int64)

    run = kernel if kernel is not None else _default_kernel
    status, iters = run(T, basis, n_total, tol, max_iter)
    if status == _lpcore_py.STATUS_UNBOUNDED:
        raise RuntimeError("internal error: LP unbounded")
    if status == _lpcore_py.STATUS_ITERATION_LIMIT:
        raise RuntimeError(f"internal error: simplex did not terminate in {max_iter} pivots")

    x = np.zeros(n_total)
    x[basis] = T[:m, n_total]
    return SimplexResult(x=x[:n], value=-T[m, n_total], iterations=iters)
