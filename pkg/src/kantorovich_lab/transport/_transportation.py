"""Transportation simplex for balanced minimum-cost coupling problems.

Classic u/v (MODI) method on the basis tree.  Degeneracy is resolved by an
index-scaled perturbation of the source marginals (compensated on the last
sink), which makes every northwest-corner partial sum strict; the final basis
is then re-flowed against the unperturbed marginals, so reported flows and
costs are exact for the original data.
"""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass

import numpy as np

PERTURBATION = 1e-12
FLOW_TOL = 1e-9


@dataclass(frozen=True)
class TransportSolution:
    flows: np.ndarray  # (r, s), basic cells only are nonzero
    cost: float
    basis: tuple[tuple[int, int], ...]
    u: np.ndarray
    v: np.ndarray
    iterations: int


def _northwest_basis(a: np.ndarray, b: np.ndarray):
    r, s = len(a), len(b)
    rem_a = a.copy()
    rem_b = b.copy()
    basis = []
    flows = {}
    i = j = 0
    while True:
        f = min(rem_a[i], rem_b[j])
        basis.append((i, j))
        flows[(i, j)] = f
        rem_a[i] -= f
        rem_b[j] -= f
        if i == r - 1 and j == s - 1:
            break
        if rem_a[i] <= rem_b[j] and i < r - 1:
            i += 1
        else:
            j += 1
    return basis, flows


def _duals_from_basis(C: np.ndarray, basis, r: int, s: int):
    u = np.full(r, np.nan)
    v = np.full(s, np.nan)
    by_row = defaultdict(list)
    by_col = defaultdict(list)
    for (i, j) in basis:
        by_row[i].append(j)
        by_col[j].append(i)
    u[0] = 0.0
    todo = deque([("r", 0)])
    while todo:
        kind, k = todo.popleft()
        if kind == "r":
            for j in by_row[k]:
                if math.isnan(v[j]):
                    v[j] = C[k, j] - u[k]
                    todo.append(("c", j))
        else:
            for i in by_col[k]:
                if math.isnan(u[i]):
                    u[i] = C[i, k] - v[k]
                    todo.append(("r", i))
    if np.any(np.isnan(u)) or np.any(np.isnan(v)):
        raise RuntimeError("internal error: transportation basis is not a spanning tree")
    return u, v


def _cycle(basis, enter, r: int):
    """Alternating cycle created by the entering cell, as a signed cell list.

    Nodes are rows 0..r-1 and columns r..r+s-1; the basis is a spanning tree,
    so the entering cell closes exactly one cycle.
    """
    adj = defaultdict(list)
    for (i, j) in basis:
        adj[i].append((r + j, (i, j)))
        adj[r + j].append((i, (i, j)))
    start, goal = enter[0], r + enter[1]
    parents = {start: (None, None)}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nxt, cell in adj[node]:
            if nxt not in parents:
                parents[nxt] = (node, cell)
                queue.append(nxt)
    path_cells = []
    node = goal
    while node != start:
        node, cell = parents[node]
        path_cells.append(cell)
    path_cells.reverse()
    # entering cell is +; signs alternate along the path back to the start row
    signed = [(enter, +1)]
    sign = -1
    for cell in reversed(path_cells):
        signed.append((cell, sign))
        sign = -sign
    return signed


def _reflow(basis, a: np.ndarray, b: np.ndarray):
    """Exact tree flows for the original marginals via leaf elimination."""
    r, s = len(a), len(b)
    need = np.concatenate([a, -b])  # node balance: + supply, - demand
    degree = np.zeros(r + s, dtype=int)
    adj = defaultdict(list)
    for (i, j) in basis:
        adj[i].append((r + j, (i, j)))
        adj[r + j].append((i, (i, j)))
        degree[i] += 1
        degree[r + j] += 1
    flows = {}
    leaves = deque(k for k in range(r + s) if degree[k] == 1)
    while leaves:
        node = leaves.popleft()
        nxt = None
        for other, cell in adj[node]:
            if cell not in flows:
                nxt = (other, cell)
                break
        if nxt is None:
            continue
        other, cell = nxt
        # flow orientation: rows ship to columns
        amount = need[node] if node < r else -need[node]
        flows[cell] = amount
        need[node] = 0.0
        need[other] += amount if other >= r else -amount
        # sign bookkeeping: a row leaf pushes its surplus out; a column leaf
        # pulls its deficit in.  Either way the neighbour absorbs it.
        degree[node] -= 1
        degree[other] -= 1
        if degree[other] == 1:
            leaves.append(other)
    return flows


def solve_transportation(a, b, C, max_iter: int | None = None) -> TransportSolution:
    """Balanced problem: min sum f_ij C_ij, row sums = a, column sums = b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    r, s = len(a), len(b)
    if C.shape != (r, s):
        raise ValueError("cost matrix shape mismatch")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("marginals must be nonnegative")
    if abs(math.fsum(a.tolist()) - math.fsum(b.tolist())) > 1e-9 * max(1.0, float(a.sum())):
        raise ValueError("marginals are not balanced")
    if max_iter is None:
        max_iter = 50 * r * s + 1000

    pert = PERTURBATION * (np.arange(r) + 1.0)
    a2 = a + pert
    b2 = b.copy()
    b2[-1] += math.fsum(a2.tolist()) - math.fsum(b2.tolist())

    basis, flows = _northwest_basis(a2, b2)
    it = 0
    for it in range(1, max_iter + 1):
        u, v = _duals_from_basis(C, basis, r, s)
        rc = C - u[:, None] - v[None, :]
        for (i, j) in basis:
            rc[i, j] = 0.0
        enter_flat = int(np.argmin(rc))
        ei, ej = divmod(enter_flat, s)
        if rc[ei, ej] >= -FLOW_TOL * max(1.0, float(np.abs(C).max())):
            break
        signed = _cycle(basis, (ei, ej), r)
        minus_cells = [cell for cell, sg in signed if sg < 0]
        theta = min(flows[cell] for cell in minus_cells)
        leave = next(cell for cell in minus_cells if flows[cell] == theta)
        for cell, sg in signed:
            if cell == (ei, ej):
                flows[cell] = theta
            else:
                flows[cell] += sg * theta
        basis.remove(leave)
        del flows[leave]
        basis.append((ei, ej))
    else:
        raise RuntimeError("internal error: transportation simplex iteration limit")

    exact = _reflow(basis, a, b)
    out = np.zeros((r, s))
    neg = 0.0
    for (i, j), f in exact.items():
        if f < 0:
            neg = min(neg, f)
            f = 0.0
        out[i, j] = f
    if neg < -FLOW_TOL:
        raise RuntimeError(f"internal error: negative basic flow {neg}")
    cost = math.fsum(out[i, j] * C[i, j] for (i, j) in exact)
    u, v = _duals_from_basis(C, basis, r, s)
    return TransportSolution(out, cost, tuple(sorted(basis)), u, v, it)


# ---------------------------------------------------------------------------
# Flow-route seminorm values.  The bounded-Lipschitz and anchored-Lipschitz
# suprema equal balanced transportation optima on an augmented node set: a
# slack location at unit distance from everything (bounded mode) or the
# anchor itself (anchored mode) absorbs the surplus of either sign.
# ---------------------------------------------------------------------------


def flow_seminorm_value(d: np.ndarray, weights: np.ndarray, mode: str, anchor: int = 0) -> float:
    w = np.asarray(weights, dtype=float)
    pos = np.flatnonzero(w > 0)
    neg = np.flatnonzero(w < 0)
    a_mass = math.fsum(w[pos].tolist())
    b_mass = math.fsum((-w[neg]).tolist())
    if mode == "bounded":
        if len(pos) + len(neg) == 0:
            return 0.0
        C = np.ones((len(pos) + 1, len(neg) + 1))
        C[:len(pos), :len(neg)] = d[np.ix_(pos, neg)]
        C[-1, -1] = 0.0
        a = np.concatenate([w[pos], [b_mass]])
        b = np.concatenate([-w[neg], [a_mass]])
        return solve_transportation(a, b, C).cost
    if mode == "anchored":
        if len(pos) + len(neg) == 0:
            return 0.0
        rows = np.concatenate([pos, [anchor]]).astype(int)
        cols = np.concatenate([neg, [anchor]]).astype(int)
        C = d[np.ix_(rows, cols)]
        a = np.concatenate([w[pos], [b_mass]])
        b = np.concatenate([-w[neg], [a_mass]])
        return solve_transportation(a, b, C).cost
    raise ValueError(f"unknown mode {mode!r}")
