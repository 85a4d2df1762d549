"""Constructive counterexample artifacts.

Two constructions: a signed measure on basis atoms that lies in any weak
neighborhood of zero cut out by n test functions while its barycenter keeps
unit l1 norm, and the block rescaling schedule (boundaries, scale factors,
seminorm assignment) certifying summable tail masses and scaled tail
integrals for a uniformly integrable family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .measures import PseudometricSpace, SignedMeasure


class ScheduleInfeasibleError(RuntimeError):
    def __init__(self, n: int, horizon: int):
        super().__init__(
            f"tail function {n} does not drop below 4^-{n} within the search horizon {horizon}"
        )
        self.n = n
        self.horizon = horizon


# ---------------------------------------------------------------------------
# Weak-null measures with unit barycenter norm
# ---------------------------------------------------------------------------


def _jacobi_smallest_direction(G: np.ndarray, sweeps: int = 60) -> np.ndarray:
    """Direction of smallest singular value via one-sided Jacobi, fixed sweep order.

    Deterministic by construction (row-major pair order, fixed rotation
    convention), which pins down a canonical null vector even when the null
    space has dimension > 1.
    """
    A = np.array(G, dtype=float)
    m = A.shape[1]
    V = np.eye(m)
    scale = max(1.0, float(np.abs(A).max()))
    tol = 1e-15 * scale * scale
    for _ in range(sweeps):
        rotated = False
        for p in range(m - 1):
            for q in range(p + 1, m):
                app = float(A[:, p] @ A[:, p])
                aqq = float(A[:, q] @ A[:, q])
                apq = float(A[:, p] @ A[:, q])
                if abs(apq) <= tol + 1e-300:
                    continue
                rotated = True
                tau = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Vp = V[:, p].copy()
                Vq = V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
        if not rotated:
            break
    norms = np.sqrt((A * A).sum(axis=0))
    return V[:, int(np.argmin(norms))]


@dataclass(frozen=True)
class L1CounterexampleInstance:
    """Signed measure on n+1 basis atoms annihilating n test functions.

    ``F[i][j]`` holds the i-th test function at the j-th basis atom; ``c`` is
    the normalized annihilating weight vector, so the measure sum_j c_j d_{e_j}
    integrates every test function to zero while its barycenter sum_j c_j e_j
    has l1 norm exactly sum_j |c_j| = 1.
    """

    F: np.ndarray
    c: np.ndarray
    eps: float = 1e-6

    @property
    def n(self) -> int:
        return self.F.shape[0]

    def residuals(self) -> np.ndarray:
        return self.F @ self.c

    def barycenter_coordinates(self) -> np.ndarray:
        return self.c.copy()

    def signed_measure(self) -> SignedMeasure:
        k = len(self.c)
        metric = 2.0 * (1.0 - np.eye(k))
        space = PseudometricSpace(
            points=tuple(f"e{j + 1}" for j in range(k)),
            metrics={"l1": metric},
            anchor=0,
            coords=np.eye(k),
        )
        return space.measure(self.c)


def l1_counterexample(F, eps: float = 1e-6) -> L1CounterexampleInstance:
    """Canonical annihilating measure for an n x (n+1) test-value matrix."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    n, k = F.shape
    if k != n + 1:
        raise ValueError(f"expected an n x (n+1) matrix, got {n} x {k}")
    if not np.all(np.isfinite(F)):
        raise ValueError("matrix entries must be finite")
    scale = float(np.abs(F).max())
    if scale == 0.0:
        c = np.zeros(k)
        c[0] = 1.0
        return L1CounterexampleInstance(F=F, c=c, eps=eps)
    Fs = F / scale
    c = _jacobi_smallest_direction(Fs.T @ Fs)
    for x in c:
        if abs(x) > 1e-12:
            if x < 0:
                c = -c
            break
    c = c / math.fsum(np.abs(c).tolist())
    return L1CounterexampleInstance(F=F, c=c, eps=eps)


def verify_counterexample(inst: L1CounterexampleInstance, eps: float | None = None) -> dict:
    """Check neighborhood membership, normalization and barycenter norm."""
    eps = inst.eps if eps is None else float(eps)
    residuals = inst.residuals()
    max_residual = float(np.abs(residuals).max()) if residuals.size else 0.0
    l1 = math.fsum(np.abs(inst.c).tolist())
    bary_l1 = math.fsum(np.abs(inst.barycenter_coordinates()).tolist())
    checks = {
        "neighborhood_membership": max_residual < eps,
        "normalization": abs(l1 - 1.0) <= 1e-12,
        "barycenter_unit_norm": abs(bary_l1 - 1.0) <= 1e-12,
    }
    return {
        "eps": eps,
        "max_residual": max_residual,
        "weight_l1_norm": l1,
        "barycenter": inst.barycenter_coordinates().tolist(),
        "barycenter_l1_norm": bary_l1,
        "checks": checks,
        "passed": all(checks.values()),
    }


# ---------------------------------------------------------------------------
# Rescaling schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RescalingSchedule:
    """Block boundaries N_n with block-constant scale factors and seminorms.

    Indices k <= N_2 use scale 1 and the first seminorm; indices in
    (N_{n+1}, N_{n+2}] use scale 2^-n and the n-th seminorm.  Boundaries must
    grow faster than 2^n N_n.
    """

    boundaries: tuple[int, ...]  # N_1, N_2, ...
    horizon: int

    @property
    def depth(self) -> int:
        return len(self.boundaries)

    @property
    def max_index(self) -> int:
        return self.boundaries[-1]

    def validate(self) -> list[str]:
        problems = []
        N = self.boundaries
        if any(N[i + 1] <= N[i] for i in range(len(N) - 1)):
            problems.append("boundaries are not strictly increasing")
        for i in range(len(N) - 1):
            if not N[i + 1] > 2 ** (i + 1) * N[i]:
                problems.append(
                    f"boundary {i + 2} violates the doubling constraint: "
                    f"{N[i + 1]} <= 2^{i + 1} * {N[i]}"
                )
        return problems

    def block_of(self, k: int) -> int:
        """Block number n >= 0; block 0 is k <= N_2, block n is (N_{n+1}, N_{n+2}]."""
        if k < 1:
            raise ValueError("indices start at 1")
        if k > self.max_index:
            raise ValueError(f"index {k} beyond the last boundary {self.max_index}")
        N = self.boundaries
        if len(N) < 2 or k <= N[1]:
            return 0
        # N[n] = N_{n+1}; block n covers N[n] < k <= N[n+1]
        n = int(np.searchsorted(np.asarray(N), k, side="left")) - 1
        return n

    def alpha_at(self, k: int) -> float:
        n = self.block_of(k)
        return 2.0 ** (-n)

    def seminorm_index_at(self, k: int) -> int:
        """1-based index of the seminorm used at position k."""
        return max(1, self.block_of(k))

    def blocks(self, ks: np.ndarray) -> np.ndarray:
        """Vectorized ``block_of`` over an index array."""
        N = np.asarray(self.boundaries)
        if np.any(ks < 1) or np.any(ks > self.max_index):
            raise ValueError("index out of schedule coverage")
        out = np.maximum(np.searchsorted(N, ks, side="left") - 1, 0)
        if len(N) >= 2:
            out = np.where(ks <= N[1], 0, out)
        else:
            out = np.zeros_like(out)
        return out


def rescaling_schedule(
    tails: Sequence[Callable[[float], float]],
    horizon: int = 10**5,
) -> RescalingSchedule:
    """Smallest boundaries with T_n(N_n) < 4^-n under the doubling constraint.

    ``tails[n-1]`` is the n-th family tail integral as a nonincreasing
    function of the radius; ``horizon`` bounds the search range above each
    doubling lower bound.
    """
    if not tails:
        raise ValueError("at least one tail function is required")
    boundaries: list[int] = []
    for n, T in enumerate(tails, start=1):
        lower = 1 if n == 1 else 2 ** (n - 1) * boundaries[-1] + 1
        threshold = 4.0 ** (-n)
        found = None
        for m in range(lower, lower + horizon):
            if T(float(m)) < threshold:
                found = m
                break
        if found is None:
            raise ScheduleInfeasibleError(n, horizon)
        boundaries.append(found)
    sched = RescalingSchedule(boundaries=tuple(boundaries), horizon=horizon)
    problems = sched.validate()
    if problems:  # pragma: no cover - construction satisfies the constraints
        raise RuntimeError("; ".join(problems))
    return sched


@dataclass(frozen=True)
class ScheduleCertificate:
    n: int
    tail_mass_sum: float
    tail_mass_bound: float
    scaled_integral_sup: float
    scaled_integral_bound: float

    @property
    def passed(self) -> bool:
        return (
            self.tail_mass_sum <= self.tail_mass_bound + 1e-12
            and self.scaled_integral_sup <= self.scaled_integral_bound + 1e-12
        )


@dataclass(frozen=True)
class ScheduleReport:
    horizon: int
    certificates: tuple[ScheduleCertificate, ...]
    invariant_violations: tuple[str, ...]
    passed: bool


def verify_schedule(
    sched: RescalingSchedule,
    family: Sequence,
    horizon: int | None = None,
    n_max: int | None = None,
) -> ScheduleReport:
    """Certify the block bounds realized by the schedule over a family.

    Family members expose vectorized ``tail_mass(n, thresholds)`` returning
    mu(p_n > t) and ``tail_integral(n, t)`` returning the integral of p_n over
    {p_n > t}.  For each n the certificate checks the summed tail masses
    beyond boundary n against 2^(1-n) and the sup of the scaled tail
    integrals over block n against 2^-n.
    """
    N = sched.boundaries
    if horizon is None:
        horizon = min(sched.horizon, sched.max_index)
    if horizon > sched.max_index:
        raise ValueError(
            f"verification horizon {horizon} exceeds schedule coverage {sched.max_index}"
        )
    if n_max is None:
        n_max = max(1, len(N) - 2)
    violations = tuple(sched.validate())

    ks = np.arange(1, horizon + 1)
    blocks = sched.blocks(ks)
    alphas = 2.0 ** (-blocks.astype(float))
    qidx = np.maximum(blocks, 1)
    thresholds = ks * alphas

    certificates = []
    for n in range(1, n_max + 1):
        if n >= len(N):
            break
        start = N[n]  # sum over k > N_{n+1}
        mask = ks > start
        mass_sum = 0.0
        for member in family:
            per_k = np.zeros(mask.sum())
            sel_q = qidx[mask]
            sel_t = thresholds[mask]
            for s in np.unique(sel_q):
                smask = sel_q == s
                per_k[smask] = member.tail_mass(int(s), sel_t[smask])
            mass_sum = max(mass_sum, float(per_k.sum()))

        sup_scaled = 0.0
        block_lo = N[n]
        block_hi = min(N[n + 1] if n + 1 < len(N) else horizon, horizon)
        bks = np.arange(block_lo + 1, block_hi + 1)
        if len(bks):
            alpha = 2.0 ** (-n)
            for member in family:
                vals = member.tail_integral(n, bks * alpha) / alpha
                sup_scaled = max(sup_scaled, float(np.max(vals)))
        certificates.append(
            ScheduleCertificate(
                n=n,
                tail_mass_sum=mass_sum,
                tail_mass_bound=2.0 ** (1 - n),
                scaled_integral_sup=sup_scaled,
                scaled_integral_bound=2.0 ** (-n),
            )
        )
    passed = not violations and all(c.passed for c in certificates)
    return ScheduleReport(
        horizon=horizon,
        certificates=tuple(certificates),
        invariant_violations=violations,
        passed=passed,
    )


# ---------------------------------------------------------------------------
# Tail families
# ---------------------------------------------------------------------------


class DiscreteTailMember:
    """Measure given by atom weights and per-seminorm atom values."""

    def __init__(self, weights, values):
        self.weights = np.abs(np.asarray(weights, dtype=float))
        self.values = np.atleast_2d(np.asarray(values, dtype=float))
        if self.values.shape[1] != len(self.weights):
            raise ValueError("one value per atom and seminorm is required")

    def _vals(self, n: int) -> np.ndarray:
        if not 1 <= n <= self.values.shape[0]:
            raise ValueError(f"seminorm index {n} out of range")
        return self.values[n - 1]

    def tail_mass(self, n: int, thresholds) -> np.ndarray:
        v = self._vals(n)
        t = np.atleast_1d(np.asarray(thresholds, dtype=float))
        return (self.weights[None, :] * (v[None, :] > t[:, None])).sum(axis=1)

    def tail_integral(self, n: int, thresholds) -> np.ndarray:
        v = self._vals(n)
        t = np.atleast_1d(np.asarray(thresholds, dtype=float))
        return ((self.weights * v)[None, :] * (v[None, :] > t[:, None])).sum(axis=1)


class GeometricTailMember:
    """Closed-form member: weight 2^-j at radius j for every seminorm index.

    Exact tails: mu(p > t) = 2^-floor(t), integral over {p > t} of p equals
    (floor(t) + 2) 2^-floor(t) for t >= 0.
    """

    def tail_mass(self, n: int, thresholds) -> np.ndarray:
        t = np.floor(np.maximum(np.atleast_1d(np.asarray(thresholds, dtype=float)), 0.0))
        return 2.0 ** (-t)

    def tail_integral(self, n: int, thresholds) -> np.ndarray:
        t = np.floor(np.maximum(np.atleast_1d(np.asarray(thresholds, dtype=float)), 0.0))
        return (t + 2.0) * 2.0 ** (-t)


def family_tail_functions(family: Sequence, depth: int) -> list[Callable[[float], float]]:
    """T_n(m) = sup over the family of the n-th tail integral at radius m."""

    def make(n: int) -> Callable[[float], float]:
        def T(m: float) -> float:
            return max(float(member.tail_integral(n, [m])[0]) for member in family)

        return T

    return [make(n) for n in range(1, depth + 1)]
