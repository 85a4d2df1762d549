import math

import numpy as np
import pytest

from kantorovich_lab.measures import PseudometricSpace, total_variation
from kantorovich_lab.measures import pushforward, quotient
from kantorovich_lab.transport import (
    HAVE_COMPILED_KERNEL,
    brute_force_dual,
    k_norm,
    kq_norm,
    kr_norm,
    wasserstein_q,
)
from kantorovich_lab.transport._simplex import simplex_max
from kantorovich_lab.transport._transportation import flow_seminorm_value, solve_transportation
from kantorovich_lab.transport._trees import bipartite_tree_tensors

from conftest import metric_closure, random_degenerate_space, random_space, two_point_space


def random_signed(rng, space, zero_frac=0.2, scale=2.0):
    w = rng.uniform(-scale, scale, size=space.n_points)
    w[rng.random(space.n_points) < zero_frac] = 0.0
    return space.measure(w)


class TestKrNorm:
    def test_dirac_is_one(self, rng):
        for n in (1, 3, 6):
            space = random_space(rng, n)
            value, witness = kr_norm(space.dirac(0), "d")
            assert value == pytest.approx(1.0, abs=1e-12)
            witness.validate(space.dirac(0))

    def test_two_point_min_of_d_and_two(self):
        for d, expected in [(3.0, 2.0), (0.5, 0.5), (2.0, 2.0)]:
            mu = two_point_space(d).measure([1.0, -1.0])
            value, witness = kr_norm(mu, "d")
            assert value == pytest.approx(expected, abs=1e-12)
            witness.validate(mu)

    def test_zero_measure(self):
        mu = two_point_space(1.0).measure([0.0, 0.0])
        assert kr_norm(mu, "d")[0] == 0.0

    def test_tv_domination_and_equality_far_apart(self, rng):
        space = random_space(rng, 5, lo=2.0, hi=6.0)
        for _ in range(20):
            mu = random_signed(rng, space)
            value, _ = kr_norm(mu, "d")
            tv = total_variation(mu)
            assert value <= tv + 1e-9
            assert value == pytest.approx(tv, abs=1e-9)  # all distances >= 2

    def test_metric_monotonicity(self, rng):
        for _ in range(20):
            space1 = random_space(rng, 5)
            d2 = metric_closure(space1.metric("d") * rng.uniform(0.2, 1.0))
            space2 = PseudometricSpace(
                points=space1.points, metrics={"d": d2}, anchor=space1.anchor
            )
            w = rng.uniform(-2, 2, size=5)
            v_small = kr_norm(space2.measure(w), "d")[0]
            v_big = kr_norm(space1.measure(w), "d")[0]
            assert v_small <= v_big + 1e-9


class TestKNorm:
    def test_dirac_at_anchor(self, rng):
        space = random_space(rng, 4, anchor=2)
        value, witness = k_norm(space.dirac(2), "d")
        assert value == pytest.approx(1.0, abs=1e-12)
        witness.validate(space.dirac(2))

    def test_two_point_anchored(self):
        mu = two_point_space(3.0, anchor=0).measure([1.0, -1.0])
        value, witness = k_norm(mu, "d")
        assert value == pytest.approx(3.0, abs=1e-12)
        witness.validate(mu)
        assert witness.values[0] == 0.0

    def test_positive_homogeneity(self, rng):
        space = random_space(rng, 5)
        mu = random_signed(rng, space)
        assert k_norm(2 * mu, "d")[0] == pytest.approx(2 * k_norm(mu, "d")[0], abs=1e-9)


class TestWassersteinQ:
    def test_identical_measures(self, rng):
        space = random_space(rng, 5)
        w = rng.random(5)
        mu = space.measure(w)
        for q in (1.0, 2.0):
            value, coupling = wasserstein_q(mu, mu, "d", q)
            assert value == pytest.approx(0.0, abs=1e-12)
            coupling.validate(mu, mu)

    def test_two_diracs_any_q(self):
        space = two_point_space(1.7)
        mu, nu = space.dirac(0), space.dirac(1)
        for q in (1.0, 1.5, 2.0, 3.5):
            value, _ = wasserstein_q(mu, nu, "d", q)
            assert value == pytest.approx(1.7, abs=1e-12)

    def test_half_half_versus_point(self):
        space = two_point_space(2.0)
        mu = space.measure([0.5, 0.5])
        nu = space.measure([1.0, 0.0])
        value, coupling = wasserstein_q(mu, nu, "d", 2.0)
        assert value == pytest.approx(math.sqrt(2.0), abs=1e-12)
        coupling.validate(mu, nu)

    def test_rejections(self):
        space = two_point_space(1.0)
        with pytest.raises(ValueError, match="q must be"):
            wasserstein_q(space.dirac(0), space.dirac(1), "d", 0.5)
        with pytest.raises(ValueError, match="nonnegative"):
            wasserstein_q(space.measure([1.0, -0.5]), space.measure([0.5, 0.0]), "d", 1.0)
        with pytest.raises(ValueError, match="masses differ"):
            wasserstein_q(space.dirac(0), space.measure([0.5, 0.51]), "d", 1.0)
        with pytest.raises(ValueError, match="positive"):
            wasserstein_q(space.measure([0.0, 0.0]), space.measure([0.0, 0.0]), "d", 1.0)

    def test_moment_monotonicity(self, rng):
        for _ in range(20):
            space = random_space(rng, 6)
            a = rng.random(6)
            a /= a.sum()
            b = rng.random(6)
            b /= b.sum()
            mu, nu = space.measure(a), space.measure(b)
            values = [wasserstein_q(mu, nu, "d", q)[0] for q in (1.0, 1.5, 2.0, 3.0)]
            assert all(values[i] <= values[i + 1] + 1e-9 for i in range(len(values) - 1))

    def test_duality_q1(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 9))
            space = random_space(rng, n)
            a = rng.random(n)
            a /= a.sum()
            b = rng.random(n)
            b /= b.sum()
            mu, nu = space.measure(a), space.measure(b)
            w1 = wasserstein_q(mu, nu, "d", 1.0)[0]
            kd = k_norm(mu - nu, "d")[0]
            assert w1 == pytest.approx(kd, abs=1e-9)


class TestKqNorm:
    def test_dirac_at_anchor(self, rng):
        space = random_space(rng, 4, anchor=1)
        for q in (1.0, 2.0, 3.0):
            assert kq_norm(space.dirac(1), "d", q) == pytest.approx(1.0, abs=1e-12)

    def test_reweighted_dirac(self):
        space = two_point_space(2.0, anchor=0)
        assert kq_norm(space.dirac(1), "d", 2.0) == pytest.approx(5.0, abs=1e-12)

    def test_zero_measure(self):
        space = two_point_space(2.0)
        assert kq_norm(space.measure([0.0, 0.0]), "d", 1.5) == 0.0

    def test_matches_reweighted_kr(self, rng):
        for _ in range(20):
            space = random_space(rng, 6)
            mu = random_signed(rng, space)
            q = float(rng.uniform(1.0, 3.0))
            dens = 1.0 + space.anchor_distances("d") ** q
            reweighted = space.measure(mu.weights * dens)
            assert kq_norm(mu, "d", q) == pytest.approx(kr_norm(reweighted, "d")[0], abs=1e-9)

    def test_flow_route_agrees_with_dense(self, rng):
        # supports above the cutoff exercise the transportation route
        space = random_space(rng, 40)
        mu = space.measure(rng.uniform(-1, 1, size=40))
        via_flow = kq_norm(mu, "d", 1.0)
        dens = 1.0 + space.anchor_distances("d")
        via_dense = kr_norm(space.measure(mu.weights * dens), "d")[0]
        assert via_flow == pytest.approx(via_dense, abs=1e-9)

    def test_q_below_one_rejected(self):
        space = two_point_space(1.0)
        with pytest.raises(ValueError, match="q must be"):
            kq_norm(space.dirac(0), "d", 0.5)


class TestOracle:
    def test_matches_lp_on_two_points(self):
        for d in (0.5, 1.0, 3.0):
            mu = two_point_space(d).measure([1.0, -1.0])
            assert brute_force_dual(mu, "d", "bounded") == pytest.approx(
                kr_norm(mu, "d")[0], abs=1e-12
            )
            assert brute_force_dual(mu, "d", "anchored") == pytest.approx(
                k_norm(mu, "d")[0], abs=1e-12
            )

    def test_dirac(self, rng):
        space = random_space(rng, 3)
        assert brute_force_dual(space.dirac(0), "d", "bounded") == pytest.approx(1.0, abs=1e-12)

    def test_random_five_atoms(self, rng):
        for _ in range(50):
            space = random_space(rng, 5)
            mu = random_signed(rng, space, zero_frac=0.0)
            assert brute_force_dual(mu, "d", "bounded") == pytest.approx(
                kr_norm(mu, "d")[0], abs=1e-6
            )
            assert brute_force_dual(mu, "d", "anchored") == pytest.approx(
                k_norm(mu, "d")[0], abs=1e-6
            )

    def test_support_cap(self, rng):
        space = random_space(rng, 9)
        mu = space.measure(np.ones(9))
        with pytest.raises(ValueError, match="at most 8"):
            brute_force_dual(mu, "d", "bounded")

    def test_unknown_mode(self):
        mu = two_point_space(1.0).dirac(0)
        with pytest.raises(ValueError, match="unknown mode"):
            brute_force_dual(mu, "d", "primal")


class TestQuotientIsometry:
    def test_random_degenerate_instances(self, rng):
        for _ in range(50):
            k = int(rng.integers(2, 5))
            n = int(rng.integers(k, 9))
            space, _ = random_degenerate_space(rng, k, n)
            mu = space.measure(rng.uniform(-2, 2, size=n))
            qm = quotient(space, "p")
            pushed = pushforward(mu, qm)
            assert kr_norm(pushed, "p")[0] == pytest.approx(kr_norm(mu, "p")[0], abs=1e-9)


class TestWitnesses:
    def test_witnesses_and_extension_on_sparse_support(self, rng):
        # zero-weight points force the extension step to cover the full space
        for _ in range(30):
            space = random_space(rng, 7)
            mu = random_signed(rng, space, zero_frac=0.5)
            value, witness = kr_norm(mu, "d")
            witness.validate(mu)
            assert witness.mode == "bounded"
            vk, wk = k_norm(mu, "d")
            wk.validate(mu)
            assert wk.values[space.anchor] == 0.0

    def test_coupling_invariants(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 7))
            space = random_space(rng, n)
            a = rng.random(n)
            a /= a.sum()
            b = rng.random(n)
            b /= b.sum()
            mu, nu = space.measure(a), space.measure(b)
            _, coupling = wasserstein_q(mu, nu, "d", float(rng.uniform(1, 3)))
            coupling.validate(mu, nu)


class TestSolvers:
    def test_simplex_known_lp(self):
        # max x + y st x + 2y <= 4, 3x + y <= 6 -> (8/5, 6/5), value 14/5
        res = simplex_max(np.array([[1.0, 2.0], [3.0, 1.0]]), [4.0, 6.0], [1.0, 1.0])
        assert res.value == pytest.approx(2.8, abs=1e-12)
        assert np.allclose(res.x, [1.6, 1.2], atol=1e-12)

    def test_kernels_bit_identical(self, rng):
        if not HAVE_COMPILED_KERNEL:
            pytest.skip("compiled kernel not built")
        from kantorovich_lab.transport import _lpcore, _lpcore_py

        for _ in range(25):
            m, n = int(rng.integers(2, 12)), int(rng.integers(2, 8))
            A = rng.uniform(-1, 2, size=(m, n))
            b = rng.uniform(0.1, 3, size=m)
            c = rng.uniform(-1, 1, size=n)
            r1 = simplex_max(A, b, c, kernel=_lpcore.pivot_loop)
            r2 = simplex_max(A, b, c, kernel=_lpcore_py.pivot_loop)
            assert r1.value == r2.value  # bitwise
            assert np.array_equal(r1.x, r2.x)

    def test_transportation_balanced(self, rng):
        for _ in range(20):
            r, s = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            a = rng.random(r) + 0.1
            b = rng.random(s) + 0.1
            b *= a.sum() / b.sum()
            C = rng.uniform(0, 3, size=(r, s))
            sol = solve_transportation(a, b, C)
            assert np.abs(sol.flows.sum(axis=1) - a).max() < 1e-9
            assert np.abs(sol.flows.sum(axis=0) - b).max() < 1e-9
            assert sol.flows.min() >= 0.0

    def test_tree_counts_match_formula(self):
        for r, s in [(1, 1), (2, 2), (2, 3), (3, 3), (4, 4), (5, 2)]:
            eu, _, _ = bipartite_tree_tensors(r, s)
            assert eu.shape[0] == r ** (s - 1) * s ** (r - 1)

    def test_flow_seminorm_matches_dense(self, rng):
        for _ in range(30):
            n = int(rng.integers(2, 9))
            space = random_space(rng, n)
            mu = random_signed(rng, space)
            d = space.metric("d")
            assert flow_seminorm_value(d, mu.weights, "bounded") == pytest.approx(
                kr_norm(mu, "d")[0], abs=1e-9
            )
            anchored = flow_seminorm_value(d, mu.weights, "anchored", anchor=space.anchor)
            assert anchored + abs(mu.total_mass) == pytest.approx(k_norm(mu, "d")[0], abs=1e-9)


class TestScaleRobustness:
    def test_tiny_and_huge_scales(self):
        # mass scales spanning 1e-30 .. 1e6 with distances up to 2^40
        pts = np.array([0.0, 2.0**40])
        metric = np.abs(pts[:, None] - pts[None, :])
        space = PseudometricSpace(points=("x0", "far"), metrics={"d": metric}, anchor=0)
        for mass in (1e-30, 1e-9, 1.0, 1e6):
            mu = space.measure([0.0, mass])
            assert k_norm(mu, "d")[0] == pytest.approx(mass * 2.0**40 + mass, rel=1e-12)
            assert kr_norm(mu, "d")[0] == pytest.approx(mass, rel=1e-12)
