"""Server cost, candidate rewards, iteration count and the complete-information optimum."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_population

from aigc_incentive import complete as cmp
from aigc_incentive.core import ClientAttributes, LearningParams, QualityModel, ServerParams
from aigc_incentive.errors import AssumptionError, EmptyCohortError


def straight_line_cost(population, q, lp, sp, T, r):
    """Independent recomputation: per-client loops, no helpers from the package."""
    lam, theta = q.lambda_max, q.g_diff / (2 * q.g_data)
    delta = q.s_ai / (2 * q.g_data)
    zeta3 = lam * delta / (1 - theta)
    joined = []
    for c in population:
        z1 = math.inf if c.quality >= lam else lam * c.unit_cost / (lam - c.quality)
        z2 = (lam * c.unit_cost + lam * delta * c.quality) / (lam - theta * c.quality)
        if z1 <= zeta3:
            choice = "A" if r >= zeta3 else ("L" if r >= z1 else None)
        else:
            choice = "A" if r >= z2 else None
        if choice:
            joined.append((c, theta * c.quality if choice == "A" else c.quality))
    phi = 1 - 2 * lp.mu * lp.eta + 2 * lp.mu * lp.rho * lp.eta ** 2
    kappa1 = lp.beta * ((lp.eta * lp.rho + 1) ** lp.h - 1) / (lp.rho * (1 - phi ** lp.h))
    a = phi ** (lp.h * T)
    if not joined:
        return sp.gamma1 * (a * lp.theta_gap + (1 - a) * kappa1 * sp.omega)
    dn = sum(c.datasize for c, _ in joined)
    bracket = (sum(lp.psi * math.sqrt(c.datasize) for c, _ in joined) / (math.sqrt(lp.h) * dn)
               + sum(c.datasize * le for c, le in joined) / dn)
    pay = sum(r * c.datasize * (1 - le / lam) for c, le in joined)
    return sp.gamma1 * (a * lp.theta_gap + (1 - a) * kappa1 * bracket) + sp.gamma2 * T * pay


class TestCohort:
    def test_zero_reward(self, mnist_q, two_clients):
        assert cmp.cohort_from_reward(two_clients, mnist_q, 0.0).is_empty()

    def test_examples(self, mnist_q, two_clients):
        c = cmp.cohort_from_reward(two_clients, mnist_q, 0.3)
        assert c.local_set == {0} and c.aigc_set == frozenset()
        c = cmp.cohort_from_reward(two_clients, mnist_q, 0.7)
        assert c.local_set == frozenset() and c.aigc_set == {0, 1}

    def test_disjoint(self):
        with pytest.raises(Exception):
            cmp.Cohort({0}, {0})


class TestGradientError:
    def lp(self, psi=1e-12):
        return LearningParams(0.01, 37.36, 5.48, 0.57, psi, 5, 10.0)

    def test_single_client(self, mnist_q):
        pop = [ClientAttributes(50, 1.2, 0.01)]
        np.testing.assert_allclose(cmp.gradient_error(cmp.Cohort({0}), pop, mnist_q, self.lp()),
                                   1.2, atol=1e-9)

    def test_equal_weights(self, mnist_q):
        pop = [ClientAttributes(50, 1.0, 0.01), ClientAttributes(50, 3.0, 0.01)]
        np.testing.assert_allclose(cmp.gradient_error(cmp.Cohort({0, 1}), pop, mnist_q, self.lp()),
                                   2.0, atol=1e-9)

    def test_mixed_cohort(self):
        q = QualityModel(3.0, 1.0, 0.5, 0.1)  # theta = 0.25
        pop = [ClientAttributes(50, 1.0, 0.01), ClientAttributes(50, 2.0, 0.01)]
        np.testing.assert_allclose(cmp.gradient_error(cmp.Cohort({0}, {1}), pop, q, self.lp()),
                                   0.75, atol=1e-9)

    def test_sampling_term(self, mnist_q):
        # B = d/h = 10, so psi / sqrt(B) = 2 / sqrt(10)
        pop = [ClientAttributes(50, 1.0, 0.01)]
        np.testing.assert_allclose(cmp.gradient_error(cmp.Cohort({0}), pop, mnist_q, self.lp(2.0)),
                                   1.0 + 2 / math.sqrt(10))

    def test_empty(self, mnist_q):
        with pytest.raises(EmptyCohortError):
            cmp.gradient_error(cmp.Cohort(), [], mnist_q, self.lp())


class TestMLoss:
    def test_T_zero_gives_theta(self, mnist_q, mnist_lp, two_clients):
        c = cmp.cohort_from_reward(two_clients, mnist_q, 0.3)
        assert cmp.m_loss(c, two_clients, mnist_q, mnist_lp, 0) == mnist_lp.theta_gap

    def test_large_T_limit(self, mnist_q, mnist_lp, two_clients):
        c = cmp.cohort_from_reward(two_clients, mnist_q, 0.7)
        bracket = cmp.quality_bracket(c, two_clients, mnist_q, mnist_lp)
        np.testing.assert_allclose(cmp.m_loss(c, two_clients, mnist_q, mnist_lp, 10 ** 6),
                                   mnist_lp.kappa1 * bracket, atol=1e-9)

    def test_plug_in(self, mnist_q, mnist_lp, two_clients):
        c = cmp.cohort_from_reward(two_clients, mnist_q, 0.3)
        # one local client, d = 100, lambda = 1.5
        bracket = 25 * math.sqrt(100) / (math.sqrt(5) * 100) + 1.5
        a = mnist_lp.phi ** 50
        expected = a * mnist_lp.theta_gap + (1 - a) * mnist_lp.kappa1 * bracket
        np.testing.assert_allclose(cmp.m_loss(c, two_clients, mnist_q, mnist_lp, 10), expected,
                                   rtol=1e-12)

    @given(st.integers(0, 400))
    @settings(max_examples=50, deadline=None)
    def test_bounded(self, T):
        q = QualityModel(3.0, 2.45, 1.05, 0.8)
        lp = LearningParams(0.01, 37.36, 5.48, 0.57, 25.0, 5, 6.0)
        pop = [ClientAttributes(100, 1.5, 0.05), ClientAttributes(100, 2.9, 0.05)]
        c = cmp.cohort_from_reward(pop, q, 0.7)
        low = lp.kappa1 * cmp.quality_bracket(c, pop, q, lp)
        assert low - 1e-12 <= cmp.m_loss(c, pop, q, lp, T) <= lp.theta_gap + 1e-12


class TestPayment:
    def test_empty(self, mnist_q):
        assert cmp.round_payment(cmp.Cohort(), [], mnist_q, 1.0) == 0.0

    def test_local(self, mnist_q, two_clients):
        np.testing.assert_allclose(cmp.round_payment(cmp.Cohort({0}), two_clients, mnist_q, 0.3),
                                   15.0)

    def test_aigc(self, mnist_q, two_clients):
        np.testing.assert_allclose(cmp.round_payment(cmp.Cohort((), {0}), two_clients, mnist_q, 0.7),
                                   70 * (1 - mnist_q.theta * 0.5))

    @given(st.floats(0.0, 5.0), st.floats(0.0, 5.0))
    def test_linear_in_reward(self, r1, r2):
        q = QualityModel(3.0, 2.45, 1.05, 0.8)
        pop = [ClientAttributes(100, 1.5, 0.05), ClientAttributes(70, 2.9, 0.05)]
        c = cmp.Cohort({0}, {1})
        total = cmp.round_payment(c, pop, q, r1 + r2)
        assert total >= 0
        assert total == pytest.approx(cmp.round_payment(c, pop, q, r1)
                                      + cmp.round_payment(c, pop, q, r2), rel=1e-12, abs=1e-12)


class TestServerCost:
    def test_empty_cohort_policy(self, mnist_q, mnist_lp, ref_sp, two_clients):
        cost = cmp.server_cost(cmp.ServerStrategy(1, 1e-6), two_clients, mnist_q, mnist_lp, ref_sp)
        a = mnist_lp.phi_h
        expected = ref_sp.gamma1 * (a * mnist_lp.theta_gap
                                       + (1 - a) * mnist_lp.kappa1 * ref_sp.omega)
        np.testing.assert_allclose(cost.total, expected, rtol=1e-12)
        assert cost.r_total == 0.0

    @pytest.mark.parametrize("r", [0.3, 0.7, 2.0])
    def test_matches_recomputation(self, mnist_q, mnist_lp, ref_sp, two_clients, r):
        cost = cmp.server_cost(cmp.ServerStrategy(10, r), two_clients, mnist_q, mnist_lp, ref_sp)
        np.testing.assert_allclose(cost.total, straight_line_cost(two_clients, mnist_q, mnist_lp,
                                                                  ref_sp, 10, r), rtol=1e-9)
        np.testing.assert_allclose(cost.total, ref_sp.gamma1 * cost.m_loss
                                   + ref_sp.gamma2 * cost.r_total, rtol=1e-12)

    def test_gamma2_zero(self, mnist_q, mnist_lp, two_clients):
        sp = ServerParams(5.0, 0.0)
        cost = cmp.server_cost(cmp.ServerStrategy(3, 0.7), two_clients, mnist_q, mnist_lp, sp)
        assert cost.total == 5.0 * cost.m_loss

    def test_strategy_needs_positive_T(self):
        with pytest.raises(Exception):
            cmp.ServerStrategy(0, 0.1)


class TestCandidates:
    def test_single_client(self, mnist_q):
        got = cmp.candidate_rewards([ClientAttributes(100, 1.5, 0.05)], mnist_q)
        ind = [0.1, 0.330286, mnist_q.zeta3]
        np.testing.assert_allclose(got, ind, atol=1e-6)

    def test_two_clients(self, mnist_q, two_clients):
        got = cmp.candidate_rewards(two_clients, mnist_q)
        np.testing.assert_allclose(got, [0.1, 0.330286, 0.62337, 0.66024, 1.5], atol=1e-5)

    def test_dedup(self, mnist_q):
        c = ClientAttributes(100, 1.5, 0.05)
        assert cmp.candidate_rewards([c, c], mnist_q) == cmp.candidate_rewards([c], mnist_q)

    def test_drops_infinite(self, mnist_q):
        got = cmp.candidate_rewards([ClientAttributes(100, 3.0, 0.05)], mnist_q)
        assert all(math.isfinite(x) for x in got) and len(got) == 2

    def test_size_bound(self, mnist_q, rng):
        pop = random_population(rng, 25)
        assert len(cmp.candidate_rewards(pop, mnist_q)) <= 2 * 25 + 1

    def test_left_candidate_dominates(self, mnist_q, mnist_lp, ref_sp, rng):
        # cost at any reward is no lower than at the largest candidate below it
        pop = random_population(rng, 10)
        cands = cmp.candidate_rewards(pop, mnist_q)
        for r in rng.uniform(cands[0], cands[-1] * 1.2, size=200):
            left = max(c for c in cands if c <= r)
            for T in (1, 7, 40):
                here = cmp.server_cost(cmp.ServerStrategy(T, r), pop, mnist_q, mnist_lp, ref_sp)
                there = cmp.server_cost(cmp.ServerStrategy(T, left), pop, mnist_q, mnist_lp,
                                        ref_sp)
                assert here.total >= there.total * (1 - 1e-12)


class TestOptimalIterations:
    def test_exhaustive_two_clients(self, mnist_q, mnist_lp, ref_sp, two_clients):
        Ts = np.arange(1, 501)
        costs = [cmp.server_cost(cmp.ServerStrategy(int(T), 0.3), two_clients, mnist_q, mnist_lp,
                                 ref_sp).total for T in Ts]
        sp = ServerParams(ref_sp.gamma1, ref_sp.gamma2, max_T=500)
        assert cmp.optimal_iterations(0.3, two_clients, mnist_q, mnist_lp, sp) == \
            int(Ts[np.argmin(costs)])

    def test_free_iterations_hit_cap(self, mnist_q, mnist_lp, two_clients):
        sp = ServerParams(8e4, 0.0, max_T=321)
        assert cmp.optimal_iterations(0.3, two_clients, mnist_q, mnist_lp, sp) == 321

    def test_cost_decreasing_without_payment_weight(self, mnist_lp):
        curve = cmp.cost_curve(np.arange(1, 200), 1.0, 10.0, mnist_lp, ServerParams(1.0, 0.0))
        assert np.all(np.diff(curve) <= 0)
        assert np.all(np.diff(curve[:50]) < 0)

    def test_larger_payment_fewer_iterations(self, mnist_lp, ref_sp):
        t1 = cmp.continuous_optimal_iterations(1.0, 10.0, mnist_lp, ref_sp)
        t2 = cmp.continuous_optimal_iterations(1.0, 20.0, mnist_lp, ref_sp)
        assert t2 < t1

    def test_assumption_violation(self, mnist_lp, ref_sp):
        with pytest.raises(AssumptionError):
            cmp.continuous_optimal_iterations(mnist_lp.theta_gap / mnist_lp.kappa1 * 1.01, 1.0,
                                              mnist_lp, ref_sp)

    def test_empty_cohort(self, mnist_q, mnist_lp, ref_sp, two_clients):
        with pytest.raises(EmptyCohortError):
            cmp.optimal_iterations(0.01, two_clients, mnist_q, mnist_lp, ref_sp)

    def test_expensive_payment_gives_one(self, mnist_lp):
        assert cmp.integer_optimal_iterations(1.0, 1e9, mnist_lp, ServerParams(1.0, 1.0)) == 1

    @given(st.floats(0.01, 5.0), st.floats(0.1, 1e4), st.floats(1e2, 1e6), st.floats(1e-3, 10))
    @settings(max_examples=100, deadline=None)
    def test_unimodal_in_T(self, bracket, payment, g1, g2):
        lp = LearningParams(0.01, 37.36, 5.48, 0.57, 25.0, 5, 100.0)
        curve = cmp.cost_curve(np.arange(1, 300), bracket, payment, lp, ServerParams(g1, g2))
        second = np.diff(curve, 2)
        assert np.all(second >= -1e-9 * np.abs(curve[1:-1]))


class TestAlgorithm1:
    def test_single_client_uses_indicator(self, mnist_q, mnist_lp, ref_sp):
        c = ClientAttributes(100, 1.5, 0.05)
        strategy, _ = cmp.algorithm1([c], mnist_q, mnist_lp, ref_sp)
        assert any(math.isclose(strategy.reward, z) for z in cmp.candidate_rewards([c], mnist_q))

    def test_beats_dense_grid(self, mnist_q, mnist_lp, ref_sp, rng):
        pop = random_population(rng, 10)
        _, best = cmp.algorithm1(pop, mnist_q, mnist_lp, ref_sp)
        top = max(cmp.candidate_rewards(pop, mnist_q)) + 0.01
        for r in np.arange(0.001, top, 0.005):
            cohort = cmp.cohort_from_reward(pop, mnist_q, r)
            if cohort.is_empty():
                continue
            bracket = cmp.quality_bracket(cohort, pop, mnist_q, mnist_lp)
            pay = cmp.round_payment(cohort, pop, mnist_q, r)
            grid = cmp.cost_curve(np.arange(1, 301), bracket, pay, mnist_lp, ref_sp)
            assert best.total <= grid.min() * (1 + 1e-9)

    def test_reference_band(self, mnist_q, mnist_lp, ref_sp):
        # [PAPER] mean r_o over re-sampled K=10 populations; reported 0.3910
        rs = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            pop = [ClientAttributes(30, rng.uniform(1e-9, 3.0), rng.uniform(1e-9, 0.1))
                   for _ in range(10)]
            rs.append(cmp.algorithm1(pop, mnist_q, mnist_lp, ref_sp)[0].reward)
        assert 0.2 <= np.mean(rs) <= 0.65
