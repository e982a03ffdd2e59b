import math

import numpy as np
import pytest

from rpdhg_lab.errors import InfeasibleError
from rpdhg_lab.harness import loglog_slope
from rpdhg_lab.instances import (LpInstance, MatrixDistribution, SolutionDistribution,
                                 gen_instance)
from rpdhg_lab.probes import (brute_force_lp, probe_kappa, probe_phi, probe_sigma_max,
                              probe_sigma_min)

GAUSS = MatrixDistribution(kind="gaussian")
RADEMACHER = MatrixDistribution(kind="rademacher")
FOLDED = SolutionDistribution(kind="folded_gaussian")


def normal_cdf(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


class TestProbeSigmaMax:
    def test_gaussian_no_exceedance(self):
        r = probe_sigma_max(25, 50, GAUSS, trials=200, seed=1)
        assert r.exceed_count == 0
        assert r.bound_rate == pytest.approx(math.exp(-300.0))

    def test_single_rademacher_entry(self):
        # 1x1 entry has sigma_1 = 1 < 5 always
        r = probe_sigma_max(1, 1, RADEMACHER, trials=50, seed=2)
        assert r.exceed_count == 0
        assert r.threshold == 5.0

    def test_binomial_confidence_bound(self):
        for dist in (GAUSS, RADEMACHER, MatrixDistribution(kind="uniform_unit_var")):
            r = probe_sigma_max(10, 20, dist, trials=300, seed=3)
            assert r.empirical_rate <= r.bound_rate + 3 * math.sqrt(r.bound_rate / r.trials) + 0.01

    def test_deterministic(self):
        a = probe_sigma_max(5, 10, GAUSS, trials=60, seed=9)
        b = probe_sigma_max(5, 10, GAUSS, trials=60, seed=9)
        assert a == b

    def test_trials_validated(self):
        with pytest.raises(ValueError):
            probe_sigma_max(2, 4, GAUSS, trials=0, seed=0)


class TestProbeSigmaMin:
    def test_univariate_matches_normal_cdf(self):
        # 1x1 Gaussian: sigma_m = |Z|, threshold eps * (sqrt(1) - 0) = eps
        trials = 10_000
        (r,) = probe_sigma_min(1, 1, GAUSS, trials=trials, eps_grid=[0.1], seed=4)
        want = 2.0 * normal_cdf(0.1) - 1.0  # Pr[|Z| <= 0.1] ~ 0.0797
        sigma = math.sqrt(want * (1 - want) / trials)
        assert abs(r.empirical_rate - want) <= 3 * sigma

    def test_large_eps_saturates(self):
        (r,) = probe_sigma_min(3, 6, GAUSS, trials=200, eps_grid=[10.0], seed=5)
        assert r.empirical_rate == 1.0

    def test_monotone_in_eps(self):
        rs = probe_sigma_min(3, 6, GAUSS, trials=500, eps_grid=[0.05, 0.1, 0.2, 0.4, 0.8], seed=6)
        rates = [r.empirical_rate for r in rs]
        assert rates == sorted(rates)

    def test_bound_rate_unavailable(self):
        (r,) = probe_sigma_min(2, 4, GAUSS, trials=100, eps_grid=[0.3], seed=7)
        assert r.bound_rate is None

    def test_power_law_decay_exponent(self):
        # d = 1: the small-eps event probability decays at least like eps^2
        m, n = 3, 4
        eps_grid = [0.02, 0.04, 0.08, 0.16]
        rs = probe_sigma_min(m, n, GAUSS, trials=30_000, eps_grid=eps_grid, seed=8)
        pts = [(r.threshold, r.empirical_rate) for r in rs if 0 < r.empirical_rate < 0.5]
        assert len(pts) >= 3, "grid must resolve the decay range"
        fit = loglog_slope(pts)
        d = n - m
        assert fit["slope"] >= d + 1 - 0.5


class TestProbeKappa:
    def test_tiny_case_finite(self):
        q = probe_kappa(1, 2, GAUSS, trials=200, seed=9)
        assert all(math.isfinite(v) for v in q.values())

    def test_quantiles_monotone(self):
        q = probe_kappa(6, 12, GAUSS, trials=300, seed=10)
        assert q[0.5] <= q[0.9] <= q[0.99]

    def test_median_scale_collapse(self):
        # fixed aspect ratio n = 2m: median kappa stays within a factor 3
        q_small = probe_kappa(10, 20, GAUSS, trials=300, seed=11)
        q_large = probe_kappa(40, 80, GAUSS, trials=300, seed=12)
        ratio = q_small[0.5] / q_large[0.5]
        assert 1.0 / 3.0 <= ratio <= 3.0

    def test_trials_floor(self):
        with pytest.raises(ValueError):
            probe_kappa(4, 8, GAUSS, trials=50, seed=0)


class TestProbePhi:
    def test_saturated_below_n(self):
        # sum >= n * min, so the ratio is always >= n
        rs = probe_phi(20, trials=500, t_grid=[5.0, 20.0], seed=13)
        assert rs[0].empirical_rate == 1.0
        assert rs[1].empirical_rate == 1.0

    def test_single_component_trivial(self):
        rs = probe_phi(1, trials=300, t_grid=[2.0], seed=14)
        assert rs[0].exceed_count == 0  # ratio is exactly 1 for n = 1

    def test_monotone_in_threshold(self):
        rs = probe_phi(30, trials=2000, t_grid=[1e2, 1e3, 1e4], seed=15)
        rates = [r.empirical_rate for r in rs]
        assert rates == sorted(rates, reverse=True)

    def test_reciprocal_decay_slope(self):
        # tail Pr[ratio >= t] ~ 1/t over the resolvable decades
        t_grid = np.logspace(3.5, 5.5, 9)
        rs = probe_phi(50, trials=60_000, t_grid=t_grid, seed=16)
        pts = [(r.threshold, r.empirical_rate) for r in rs
               if r.exceed_count >= 30 and r.empirical_rate < 0.5]
        assert len(pts) >= 4
        fit = loglog_slope(pts)
        assert -1.6 <= fit["slope"] <= -0.7


class TestBruteForce:
    def test_two_vertex_hand_case(self):
        inst = LpInstance(m=1, n=2, A=np.array([[1.0, 1.0]]), b=np.array([1.0]),
                          c=np.array([0.0, 1.0]), x_star=np.array([1.0, 0.0]),
                          s_star=np.array([0.0, 1.0]), y_star=np.array([0.0]),
                          basis=np.array([0]), seed=0, presolved=False,
                          meta={"certified": True})
        res = brute_force_lp(inst)
        assert np.allclose(res.x, [1.0, 0.0])
        assert res.objective == pytest.approx(0.0)
        assert res.basis == (0,) and res.unique

    def test_matches_generator_certificates(self):
        for seed in range(40):
            m = 1 + seed % 3
            n = min(4 + seed % 5, 2 * m + 4)
            inst = gen_instance(m, n, GAUSS, FOLDED, seed=200 + seed,
                                presolve=(seed % 2 == 0))
            res = brute_force_lp(inst)
            assert np.linalg.norm(res.x - inst.x_star) <= 1e-8 * (1 + np.linalg.norm(inst.x_star))
            assert np.linalg.norm(res.s - inst.s_star) <= 1e-8 * (1 + np.linalg.norm(inst.s_star))
            assert res.basis == tuple(inst.basis)

    def test_infeasible_raises(self):
        inst = LpInstance(m=1, n=2, A=np.array([[1.0, 1.0]]), b=np.array([-1.0]),
                          c=np.array([1.0, 1.0]), x_star=np.array([0.0, 0.0]),
                          s_star=np.array([1.0, 1.0]), y_star=np.array([0.0]),
                          basis=np.array([0]), seed=0, presolved=False, meta={})
        with pytest.raises(InfeasibleError):
            brute_force_lp(inst)

    def test_tie_flags_non_unique(self):
        inst = LpInstance(m=1, n=2, A=np.array([[1.0, 1.0]]), b=np.array([1.0]),
                          c=np.array([1.0, 1.0]), x_star=np.array([1.0, 0.0]),
                          s_star=np.array([0.0, 0.0]), y_star=np.array([1.0]),
                          basis=np.array([0]), seed=0, presolved=False, meta={})
        res = brute_force_lp(inst)
        assert not res.unique
        assert res.basis == (0,)  # lexicographically smallest kept

    def test_combinatorial_guard(self):
        inst = gen_instance(10, 21, GAUSS, FOLDED, seed=3)
        with pytest.raises(ValueError):
            brute_force_lp(inst)
