import math

import numpy as np
import pytest

from asopt import dpng, epmc
from asopt.analysis import adjusted_rand_index
from asopt.cluster_core import AntennaState, assign
from asopt.dataset import synth_blobs


class TestNonlinearWeight:
    def test_endpoints_exact(self):
        assert dpng.nonlinear_weight(0, 100, 0.9, 0.4) == 0.9
        assert dpng.nonlinear_weight(100, 100, 0.9, 0.4) == 0.4

    def test_midpoint_value(self):
        w = dpng.nonlinear_weight(50, 100, 0.9, 0.4)
        expected = 0.4 + 0.5 * math.sin(0.5 * math.pi * 0.5**1.5)
        assert w == pytest.approx(expected, abs=1e-15)
        assert w == pytest.approx(0.6636, abs=5e-4)

    def test_monotone_non_increasing(self):
        vals = [dpng.nonlinear_weight(t, 200, 0.9, 0.4) for t in range(201)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))


class TestIncrement:
    def test_zero_displacement(self):
        h = np.random.default_rng(0).normal(size=(3, 2))
        assert np.allclose(dpng.increment(h, h, h, 0.5, 0.5), 0.0)

    def test_single_term(self):
        h_i = np.zeros((2, 2))
        h_m = np.full((2, 2), 4.0)
        out = dpng.increment(h_i, h_m, np.ones((2, 2)), 1.0, 0.0)
        assert np.array_equal(out, h_m)

    def test_scalar_arithmetic(self):
        out = dpng.increment(np.array([[0.0]]), np.array([[10.0]]),
                             np.array([[-5.0]]), 0.5, 0.2)
        assert out[0, 0] == pytest.approx(4.0)


class TestDirectionalIncrement:
    def state(self, sigma=5.0):
        return AntennaState(np.array([[1.0]]), np.array([[-1.0]]), sigma, sigma)

    def test_equal_probes_zero(self):
        phi = dpng.directional_increment(self.state(), np.array([[2.0]]), lambda h: 7.0)
        assert np.array_equal(phi, np.zeros((1, 1)))

    def test_better_right_gives_negative(self):
        fit = lambda h: 1.0 if h[0, 0] > 0 else 3.0  # right probe scores lower
        phi = dpng.directional_increment(self.state(), np.array([[2.0]]), fit)
        assert phi[0, 0] == pytest.approx(-10.0)

    def test_better_left_gives_positive(self):
        fit = lambda h: 3.0 if h[0, 0] > 0 else 1.0
        phi = dpng.directional_increment(self.state(), np.array([[2.0]]), fit)
        assert phi[0, 0] == pytest.approx(10.0)


class TestStepDecay:
    def test_single_decay(self):
        assert dpng.decay_step(5.0, 0.8) == pytest.approx(4.0)

    def test_geometric_law(self):
        sigma = 5.0
        for _ in range(10):
            sigma = dpng.decay_step(sigma, 0.8)
        assert sigma == pytest.approx(5.0 * 0.8**10)
        assert sigma == pytest.approx(0.537, abs=1e-3)

    def test_positive_and_decreasing(self):
        sigma, seen = 5.0, []
        for _ in range(50):
            sigma = dpng.decay_step(sigma, 0.8)
            seen.append(sigma)
        assert all(s > 0 for s in seen)
        assert all(b < a for a, b in zip(seen, seen[1:]))


class TestAntennae:
    def test_zero_increment_freezes(self):
        st = AntennaState(np.array([[1.0]]), np.array([[-1.0]]), 5.0, 1.0)
        out = dpng.update_antennae(st, np.zeros((1, 1)))
        assert np.array_equal(out.right, st.right)
        assert np.array_equal(out.left, st.left)

    def test_scalar_arithmetic(self):
        st = AntennaState(np.array([[1.0]]), np.array([[-1.0]]), 5.0, 1.0)
        out = dpng.update_antennae(st, np.array([[2.0]]))
        assert out.right[0, 0] == pytest.approx(2.0)
        assert out.left[0, 0] == pytest.approx(-2.0)

    def test_gap_grows_by_increment_times_distance(self):
        st = AntennaState(np.array([[1.0]]), np.array([[-1.0]]), 5.0, 3.0)
        incr = np.array([[2.0]])
        out = dpng.update_antennae(st, incr)
        gap_before = st.right - st.left
        gap_after = out.right - out.left
        assert np.allclose(gap_after - gap_before, incr * st.d)


class TestDpngUpdate:
    def test_fixed_point(self):
        h = np.random.default_rng(1).normal(size=(2, 3))
        zero = np.zeros_like(h)
        assert np.array_equal(dpng.dpng_update(h, zero, zero, zero, 0.7, 0.5), h)

    def test_lambda_one_drops_directional_term(self):
        h = np.zeros((1, 1))
        out = dpng.dpng_update(h, np.array([[2.0]]), np.array([[4.0]]),
                               np.array([[99.0]]), 0.5, 1.0)
        assert out[0, 0] == pytest.approx(0.5 * 2.0 + 4.0)

    def test_scalar_arithmetic(self):
        out = dpng.dpng_update(np.array([[0.0]]), np.array([[2.0]]), np.array([[4.0]]),
                               np.array([[-2.0]]), 0.5, 0.5)
        assert out[0, 0] == pytest.approx(2.0)


class TestAdaptiveRates:
    def cfg(self):
        return dpng.DpngConfig()

    def test_pc_above_average_is_max(self):
        assert dpng.adaptive_pc(5.0, 4.0, 9.0, self.cfg()) == 0.8

    def test_pc_branch_point(self):
        # at the average: (max-min)*cos(0)/(1+exp(0)) + min = 0.3/2 + 0.5
        assert dpng.adaptive_pc(4.0, 4.0, 9.0, self.cfg()) == pytest.approx(0.65, abs=1e-12)

    def test_pc_uniform_population(self):
        assert dpng.adaptive_pc(4.0, 4.0, 4.0, self.cfg()) == 0.8

    def test_pm_branch_values(self):
        cfg = self.cfg()
        assert dpng.adaptive_pm(5.0, 4.0, 9.0, cfg) == 0.05
        assert dpng.adaptive_pm(4.0, 4.0, 9.0, cfg) == pytest.approx(0.0275, abs=1e-12)

    def test_rates_stay_in_bounds_over_clamped_domain(self):
        cfg = self.cfg()
        f_avg, f_max = 10.0, 20.0
        for f in np.linspace(-50.0, 25.0, 400):
            pc = dpng.adaptive_pc(float(f), f_avg, f_max, cfg)
            pm = dpng.adaptive_pm(float(f), f_avg, f_max, cfg)
            assert cfg.pc_min <= pc <= cfg.pc_max
            assert cfg.pm_min <= pm <= cfg.pm_max


class TestSigmoid:
    def test_symmetry_at_zero(self):
        assert dpng.sigmoid(0.0) == 0.5

    def test_saturation_point(self):
        # a*r equal to the steepness constant puts the curve next to 1
        val = dpng.sigmoid(1.0, a=9.903438)
        assert val == pytest.approx(0.99995, abs=5e-6)

    def test_complement_identity(self):
        for r in np.linspace(-4, 4, 17):
            assert dpng.sigmoid(r) + dpng.sigmoid(-r) == pytest.approx(1.0, abs=1e-12)

    def test_extreme_arguments_saturate(self):
        assert dpng.sigmoid(1e6) == 1.0
        assert dpng.sigmoid(-1e6) == 0.0


class TestCrossover:
    def test_probability_zero_is_identity(self):
        rng = np.random.default_rng(0)
        a = np.arange(6.0).reshape(3, 2)
        b = -np.arange(6.0).reshape(3, 2)
        out_a, out_b = dpng.crossover_individuals(a, b, 0.0, rng)
        assert np.array_equal(out_a, a) and np.array_equal(out_b, b)

    def test_full_swap_when_all_coins_hit(self):
        class AllHeads:
            def random(self, size=None):
                return 0.0 if size is None else np.zeros(size)

        a = np.arange(6.0).reshape(3, 2)
        b = -np.arange(6.0).reshape(3, 2)
        out_a, out_b = dpng.crossover_individuals(a, b, 1.0, AllHeads())
        assert np.array_equal(out_a, b) and np.array_equal(out_b, a)

    def test_row_multiset_preserved(self):
        rng = np.random.default_rng(1)
        a = np.random.default_rng(2).normal(size=(5, 3))
        b = np.random.default_rng(3).normal(size=(5, 3))
        before = sorted(map(tuple, np.vstack([a, b])))
        for _ in range(20):
            out_a, out_b = dpng.crossover_individuals(a, b, 0.9, rng)
            after = sorted(map(tuple, np.vstack([out_a, out_b])))
            assert after == before


class TestMutation:
    def ranges(self):
        return np.array([0.0, 0.0]), np.array([1.0, 1.0])

    def test_probability_zero_identity(self):
        rng = np.random.default_rng(0)
        h = np.random.default_rng(1).random((4, 2))
        assert np.array_equal(dpng.mutate_individual(h, 0.0, self.ranges(), rng), h)

    def test_probability_one_changes_everything(self):
        rng = np.random.default_rng(2)
        h = np.full((4, 2), 0.5)
        out = dpng.mutate_individual(h, 1.0, self.ranges(), rng)
        assert np.all(out != h)

    def test_mutants_stay_in_bounds(self):
        rng = np.random.default_rng(3)
        h = np.random.default_rng(4).random((6, 2))
        for _ in range(30):
            out = dpng.mutate_individual(h, 0.8, self.ranges(), rng)
            assert out.min() >= 0.0 and out.max() <= 1.0


def reduced_config(base: epmc.EpmcConfig) -> dpng.DpngConfig:
    """Every extension disabled: the run must replay the baseline exactly."""
    return dpng.DpngConfig(
        pop_size=base.pop_size,
        elitnum=base.elitnum,
        iterations=base.iterations,
        n_clusters=base.n_clusters,
        alpha=base.alpha,
        beta=base.beta,
        radius=base.radius,
        seed=base.seed,
        w_start=0.0,
        w_end=0.0,
        sigma0=0.0,
        lambda_mix=1.0,
        enable_antenna=False,
        enable_adaptive_ga=False,
        enable_elim=False,
        random_coeffs=False,
    )


class TestRunDpng:
    def norm_blobs(self, dim=2, seed=0, per=15):
        d, labels = synth_blobs(3, per, dim, 10.0, seed=seed)
        span = d.features.max(0) - d.features.min(0)
        return (d.features - d.features.min(0)) / span, labels

    def test_reduction_matches_epmc_exactly(self):
        x, _ = self.norm_blobs()
        base = epmc.EpmcConfig(pop_size=9, iterations=30, n_clusters=3, radius=2, seed=11)
        a = epmc.run_epmc(x, base)
        b = dpng.run_dpng_epmc(x, reduced_config(base))
        assert a.history == b.history
        assert a.best_history == b.best_history
        assert a.mean_history == b.mean_history
        assert np.array_equal(a.best.h, b.best.h)

    def test_best_history_non_increasing(self):
        x, _ = self.norm_blobs(seed=1)
        cfg = dpng.DpngConfig(pop_size=9, iterations=40, n_clusters=3, radius=2, seed=5)
        res = dpng.run_dpng_epmc(x, cfg)
        assert all(b <= a for a, b in zip(res.best_history, res.best_history[1:]))

    def test_deterministic(self):
        x, _ = self.norm_blobs(seed=2)
        cfg = dpng.DpngConfig(pop_size=9, iterations=15, n_clusters=3, radius=2, seed=6)
        a = dpng.run_dpng_epmc(x, cfg)
        b = dpng.run_dpng_epmc(x, cfg)
        assert a.history == b.history
        assert np.array_equal(a.best.h, b.best.h)

    def test_history_extras_recorded(self):
        x, _ = self.norm_blobs(seed=3)
        cfg = dpng.DpngConfig(pop_size=9, iterations=12, n_clusters=3, radius=2, seed=7)
        res = dpng.run_dpng_epmc(x, cfg)
        assert len(res.w_history) == len(res.history) == 12
        assert res.w_history[0] == cfg.w_start
        assert res.sigma_history[0] == cfg.sigma0
        assert res.sigma_history[1] == pytest.approx(cfg.sigma0 * cfg.eta_step)
        assert all(cfg.pc_min <= pc <= cfg.pc_max for pc in res.pc_history)
        assert all(cfg.pm_min <= pm <= cfg.pm_max for pm in res.pm_history)

    def test_eval_budget_stops_early(self):
        x, _ = self.norm_blobs(seed=4)
        cfg = dpng.DpngConfig(pop_size=9, iterations=200, n_clusters=3, radius=2,
                              seed=8, maxgen=30)
        res = dpng.run_dpng_epmc(x, cfg)
        assert res.evaluations >= 30 * 9
        assert len(res.history) < 200

    def test_blob_recovery_ari(self):
        x, labels = self.norm_blobs(dim=5, seed=1, per=50)
        aris = []
        for run in range(10):
            cfg = dpng.DpngConfig(pop_size=15, iterations=100, n_clusters=3,
                                  radius=2, seed=2000 + run)
            res = dpng.run_dpng_epmc(x, cfg)
            aris.append(adjusted_rand_index(assign(x, res.best.h), labels))
        assert float(np.median(aris)) >= 0.9


def test_config_validation():
    with pytest.raises(ValueError):
        dpng.DpngConfig(eta_step=1.0)
    with pytest.raises(ValueError):
        dpng.DpngConfig(lambda_mix=1.5)
    with pytest.raises(ValueError):
        dpng.DpngConfig(pc_min=0.9, pc_max=0.8)
