import math

import numpy as np
import pytest

from asopt import devo


def sphere(x):
    return float(np.sum(np.asarray(x) ** 2))


class TestAdaptiveF:
    def test_start_of_run(self):
        # exp(1 - 20/21) = exp(1/21), factor 2**phi
        phi = math.exp(1.0 / 21.0)
        assert devo.adaptive_f(1.0, 20, 0) == pytest.approx(2.0**phi, abs=1e-12)
        assert devo.adaptive_f(1.0, 20, 0) == pytest.approx(2.0690, abs=5e-4)

    def test_end_of_run(self):
        phi = math.exp(-19.0)
        expected = 2.0**phi
        assert devo.adaptive_f(1.0, 20, 20) == pytest.approx(expected, abs=1e-12)
        assert devo.adaptive_f(1.0, 20, 20) - 1.0 == pytest.approx(3.88e-9, rel=0.05)

    def test_strictly_decreasing(self):
        values = [devo.adaptive_f(0.9, 20, g) for g in range(21)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            devo.adaptive_f(1.0, 20, 21)


class TestMutate:
    def test_equal_partners_keep_base(self):
        pop = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, 4.0]])
        out = devo.mutate(pop, 0, 0.7, np.random.default_rng(0), partners=(1, 1))
        assert np.array_equal(out, pop[0])

    def test_zero_scale_keeps_base(self):
        pop = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, 4.0]])
        out = devo.mutate(pop, 0, 0.0, np.random.default_rng(0), partners=(1, 2))
        assert np.array_equal(out, pop[0])

    def test_hand_arithmetic(self):
        pop = np.array([[0.0, 0.0], [1.0, 2.0], [0.0, 1.0]])
        out = devo.mutate(pop, 0, 0.5, np.random.default_rng(0), partners=(1, 2))
        assert np.allclose(out, [0.5, 0.5])

    def test_partners_never_equal_base(self):
        pop = np.random.default_rng(1).normal(size=(6, 3))
        rng = np.random.default_rng(2)
        for _ in range(200):
            i = int(rng.integers(0, 6))
            others = [j for j in range(6) if j != i]
            r1, r2 = rng.choice(others, size=2, replace=False)
            assert r1 != i and r2 != i and r1 != r2

    def test_bounds_clamped(self):
        pop = np.array([[0.9, 0.9], [1.0, 1.0], [-1.0, -1.0]])
        out = devo.mutate(pop, 0, 1.0, np.random.default_rng(0),
                          bounds=(-1.0, 1.0), partners=(1, 2))
        assert np.all(out <= 1.0) and np.all(out >= -1.0)


class TestBinomialCross:
    def test_cr_one_takes_donor(self):
        rng = np.random.default_rng(0)
        t, d = np.zeros(8), np.ones(8)
        assert np.array_equal(devo.binomial_cross(t, d, 1.0, rng), d)

    def test_cr_zero_changes_exactly_forced_gene(self):
        rng = np.random.default_rng(1)
        t, d = np.zeros(8), np.ones(8)
        out = devo.binomial_cross(t, d, 0.0, rng, j_rand=5)
        assert out[5] == 1.0
        assert np.sum(out != t) == 1

    def test_single_dimension_always_donor(self):
        rng = np.random.default_rng(2)
        out = devo.binomial_cross(np.array([3.0]), np.array([9.0]), 0.0, rng)
        assert out[0] == 9.0


class TestSelectGreedy:
    def test_better_trial_wins(self):
        t = devo.DeIndividual(np.zeros(1), 2.0)
        u = devo.DeIndividual(np.ones(1), 1.0)
        assert devo.select_greedy(t, u) is u

    def test_worse_trial_loses(self):
        t = devo.DeIndividual(np.zeros(1), 1.0)
        u = devo.DeIndividual(np.ones(1), 2.0)
        assert devo.select_greedy(t, u) is t

    def test_tie_admits_trial(self):
        t = devo.DeIndividual(np.zeros(1), 1.5)
        u = devo.DeIndividual(np.ones(1), 1.5)
        assert devo.select_greedy(t, u) is u


class TestRunDe:
    def sampler(self, rng):
        return rng.uniform(-1, 1, 10)

    def test_sphere_converges(self):
        cfg = devo.DeConfig(pop_size=30, f0=0.3, cr=0.3, max_gen=200, seed=1)
        res = devo.run_de(sphere, cfg, self.sampler)
        assert res.best.fit < 1e-3

    def test_history_non_increasing(self):
        cfg = devo.DeConfig(pop_size=12, f0=0.9, cr=0.4, max_gen=40, seed=2)
        res = devo.run_de(sphere, cfg, self.sampler)
        assert len(res.history) == 41
        assert all(b <= a for a, b in zip(res.history, res.history[1:]))

    def test_zero_generations_returns_initial_best(self):
        cfg = devo.DeConfig(pop_size=8, max_gen=0, seed=3)
        rng = np.random.default_rng(3)
        vecs = [rng.uniform(-5, 5, 4) for _ in range(8)]
        res = devo.run_de(sphere, cfg, vecs)
        assert res.best.fit == min(sphere(v) for v in vecs)
        assert res.history == [res.best.fit]

    def test_seed_determinism(self):
        cfg = devo.DeConfig(pop_size=10, max_gen=30, seed=4)
        a = devo.run_de(sphere, cfg, self.sampler)
        b = devo.run_de(sphere, cfg, self.sampler)
        assert a.history == b.history
        assert np.array_equal(a.best.x, b.best.x)

    def test_bounds_respected(self):
        seen = []

        def tracking(x):
            seen.append(np.array(x))
            return sphere(x)

        cfg = devo.DeConfig(pop_size=10, f0=0.9, cr=0.5, max_gen=25, seed=5,
                            bounds=(-2.0, 2.0))
        devo.run_de(tracking, cfg, lambda rng: rng.uniform(-2, 2, 5))
        stacked = np.vstack(seen)
        assert stacked.min() >= -2.0 and stacked.max() <= 2.0

    def test_non_finite_fitness_reported(self):
        def bad(x):
            return float("nan")

        cfg = devo.DeConfig(pop_size=6, max_gen=2, seed=6)
        with pytest.raises(devo.FitnessError):
            devo.run_de(bad, cfg, lambda rng: rng.uniform(-1, 1, 3))

    def test_mean_history_recorded(self):
        cfg = devo.DeConfig(pop_size=6, max_gen=5, seed=7)
        res = devo.run_de(sphere, cfg, self.sampler)
        assert len(res.mean_history) == len(res.history)
        assert all(m >= b for m, b in zip(res.mean_history, res.history))


def test_config_validation():
    with pytest.raises(ValueError):
        devo.DeConfig(pop_size=3)
    with pytest.raises(ValueError):
        devo.DeConfig(cr=1.5)
    with pytest.raises(ValueError):
        devo.DeConfig(f0=0.0)
