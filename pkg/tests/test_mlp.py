import numpy as np
import pytest

from asopt import mlp
from asopt.dataset import synth_regression


def finite_difference_grads(net, x, y, weight_decay, h=1e-5):
    """Central-difference oracle for the penalized loss, one entry at a time."""
    grads = []
    for arr in (net.w1, net.b1, net.w2, net.b2):
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = mlp.penalized_loss(net, x, y, weight_decay)
            flat[idx] = orig - h
            down = mlp.penalized_loss(net, x, y, weight_decay)
            flat[idx] = orig
            gflat[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def max_rel_error(analytic, numeric):
    worst = 0.0
    for a, b in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - b) / denom)))
    return worst


class TestInit:
    def test_standard_shapes(self):
        net = mlp.init_network(37, 21, alpha=0, seed=0)
        assert net.sizes == (37, 8, 21)  # round(sqrt(58)) = 8
        net = mlp.init_network(37, 51, alpha=0, seed=0)
        assert net.sizes == (37, 9, 51)
        net = mlp.init_network(37, 171, seed=0, hidden=15)
        assert net.sizes == (37, 15, 171)

    def test_deterministic(self):
        a = mlp.init_network(5, 3, seed=11)
        b = mlp.init_network(5, 3, seed=11)
        assert np.array_equal(a.w1, b.w1) and np.array_equal(a.w2, b.w2)

    def test_bounds_and_zero_biases(self):
        net = mlp.init_network(16, 4, seed=2)
        assert np.all(np.abs(net.w1) <= 1 / 4)
        assert np.all(net.b1 == 0) and np.all(net.b2 == 0)


class TestForward:
    def test_zero_network(self):
        net = mlp.init_network(3, 2, seed=0)
        net.w1[:], net.w2[:] = 0, 0
        assert np.array_equal(mlp.forward(net, np.ones(3)), np.zeros(2))

    def test_half_from_sigmoid_of_zero(self):
        # one hidden unit, zero first layer, unit second layer: output = 0.5
        net = mlp.MlpNetwork((3, 1, 2), np.zeros((1, 3)), np.zeros(1), np.ones((2, 1)), np.zeros(2))
        out = mlp.forward(net, np.array([4.0, -1.0, 2.0]))
        assert np.allclose(out, [0.5, 0.5])

    def test_batched_matches_rowwise(self):
        net = mlp.init_network(6, 4, seed=3)
        x = np.random.default_rng(0).normal(size=(9, 6))
        batch = mlp.forward(net, x)
        rows = np.stack([mlp.forward(net, r) for r in x])
        assert np.allclose(batch, rows)

    def test_dim_mismatch(self):
        net = mlp.init_network(6, 4, seed=3)
        with pytest.raises(ValueError):
            mlp.forward(net, np.ones(5))


class TestMse:
    def test_identity_zero(self):
        x = np.random.default_rng(1).normal(size=(4, 3))
        assert mlp.mse(x, x) == 0.0

    def test_unit_residual(self):
        assert mlp.mse(np.array([[1.0, 1.0]]), np.array([[0.0, 0.0]])) == 1.0

    def test_quadratic_scaling(self):
        p = np.random.default_rng(2).normal(size=(5, 2))
        t = np.zeros_like(p)
        assert mlp.mse(3 * p, t) == pytest.approx(9 * mlp.mse(p, t))

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            mlp.mse(np.empty((0, 2)), np.empty((0, 2)))


class TestBackprop:
    def test_zero_residual_no_decay(self):
        net = mlp.init_network(4, 2, seed=5)
        x = np.random.default_rng(3).normal(size=(6, 4))
        y = mlp.forward(net, x)
        g = mlp.backprop(net, x, y, weight_decay=0.0)
        for arr in (g.w1, g.b1, g.w2, g.b2):
            assert np.allclose(arr, 0.0, atol=1e-12)

    def test_duplicated_batch_unchanged(self):
        net = mlp.init_network(4, 2, seed=5)
        rng = np.random.default_rng(4)
        x = rng.normal(size=(6, 4))
        y = rng.normal(size=(6, 2))
        g1 = mlp.backprop(net, x, y, 0.01)
        g2 = mlp.backprop(net, np.vstack([x, x]), np.vstack([y, y]), 0.01)
        assert np.allclose(g1.w1, g2.w1) and np.allclose(g1.w2, g2.w2)

    @pytest.mark.parametrize("seed,decay", [(0, 0.0), (1, 0.01), (2, 0.1)])
    def test_matches_finite_differences(self, seed, decay):
        rng = np.random.default_rng(seed)
        net = mlp.init_network(5, 3, seed=seed)
        x = rng.normal(size=(7, 5))
        y = rng.normal(size=(7, 3))
        g = mlp.backprop(net, x, y, decay)
        numeric = finite_difference_grads(net, x, y, decay)
        assert max_rel_error([g.w1, g.b1, g.w2, g.b2], numeric) < 1e-5


class TestTrainGd:
    def test_zero_learn_rate_invalid(self):
        with pytest.raises(ValueError):
            mlp.GdConfig(learn_rate=0.0)

    def test_curve_length_and_start(self):
        d = synth_regression(40, 5, 2, noise=0.0, seed=1)
        net = mlp.init_network(5, 2, seed=1)
        start = mlp.mse(mlp.forward(net, d.features), d.targets)
        _, curve = mlp.train_gd(net, d.features, d.targets, mlp.GdConfig(num_epoch=25, seed=1))
        assert len(curve) == 25
        assert curve[0] == pytest.approx(start)

    def test_learning_reduces_error(self):
        d = synth_regression(80, 6, 3, noise=0.0, seed=2)
        net = mlp.init_network(6, 3, seed=2)
        trained, curve = mlp.train_gd(
            net, d.features, d.targets,
            mlp.GdConfig(num_epoch=400, learn_rate=0.5, weight_decay=0.0, seed=2),
        )
        final = mlp.mse(mlp.forward(trained, d.features), d.targets)
        assert final < curve[0]

    def test_deterministic(self):
        d = synth_regression(30, 4, 2, noise=0.05, seed=3)
        cfg = mlp.GdConfig(num_epoch=50, seed=3)
        _, c1 = mlp.train_gd(mlp.init_network(4, 2, seed=3), d.features, d.targets, cfg)
        _, c2 = mlp.train_gd(mlp.init_network(4, 2, seed=3), d.features, d.targets, cfg)
        assert c1 == c2

    def test_decay_shrinks_weights_on_zero_data(self):
        net = mlp.init_network(3, 2, seed=4)
        x = np.zeros((5, 3))
        y = np.zeros((5, 2))
        cfg = mlp.GdConfig(num_epoch=10, learn_rate=0.1, weight_decay=0.5, seed=0)
        norms = [float(np.linalg.norm(net.w1) + np.linalg.norm(net.w2))]
        cur = net
        for _ in range(5):
            cur, _ = mlp.train_gd(cur, x, y, mlp.GdConfig(num_epoch=1, learn_rate=0.1, weight_decay=0.5))
            norms.append(float(np.linalg.norm(cur.w1) + np.linalg.norm(cur.w2)))
        assert all(b < a for a, b in zip(norms, norms[1:]))


class TestGarson:
    def test_one_hot_for_single_active_column(self):
        net = mlp.init_network(4, 2, seed=0)
        net.w1[:] = 0.0
        net.w1[:, 2] = [0.5] * net.sizes[1]
        imp = mlp.garson_importance(net)
        assert np.allclose(imp, [0, 0, 1, 0])

    def test_hand_computed_case(self):
        net = mlp.MlpNetwork((2, 1, 1), np.array([[3.0, 1.0]]), np.zeros(1),
                             np.array([[2.0]]), np.zeros(1))
        assert np.allclose(mlp.garson_importance(net), [0.75, 0.25])

    def test_probability_vector(self):
        net = mlp.init_network(9, 4, seed=8)
        imp = mlp.garson_importance(net)
        assert np.all(imp >= 0)
        assert abs(imp.sum() - 1.0) < 1e-9

    def test_permutation_equivariance(self):
        net = mlp.init_network(6, 3, seed=9)
        imp = mlp.garson_importance(net)
        perm = np.array([3, 0, 5, 1, 4, 2])
        permuted = net.copy()
        permuted.w1 = net.w1[:, perm]
        assert np.allclose(mlp.garson_importance(permuted), imp[perm])

    def test_zero_row_skipped(self):
        net = mlp.MlpNetwork(
            (2, 2, 1),
            np.array([[3.0, 1.0], [0.0, 0.0]]),
            np.zeros(2),
            np.array([[2.0, 5.0]]),
            np.zeros(1),
        )
        assert np.allclose(mlp.garson_importance(net), [0.75, 0.25])


def test_json_round_trip():
    net = mlp.init_network(5, 3, seed=6)
    back = mlp.MlpNetwork.from_json(net.to_json())
    assert back.sizes == net.sizes
    assert np.array_equal(back.w1, net.w1)
    assert np.array_equal(back.b2, net.b2)
