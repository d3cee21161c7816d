"""One-hidden-layer feedforward network trained by full-batch gradient descent.

Sigmoid hidden units, identity output, mean-squared-error loss with an L2
weight penalty on the two weight matrices (biases are not penalized).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np


class TrainingDiverged(RuntimeError):
    """Raised when a parameter or loss becomes non-finite during training."""

    def __init__(self, epoch: int, what: str = "loss"):
        super().__init__(f"non-finite {what} at epoch {epoch}")
        self.epoch = epoch


def sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign so exp never overflows.
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def hidden_size(m: int, n: int, alpha: int = 0) -> int:
    """Empirical hidden width: round(sqrt(M + N)) + alpha."""
    return int(round(math.sqrt(m + n))) + alpha


@dataclass
class MlpNetwork:
    sizes: tuple  # (M, H, N)
    w1: np.ndarray  # (H, M)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (N, H)
    b2: np.ndarray  # (N,)

    def copy(self) -> "MlpNetwork":
        return MlpNetwork(self.sizes, self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())

    def is_finite(self) -> bool:
        return all(
            np.isfinite(a).all() for a in (self.w1, self.b1, self.w2, self.b2)
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "sizes": list(self.sizes),
                "W1": self.w1.ravel().tolist(),
                "b1": self.b1.tolist(),
                "W2": self.w2.ravel().tolist(),
                "b2": self.b2.tolist(),
            }
        )

    @staticmethod
    def from_json(text: str) -> "MlpNetwork":
        obj = json.loads(text)
        m, h, n = obj["sizes"]
        return MlpNetwork(
            (m, h, n),
            np.array(obj["W1"], dtype=float).reshape(h, m),
            np.array(obj["b1"], dtype=float),
            np.array(obj["W2"], dtype=float).reshape(n, h),
            np.array(obj["b2"], dtype=float),
        )


@dataclass
class GdConfig:
    num_epoch: int = 1500
    learn_rate: float = 1e-2
    weight_decay: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if self.learn_rate <= 0:
            raise ValueError("learn_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")


@dataclass
class Gradients:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


def init_network(m: int, n: int, alpha: int = 0, seed: int = 0, hidden=None) -> MlpNetwork:
    """Fresh network with uniform(+-1/sqrt(fan_in)) weights and zero biases.

    `hidden` overrides the empirical width rule when given.
    """
    h = hidden if hidden is not None else hidden_size(m, n, alpha)
    if m < 1 or n < 1 or h < 1:
        raise ValueError("layer widths must be >= 1")
    rng = np.random.default_rng(seed)
    lim1 = 1.0 / math.sqrt(m)
    lim2 = 1.0 / math.sqrt(h)
    w1 = rng.uniform(-lim1, lim1, (h, m))
    w2 = rng.uniform(-lim2, lim2, (n, h))
    return MlpNetwork((m, h, n), w1, np.zeros(h), w2, np.zeros(n))


def forward(net: MlpNetwork, x: np.ndarray) -> np.ndarray:
    """Network output for a single M-vector or a (rows, M) batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.shape[1] != net.sizes[0]:
        raise ValueError(f"input width {batch.shape[1]} != M={net.sizes[0]}")
    hidden = sigmoid(batch @ net.w1.T + net.b1)
    out = hidden @ net.w2.T + net.b2
    return out[0] if single else out


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("empty batch")
    return float(np.mean((pred - target) ** 2))


def penalized_loss(net: MlpNetwork, x: np.ndarray, y: np.ndarray, weight_decay: float) -> float:
    data = mse(forward(net, x), y)
    penalty = 0.5 * weight_decay * (np.sum(net.w1**2) + np.sum(net.w2**2))
    return data + penalty


def backprop(net: MlpNetwork, x: np.ndarray, y: np.ndarray, weight_decay: float = 0.0) -> Gradients:
    """Exact gradient of mse + (weight_decay/2)*||W||^2 over the batch.

    The decay term covers the two weight matrices only.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    rows, n_out = y.shape
    hidden = sigmoid(x @ net.w1.T + net.b1)
    if not np.isfinite(hidden).all():
        raise TrainingDiverged(0, "activation")
    pred = hidden @ net.w2.T + net.b2
    # d(mse)/d(pred): mean over every batch x output entry
    g_out = 2.0 * (pred - y) / (rows * n_out)
    dw2 = g_out.T @ hidden + weight_decay * net.w2
    db2 = g_out.sum(axis=0)
    g_hidden = (g_out @ net.w2) * hidden * (1.0 - hidden)
    dw1 = g_hidden.T @ x + weight_decay * net.w1
    db1 = g_hidden.sum(axis=0)
    return Gradients(dw1, db1, dw2, db2)


def train_gd(net: MlpNetwork, x: np.ndarray, y: np.ndarray, cfg: GdConfig):
    """Full-batch gradient descent for cfg.num_epoch steps.

    Returns (trained network, error curve). error_curve[i] is the plain
    training MSE seen at the start of epoch i, so curve[0] is the MSE of the
    initial parameters.
    """
    net = net.copy()
    curve = []
    for epoch in range(cfg.num_epoch):
        loss = mse(forward(net, x), y)
        if not math.isfinite(loss):
            raise TrainingDiverged(epoch)
        curve.append(loss)
        g = backprop(net, x, y, cfg.weight_decay)
        net.w1 -= cfg.learn_rate * g.w1
        net.b1 -= cfg.learn_rate * g.b1
        net.w2 -= cfg.learn_rate * g.w2
        net.b2 -= cfg.learn_rate * g.b2
        if not net.is_finite():
            raise TrainingDiverged(epoch, "parameter")
    return net, curve


def garson_importance(net: MlpNetwork) -> np.ndarray:
    """Connection-weight importance per input, nonnegative and summing to 1.

    Each hidden unit distributes its total outgoing weight magnitude across
    inputs in proportion to absolute incoming weights; hidden units without
    incoming weight are skipped.
    """
    a1 = np.abs(net.w1)  # (H, M)
    row_tot = a1.sum(axis=1)
    keep = row_tot > 0
    if not keep.any():
        raise ValueError("all hidden units have zero incoming weight")
    share = a1[keep] / row_tot[keep, None]
    out_strength = np.abs(net.w2).sum(axis=0)[keep]
    raw = (share * out_strength[:, None]).sum(axis=0)
    total = raw.sum()
    if total <= 0:
        raise ValueError("network carries no connection weight")
    return raw / total
