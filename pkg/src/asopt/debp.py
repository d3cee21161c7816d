"""DE-seeded network training: differential evolution searches the flattened
parameter vector for a good initialization, then gradient descent fine-tunes.
"""

from dataclasses import dataclass

import numpy as np

from . import devo, mlp
from .rng import subseed


@dataclass
class DebpConfig:
    de: devo.DeConfig
    gd: mlp.GdConfig
    net_shape: tuple  # (M, H, N)


def param_count(shape) -> int:
    m, h, n = shape
    return h * m + h + n * h + n


def flatten(net: mlp.MlpNetwork) -> np.ndarray:
    return np.concatenate([net.w1.ravel(), net.b1, net.w2.ravel(), net.b2])


def unflatten(v: np.ndarray, shape) -> mlp.MlpNetwork:
    m, h, n = shape
    v = np.asarray(v, dtype=float)
    if v.size != param_count(shape):
        raise ValueError(f"vector length {v.size} != {param_count(shape)} for shape {shape}")
    idx = 0
    w1 = v[idx:idx + h * m].reshape(h, m).copy(); idx += h * m
    b1 = v[idx:idx + h].copy(); idx += h
    w2 = v[idx:idx + n * h].reshape(n, h).copy(); idx += n * h
    b2 = v[idx:idx + n].copy()
    return mlp.MlpNetwork((m, h, n), w1, b1, w2, b2)


def train_debp(train_x: np.ndarray, train_y: np.ndarray, cfg: DebpConfig):
    """Run the DE initialization search, then gradient descent from its winner.

    The DE objective is the plain training MSE of the decoded network (one
    forward pass, no inner training, no decay penalty). With max_gen == 0 the
    DE stage is skipped and training starts from the standard random
    initialization, making the run identical to plain gradient descent.

    Returns (network, de_result, gd_curve).
    """
    m, h, n = cfg.net_shape
    if train_x.shape[1] != m or train_y.shape[1] != n:
        raise ValueError("training data width does not match net_shape")
    base = mlp.init_network(m, n, seed=cfg.gd.seed, hidden=h)

    def fitness(v):
        return mlp.mse(mlp.forward(unflatten(v, cfg.net_shape), train_x), train_y)

    if cfg.de.max_gen == 0:
        start = base
        seed_fit = fitness(flatten(base))
        de_result = devo.DeResult(
            devo.DeIndividual(flatten(base), seed_fit), [seed_fit], [seed_fit], 1
        )
    else:
        inits = [flatten(base)]
        for i in range(cfg.de.pop_size - 1):
            extra = mlp.init_network(m, n, seed=subseed(cfg.de.seed, "debp.init", i), hidden=h)
            inits.append(flatten(extra))
        de_result = devo.run_de(fitness, cfg.de, inits)
        start = unflatten(de_result.best.x, cfg.net_shape)

    net, curve = mlp.train_gd(start, train_x, train_y, cfg.gd)
    return net, de_result, curve
