"""Row-wise generative model with four feedforward components.

An embedder/recovery pair autoencodes data rows into a sigmoid latent space;
a generator maps noise into that space and a discriminator judges latents.
Training follows a three-phase schedule: autoencoder warm-up, supervised
warm-up, then joint adversarial alternation. All rows are expected in [0, 1]
(normalize features and targets first); generated rows are clamped there.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import dataset as ds
from . import debp as debp_mod
from . import mlp
from .rng import subseed

_EPS_PROB = 1e-7
_EPS_NORM = 1e-12


class GanDiverged(RuntimeError):
    def __init__(self, phase: str, step: int):
        super().__init__(f"non-finite loss in phase '{phase}' at step {step}")
        self.phase = phase
        self.step = step


@dataclass
class GanConfig:
    hidden_dim: int = 24
    num_layer: int = 3
    iterations: int = 100  # steps per phase
    lam: float = 1.0  # supervised weight in the embedder/recovery objective
    eta: float = 10.0  # supervised weight in the generator objective
    batch_size: int = 128
    seed: int = 0
    generative_samples: int = 1186
    learn_rate: float = 0.1
    momentum: float = 0.9
    disc_gate: float = -0.3  # skip discriminator steps above this objective value

    def __post_init__(self):
        if self.lam < 0 or self.eta < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.num_layer < 1:
            raise ValueError("num_layer must be >= 1")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must lie in [0, 1)")


@dataclass
class Stack:
    """Plain multilayer perceptron: sigmoid hidden layers, configurable output."""

    weights: list
    biases: list
    out_activation: str  # "identity" | "sigmoid"

    def copy(self) -> "Stack":
        return Stack([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                     self.out_activation)


def init_stack(layer_sizes, out_activation: str, rng: np.random.Generator) -> Stack:
    # Sigmoid-gain uniform init; smaller scales starve deep sigmoid stacks.
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        lim = 4.0 * math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, (fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Stack(weights, biases, out_activation)


def stack_forward(net: Stack, x: np.ndarray):
    """All layer activations, input first, network output last."""
    acts = [np.atleast_2d(np.asarray(x, dtype=float))]
    last = len(net.weights) - 1
    for idx, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w.T + b
        if idx < last or net.out_activation == "sigmoid":
            acts.append(mlp.sigmoid(z))
        else:
            acts.append(z)
    return acts


def stack_backward(net: Stack, acts, d_out: np.ndarray):
    """Parameter gradients and the input gradient for upstream chaining."""
    last = len(net.weights) - 1
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.weights)
    delta = d_out
    for idx in range(last, -1, -1):
        out = acts[idx + 1]
        if idx < last or net.out_activation == "sigmoid":
            delta = delta * out * (1.0 - out)
        grads_w[idx] = delta.T @ acts[idx]
        grads_b[idx] = delta.sum(axis=0)
        delta = delta @ net.weights[idx]
    return (grads_w, grads_b), delta


def stack_apply(net: Stack, x: np.ndarray) -> np.ndarray:
    return stack_forward(net, x)[-1]


class _Momentum:
    """Classical momentum over one stack's parameters."""

    def __init__(self, net: Stack, mu: float):
        self.net = net
        self.mu = mu
        self.vel_w = [np.zeros_like(w) for w in net.weights]
        self.vel_b = [np.zeros_like(b) for b in net.biases]

    def step(self, grads, lr: float, ascend: bool = False):
        sign = 1.0 if ascend else -1.0
        for w, v, g in zip(self.net.weights, self.vel_w, grads[0]):
            v *= self.mu
            v += g
            w += sign * lr * v
        for b, v, g in zip(self.net.biases, self.vel_b, grads[1]):
            v *= self.mu
            v += g
            b += sign * lr * v


def _add_grads(a, b, scale: float = 1.0):
    return (
        [ga + scale * gb for ga, gb in zip(a[0], b[0])],
        [ga + scale * gb for ga, gb in zip(a[1], b[1])],
    )


@dataclass
class GanQuartet:
    embedder: Stack
    recovery: Stack
    generator: Stack
    discriminator: Stack
    data_dim: int
    latent_dim: int
    noise_dim: int
    in_shift: np.ndarray = None  # embedder input standardization (column means)
    in_scale: np.ndarray = None  # column stds, floored
    lat_shift: np.ndarray = None  # discriminator latent standardization, frozen
    lat_scale: np.ndarray = None  # after the autoencoder warm-up
    schema: object = None
    n_features: int = None  # split point between features and targets in a row

    @property
    def gen_input_dim(self) -> int:
        return self.latent_dim + self.noise_dim

    def standardize(self, x: np.ndarray) -> np.ndarray:
        if self.in_shift is None:
            return np.atleast_2d(np.asarray(x, dtype=float))
        return (np.atleast_2d(np.asarray(x, dtype=float)) - self.in_shift) / self.in_scale

    def embed(self, x: np.ndarray) -> np.ndarray:
        return stack_apply(self.embedder, self.standardize(x))

    def autoencode(self, x: np.ndarray) -> np.ndarray:
        return stack_apply(self.recovery, self.embed(x))

    def latent_view(self, h: np.ndarray) -> np.ndarray:
        if self.lat_shift is None:
            return h
        return (h - self.lat_shift) / self.lat_scale

    def discriminate(self, h: np.ndarray) -> np.ndarray:
        return stack_apply(self.discriminator, self.latent_view(h))


def reconstruction_loss(real: np.ndarray, recovered: np.ndarray) -> float:
    """Mean Euclidean row distance between originals and reconstructions."""
    real = np.atleast_2d(real)
    recovered = np.atleast_2d(recovered)
    if real.shape != recovered.shape:
        raise ValueError("shape mismatch")
    return float(np.linalg.norm(real - recovered, axis=1).mean())


def supervised_loss(h_real: np.ndarray, h_pred: np.ndarray) -> float:
    """Mean Euclidean distance between real and predicted latents."""
    return reconstruction_loss(h_real, h_pred)


def unsupervised_loss(y_real: np.ndarray, y_fake: np.ndarray) -> float:
    """Discriminator objective: mean log y_real + mean log(1 - y_fake)."""
    y_real = np.clip(np.asarray(y_real, dtype=float), _EPS_PROB, 1.0 - _EPS_PROB)
    y_fake = np.clip(np.asarray(y_fake, dtype=float), _EPS_PROB, 1.0 - _EPS_PROB)
    return float(np.mean(np.log(y_real)) + np.mean(np.log(1.0 - y_fake)))


def _row_norm_grad(target: np.ndarray, pred: np.ndarray) -> np.ndarray:
    # d/d(pred) of mean_i ||target_i - pred_i||
    diff = pred - target
    norms = np.maximum(np.linalg.norm(diff, axis=1, keepdims=True), _EPS_NORM)
    return diff / (norms * diff.shape[0])


def _data_matrix(data) -> np.ndarray:
    if hasattr(data, "features"):
        return np.hstack([data.features, data.targets])
    return np.atleast_2d(np.asarray(data, dtype=float))


def train_sitgan(train, cfg: GanConfig):
    """Train the quartet on [0, 1] rows; returns (quartet, loss curve rows).

    Curve rows are (phase, step, reconstruction, supervised, adversarial),
    with NaN for losses a phase does not touch.
    """
    rows = _data_matrix(train)
    n, data_dim = rows.shape
    rng = np.random.default_rng(cfg.seed)
    h = cfg.hidden_dim
    hidden = [h] * (cfg.num_layer - 1)
    quartet = GanQuartet(
        embedder=init_stack([data_dim] + hidden + [h], "sigmoid", rng),
        recovery=init_stack([h] + hidden + [data_dim], "identity", rng),
        generator=init_stack([2 * h] + hidden + [h], "sigmoid", rng),
        discriminator=init_stack([h] + hidden + [1], "sigmoid", rng),
        data_dim=data_dim,
        latent_dim=h,
        noise_dim=h,
        in_shift=rows.mean(axis=0),
        in_scale=np.maximum(rows.std(axis=0), 1e-8),
        schema=getattr(train, "schema", None),
        n_features=getattr(train, "features", np.empty((0, data_dim))).shape[1]
        if hasattr(train, "features") else None,
    )
    e, r, g, d = quartet.embedder, quartet.recovery, quartet.generator, quartet.discriminator
    batch = min(cfg.batch_size, n)
    curves = []

    def check(value, phase, step):
        if not math.isfinite(value):
            raise GanDiverged(phase, step)
        return value

    def sample_batch():
        return rows[rng.integers(0, n, batch)]

    def std_view(x):
        return quartet.standardize(x)

    def rate(step):
        # Linear decay within each phase keeps the late steps from thrashing.
        return cfg.learn_rate * (1.0 - step / cfg.iterations)

    # Phase 1: autoencoder warm-up on the reconstruction loss.
    opt_e, opt_r = _Momentum(e, cfg.momentum), _Momentum(r, cfg.momentum)
    for step in range(cfg.iterations):
        x = sample_batch()
        acts_e = stack_forward(e, std_view(x))
        acts_r = stack_forward(r, acts_e[-1])
        l_re = check(reconstruction_loss(x, acts_r[-1]), "autoencoder", step)
        d_rec = _row_norm_grad(x, acts_r[-1])
        grads_r, d_h = stack_backward(r, acts_r, d_rec)
        grads_e, _ = stack_backward(e, acts_e, d_h)
        opt_r.step(grads_r, rate(step))
        opt_e.step(grads_e, rate(step))
        curves.append(("autoencoder", step, l_re, math.nan, math.nan))

    # Freeze the discriminator's latent view on the warmed-up embedding.
    h_all = stack_apply(e, std_view(rows))
    quartet.lat_shift = h_all.mean(axis=0)
    quartet.lat_scale = np.maximum(h_all.std(axis=0), 1e-8)

    # Phase 2: supervised warm-up, generator only (teacher-forced context).
    opt_g = _Momentum(g, cfg.momentum)
    for step in range(cfg.iterations):
        x = sample_batch()
        h_real = stack_apply(e, std_view(x))
        z = rng.standard_normal((batch, quartet.noise_dim))
        acts_g = stack_forward(g, np.hstack([h_real, z]))
        l_s = check(supervised_loss(h_real, acts_g[-1]), "supervised", step)
        grads_g, _ = stack_backward(g, acts_g, _row_norm_grad(h_real, acts_g[-1]))
        opt_g.step(grads_g, rate(step))
        curves.append(("supervised", step, math.nan, l_s, math.nan))

    # Phase 3: one-to-one joint alternation.
    opt_e, opt_r = _Momentum(e, cfg.momentum), _Momentum(r, cfg.momentum)
    opt_g, opt_d = _Momentum(g, cfg.momentum), _Momentum(d, cfg.momentum)
    for step in range(cfg.iterations):
        lr = rate(step)
        # Discriminator ascent on real vs open-loop latents.
        x = sample_batch()
        h_real = stack_apply(e, std_view(x))
        z_open = rng.standard_normal((batch, quartet.gen_input_dim))
        h_fake = stack_apply(g, z_open)
        acts_dr = stack_forward(d, quartet.latent_view(h_real))
        acts_df = stack_forward(d, quartet.latent_view(h_fake))
        y_r = np.clip(acts_dr[-1], _EPS_PROB, 1.0 - _EPS_PROB)
        y_f = np.clip(acts_df[-1], _EPS_PROB, 1.0 - _EPS_PROB)
        l_u = check(unsupervised_loss(acts_dr[-1], acts_df[-1]), "joint", step)
        # Ascend only while the discriminator is not already dominant, the
        # usual guard that keeps the adversarial game from one-sided collapse.
        if l_u < cfg.disc_gate:
            grads_dr, _ = stack_backward(d, acts_dr, 1.0 / (batch * y_r))
            grads_df, _ = stack_backward(d, acts_df, -1.0 / (batch * (1.0 - y_f)))
            opt_d.step(_add_grads(grads_dr, grads_df), lr, ascend=True)

        # Generator: supervised pull plus non-saturating adversarial push.
        x = sample_batch()
        h_real = stack_apply(e, std_view(x))
        z = rng.standard_normal((batch, quartet.noise_dim))
        acts_gs = stack_forward(g, np.hstack([h_real, z]))
        l_s = check(supervised_loss(h_real, acts_gs[-1]), "joint", step)
        grads_g_sup, _ = stack_backward(g, acts_gs, _row_norm_grad(h_real, acts_gs[-1]))
        z_open = rng.standard_normal((batch, quartet.gen_input_dim))
        acts_ga = stack_forward(g, z_open)
        acts_da = stack_forward(d, quartet.latent_view(acts_ga[-1]))
        y_a = np.clip(acts_da[-1], _EPS_PROB, 1.0 - _EPS_PROB)
        _, d_h_view = stack_backward(d, acts_da, -1.0 / (batch * y_a))
        grads_g_adv, _ = stack_backward(g, acts_ga, d_h_view / quartet.lat_scale)
        opt_g.step(_add_grads(grads_g_adv, grads_g_sup, cfg.eta), lr)

        # Embedder/recovery refresh: reconstruction plus weighted supervised.
        x = sample_batch()
        acts_e = stack_forward(e, std_view(x))
        h_now = acts_e[-1]
        acts_r = stack_forward(r, h_now)
        l_re = check(reconstruction_loss(x, acts_r[-1]), "joint", step)
        grads_r, d_h_rec = stack_backward(r, acts_r, _row_norm_grad(x, acts_r[-1]))
        z = rng.standard_normal((batch, quartet.noise_dim))
        acts_gs = stack_forward(g, np.hstack([h_now, z]))
        d_pred = _row_norm_grad(h_now, acts_gs[-1])
        _, d_gin = stack_backward(g, acts_gs, d_pred)
        # Supervised loss sees the latent twice: as the target and as context.
        d_h_sup = -d_pred + d_gin[:, : quartet.latent_dim]
        grads_e, _ = stack_backward(e, acts_e, d_h_rec + cfg.lam * d_h_sup)
        opt_r.step(grads_r, lr)
        opt_e.step(grads_e, lr)
        curves.append(("joint", step, l_re, l_s, l_u))

    return quartet, curves


def generate_rows(quartet: GanQuartet, n: int, rng: np.random.Generator) -> np.ndarray:
    """n synthetic rows in [0, 1]: noise -> generator -> recovery, clamped."""
    if n == 0:
        return np.empty((0, quartet.data_dim))
    z = rng.standard_normal((n, quartet.gen_input_dim))
    latents = stack_apply(quartet.generator, z)
    rows = stack_apply(quartet.recovery, latents)
    return np.clip(rows, 0.0, 1.0)


def generate(quartet: GanQuartet, n: int, rng: np.random.Generator):
    """Synthetic Dataset in the training row space (requires a schema)."""
    rows = generate_rows(quartet, n, rng)
    if quartet.schema is None or quartet.n_features is None:
        raise ValueError("quartet was trained on a bare matrix; use generate_rows")
    m = quartet.n_features
    return ds.Dataset(rows[:, :m], rows[:, m:], quartet.schema, norm_state="minmax")


@dataclass
class AugmentationReport:
    rows: list  # (size, seed, model, test_mse) in deterministic order
    means: dict  # (size, model) -> mean test mse

    def cells(self):
        return list(self.rows)


def _train_and_score(model: str, train_x, train_y, test_x, test_y,
                     gd_cfg: mlp.GdConfig, de_cfg, hidden: int) -> float:
    m, n_out = train_x.shape[1], train_y.shape[1]
    if model == "bpnn":
        net = mlp.init_network(m, n_out, seed=gd_cfg.seed, hidden=hidden)
        net, _ = mlp.train_gd(net, train_x, train_y, gd_cfg)
    elif model == "debp":
        cfg = debp_mod.DebpConfig(de=de_cfg, gd=gd_cfg, net_shape=(m, hidden, n_out))
        net, _, _ = debp_mod.train_debp(train_x, train_y, cfg)
    else:
        raise ValueError(f"unknown model '{model}'")
    return mlp.mse(mlp.forward(net, test_x), test_y)


def augmentation_experiment(train, test, quartet: GanQuartet, sizes, seeds,
                            models=("bpnn", "debp"), gd_cfg: mlp.GdConfig = None,
                            de_cfg=None, hidden: int = None,
                            workers: int = 1) -> AugmentationReport:
    """Retrain each model on train plus `size` generated rows, for every
    (size, seed, model) cell, and score on the fixed test set.

    Everything stays in the quartet's row space, so train/test must be
    normalized the same way the quartet's training data was. A size of 0
    reproduces the plain training run for that seed exactly. Cells are
    independent; `workers` bounds a thread pool, with results merged in the
    fixed (size, seed, model) order.
    """
    from concurrent.futures import ThreadPoolExecutor

    from . import devo  # local import to avoid a cycle at module load

    train_rows = _data_matrix(train)
    test_rows = _data_matrix(test)
    m = quartet.n_features if quartet.n_features is not None else train_rows.shape[1]
    gd_cfg = gd_cfg or mlp.GdConfig()
    de_cfg = de_cfg or devo.DeConfig()
    n_out = train_rows.shape[1] - m
    hidden = hidden or mlp.hidden_size(m, n_out)

    def run_cell(cell):
        size, seed, model = cell
        gen_rng = np.random.default_rng(subseed(seed, "augment.generate", size))
        extra = generate_rows(quartet, size, gen_rng)
        merged = np.vstack([train_rows, extra])
        score = _train_and_score(
            model,
            merged[:, :m],
            merged[:, m:],
            test_rows[:, :m],
            test_rows[:, m:],
            replace(gd_cfg, seed=seed),
            replace(de_cfg, seed=subseed(seed, "augment.de", size)),
            hidden,
        )
        return (size, seed, model, score)

    cells = [(size, seed, model) for size in sizes for seed in seeds for model in models]
    if workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(cell) for cell in cells]
    means = {}
    for size in sizes:
        for model in models:
            cell_scores = [r[3] for r in rows if r[0] == size and r[2] == model]
            means[(size, model)] = float(np.mean(cell_scores))
    return AugmentationReport(rows, means)
