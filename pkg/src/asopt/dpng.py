"""Directional-position nonlinear extension of the EPMC clustering optimizer.

Adds four mechanisms on top of the baseline: a sine-shaped inertia weight on
the previous learning increment, beetle-antenna directional probes with a
geometrically decaying step, cosine-sigmoid adaptive crossover/mutation rates,
and occasional reinitialization of the worst individual. Every mechanism can
be switched off; with all of them off the run reproduces the baseline
trajectory draw for draw.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .cluster_core import AntennaState, ClusterIndividual, fitness, init_individual
from .epmc import (
    EpmcConfig,
    EpmcResult,
    _as_matrix,
    _pool_probs,
    _sorted_members,
    accept_prob,
    elite_count,
    learn_probs,
    learning_increment,
    neighbor_probs,
    rank_weights,
    roulette,
    update_feel,
)

SIGMOID_STEEPNESS = 9.903438


@dataclass
class DpngConfig(EpmcConfig):
    w_start: float = 0.9
    w_end: float = 0.4
    sigma0: float = 5.0
    d0: float = 5.0
    eta_step: float = 0.8
    s: float = 1.0
    lambda_mix: float = 0.5
    pc_min: float = 0.5
    pc_max: float = 0.8
    pm_min: float = 0.005
    pm_max: float = 0.05
    steepness: float = SIGMOID_STEEPNESS
    p_elim: float = 0.05
    maxgen: int = 300  # evaluation budget in generation-equivalents (maxgen * pop_size)
    enable_inertia: bool = True
    enable_antenna: bool = True
    enable_adaptive_ga: bool = True
    enable_elim: bool = True
    random_coeffs: bool = True  # fresh alpha/beta per update instead of the fixed config pair

    def __post_init__(self):
        super().__post_init__()
        if not (0.0 < self.eta_step < 1.0):
            raise ValueError("eta_step must lie in (0, 1)")
        if not (0.0 <= self.lambda_mix <= 1.0):
            raise ValueError("lambda_mix must lie in [0, 1]")
        if self.w_end > self.w_start:
            raise ValueError("w_end must not exceed w_start")
        if not (self.pc_min < self.pc_max and self.pm_min < self.pm_max):
            raise ValueError("rate limits must satisfy min < max")
        if self.s <= 0:
            raise ValueError("s must be positive")


@dataclass
class DpngResult(EpmcResult):
    w_history: list = field(default_factory=list)
    sigma_history: list = field(default_factory=list)
    pc_history: list = field(default_factory=list)  # mean crossover rate per generation
    pm_history: list = field(default_factory=list)  # mean mutation rate per generation


def nonlinear_weight(t: int, total: int, w_start: float, w_end: float) -> float:
    """Sine-annealed inertia weight, exactly w_start at t=0 and w_end at t=total."""
    if t == 0:
        return w_start
    frac = 1.0 - t / total
    return w_end + (w_start - w_end) * math.sin(0.5 * math.pi * math.sqrt(frac**3))


def increment(h_i, h_m, h_e, alpha: float, beta: float) -> np.ndarray:
    """Learning displacement toward the population target and the neighbor."""
    return learning_increment(h_i, h_m, h_e, alpha, beta)


def directional_increment(state: AntennaState, incr: np.ndarray, fitness_fn) -> np.ndarray:
    """Signed probe step: sigma * increment * sign(f(right) - f(left))."""
    diff = fitness_fn(state.right) - fitness_fn(state.left)
    sign = float(np.sign(diff))
    return state.sigma * incr * sign


def decay_step(sigma: float, eta_step: float) -> float:
    return eta_step * sigma


def update_antennae(state: AntennaState, incr: np.ndarray) -> AntennaState:
    """Move both probes apart along the increment by half the probe distance."""
    half = incr * (state.d / 2.0)
    return AntennaState(state.right + half, state.left - half, state.sigma, state.d)


def dpng_update(h_i, i_prev, incr, phi_inc, w: float, lambda_mix: float) -> np.ndarray:
    """Position update: momentum + blended learning and directional terms."""
    return h_i + w * i_prev + lambda_mix * incr + (1.0 - lambda_mix) * phi_inc


def _adaptive_rate(f_value: float, f_avg: float, f_max: float,
                   lo: float, hi: float, steepness: float) -> float:
    if f_value > f_avg:
        return hi
    span = f_max - f_avg
    if span <= 0.0:
        # Uniform population: nothing to discriminate, explore at the max rate.
        return hi
    ratio = (f_value - f_avg) / span
    ratio = min(0.0, max(-1.0, ratio))
    raw = (hi - lo) * math.cos(ratio * math.pi) / (1.0 + math.exp(steepness * 2.0 * ratio)) + lo
    # hi/lo are declared limits; the cosine lobe can undershoot near ratio -1.
    return min(hi, max(lo, raw))


def adaptive_pc(f_prime: float, f_avg: float, f_max: float, cfg: DpngConfig) -> float:
    """Crossover rate for a pair, driven by the better parent's fitness."""
    return _adaptive_rate(f_prime, f_avg, f_max, cfg.pc_min, cfg.pc_max, cfg.steepness)


def adaptive_pm(f_value: float, f_avg: float, f_max: float, cfg: DpngConfig) -> float:
    """Mutation rate for one individual."""
    return _adaptive_rate(f_value, f_avg, f_max, cfg.pm_min, cfg.pm_max, cfg.steepness)


def sigmoid(r, a: float = SIGMOID_STEEPNESS):
    """Saturating logistic 1/(1 + exp(-a*r))."""
    z = np.asarray(a * np.asarray(r, dtype=float))
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out) if out.ndim == 0 else out


def crossover_individuals(h_a: np.ndarray, h_b: np.ndarray, pc: float,
                          rng: np.random.Generator):
    """With probability pc, exchange centroid rows between the pair (coin per row)."""
    if rng.random() >= pc:
        return h_a.copy(), h_b.copy()
    swap = rng.random(h_a.shape[0]) < 0.5
    out_a, out_b = h_a.copy(), h_b.copy()
    out_a[swap] = h_b[swap]
    out_b[swap] = h_a[swap]
    return out_a, out_b


def mutate_individual(h: np.ndarray, pm: float, data_ranges, rng: np.random.Generator) -> np.ndarray:
    """Per-entry Gaussian perturbation (sigma = 10% of the feature range),
    clamped to the observed feature bounds."""
    lo, hi = data_ranges
    mask = rng.random(h.shape) < pm
    noise = rng.standard_normal(h.shape) * (0.1 * (hi - lo))
    mutated = np.clip(h + noise, lo, hi)
    return np.where(mask, mutated, h)


def run_dpng_epmc(data, cfg: DpngConfig) -> DpngResult:
    """Full directional run: per generation, build candidates against a frozen
    snapshot (learning increment, antenna probe, inertia), apply adaptive
    crossover and mutation to the candidates, then retain-or-revert each one,
    optionally reinitialize the worst individual, and re-sort."""
    x = _as_matrix(data)
    rng = np.random.default_rng(cfg.seed)
    ranges = (x.min(axis=0), x.max(axis=0))
    members = [init_individual(x, cfg.n_clusters, rng) for _ in range(cfg.pop_size)]
    members = _sorted_members(members)
    feel = np.ones((cfg.pop_size, cfg.pop_size))
    best = min(members, key=lambda m: m.fit).copy()

    budget = cfg.max_evals if cfg.max_evals is not None else cfg.maxgen * cfg.pop_size
    evals = 0
    sigma = cfg.sigma0
    d = cfg.sigma0 / cfg.s
    result = DpngResult(best, [], [], [], [], 0)

    def fit_fn(h):
        return fitness(h, x)

    for t in range(cfg.iterations):
        if evals >= budget:
            break
        w_t = nonlinear_weight(t, cfg.iterations, cfg.w_start, cfg.w_end) if cfg.enable_inertia else 0.0
        n_elite = elite_count(cfg.pop_size, t, cfg.iterations, cfg.elitnum)
        pool = _pool_probs(cfg.pop_size, n_elite, not cfg.elite_pool)
        full_probs = learn_probs(rank_weights(cfg.pop_size))
        antennae_on = cfg.enable_antenna and sigma > 0.0
        fits = np.array([m.fit for m in members])
        f_avg, f_max = float(fits.mean()), float(fits.max())

        candidates, neighbors, increments, states = [], [], [], []
        for i in range(cfg.pop_size):
            m_idx = roulette(pool, rng)
            window, nprobs = neighbor_probs(feel, i, cfg.radius)
            e_idx = window[roulette(nprobs, rng)]
            if cfg.random_coeffs:
                a, b = rng.random(), rng.random()
            else:
                a, b = cfg.alpha, cfg.beta
            h_i = members[i].h
            inc = increment(h_i, members[m_idx].h, members[e_idx].h, a, b)

            state = members[i].antenna
            if antennae_on:
                if state is None:
                    half = inc * (cfg.d0 / 2.0)
                    state = AntennaState(h_i + half, h_i - half, sigma, d)
                else:
                    state = update_antennae(
                        AntennaState(state.right, state.left, sigma, d), inc
                    )
                phi = directional_increment(state, inc, fit_fn)
                evals += 2
            else:
                phi = np.zeros_like(h_i)

            base = h_i if members[i].i_prev is None else h_i + w_t * members[i].i_prev
            cand = base + cfg.lambda_mix * inc + (1.0 - cfg.lambda_mix) * phi
            candidates.append(np.clip(cand, ranges[0], ranges[1]))
            neighbors.append(e_idx)
            increments.append(inc)
            states.append(state)

        pc_values, pm_values = [], []
        if cfg.enable_adaptive_ga:
            for _ in range(cfg.pop_size // 2):
                a_idx = roulette(full_probs, rng)
                b_idx = roulette(full_probs, rng)
                while b_idx == a_idx:
                    b_idx = roulette(full_probs, rng)
                f_prime = min(members[a_idx].fit, members[b_idx].fit)
                pc = adaptive_pc(f_prime, f_avg, f_max, cfg)
                pc_values.append(pc)
                candidates[a_idx], candidates[b_idx] = crossover_individuals(
                    candidates[a_idx], candidates[b_idx], pc, rng
                )
            for i in range(cfg.pop_size):
                pm = adaptive_pm(members[i].fit, f_avg, f_max, cfg)
                pm_values.append(pm)
                candidates[i] = mutate_individual(candidates[i], pm, ranges, rng)

        for i in range(cfg.pop_size):
            f_new = fit_fn(candidates[i])
            evals += 1
            improved = f_new < members[i].fit
            if f_new <= members[i].fit or rng.random() <= accept_prob(
                t, cfg.iterations, cfg.accept_scale
            ):
                members[i] = ClusterIndividual(candidates[i], f_new, states[i], increments[i])
            else:
                members[i] = ClusterIndividual(members[i].h, members[i].fit, states[i], increments[i])
            update_feel(feel, i, neighbors[i], improved)

        if cfg.enable_elim and rng.random() < cfg.p_elim:
            worst = int(np.argmax([m.fit for m in members]))
            members[worst] = init_individual(x, cfg.n_clusters, rng)
            evals += 1

        members = _sorted_members(members)
        if members[0].fit < best.fit:
            best = members[0].copy()
        result.history.append(members[0].fit)
        result.best_history.append(best.fit)
        result.mean_history.append(float(np.mean([m.fit for m in members])))
        result.elite_counts.append(n_elite)
        result.w_history.append(w_t)
        result.sigma_history.append(sigma)
        result.pc_history.append(float(np.mean(pc_values)) if pc_values else math.nan)
        result.pm_history.append(float(np.mean(pm_values)) if pm_values else math.nan)

        sigma = decay_step(sigma, cfg.eta_step)
        d = sigma / cfg.s

    result.best = best
    result.evaluations = evals
    return result
