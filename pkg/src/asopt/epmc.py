"""Emotional-preference / migratory-behavior clustering (EPMC baseline).

A population of centroid matrices is sorted by fitness each iteration. Every
individual learns from a rank-roulette target (restricted to the elite set by
default) and from a neighbor chosen by accumulated credibility scores, with a
simulated-annealing style retention rule for worsening moves.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .cluster_core import ClusterIndividual, fitness, init_individual


@dataclass
class EpmcConfig:
    pop_size: int = 15
    elitnum: int = 2
    iterations: int = 100
    n_clusters: int = 10
    runs: int = 25
    alpha: float = 0.8
    beta: float = 0.2
    radius: int = 2
    seed: int = 0
    elite_pool: bool = True  # roulette over elites only; False widens to everyone
    accept_scale: float = None  # None keeps the literal exp(-t) retention
    max_evals: int = None  # optional cap on candidate evaluations

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise ValueError("alpha and beta must lie in [0, 1]")
        if self.alpha + self.beta > 1.0 + 1e-12:
            raise ValueError("alpha + beta must not exceed 1")
        if self.pop_size < 2 * self.radius + 1:
            raise ValueError("pop_size must be >= 2*radius + 1")
        if self.elitnum < 1 or self.elitnum > self.pop_size:
            raise ValueError("elitnum must be in [1, pop_size]")


@dataclass
class EpmcResult:
    best: ClusterIndividual  # best-so-far over the whole run
    history: list  # population best per iteration
    best_history: list  # best-so-far per iteration (non-increasing)
    mean_history: list
    elite_counts: list
    evaluations: int


def rank_weights(pop_size: int) -> np.ndarray:
    """Learning weight per rank: (NP - i + 1)/NP, heaviest for the best."""
    ranks = np.arange(1, pop_size + 1)
    return (pop_size - ranks + 1) / pop_size


def learn_probs(weights: np.ndarray) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    return weights / weights.sum()


def roulette(probs: np.ndarray, rng: np.random.Generator, u=None) -> int:
    """Cumulative-sum selection; `u` overrides the uniform draw for tests."""
    if u is None:
        u = rng.random()
    cum = np.cumsum(probs)
    return int(min(np.searchsorted(cum, u, side="left"), len(probs) - 1))


def update_feel(feel: np.ndarray, i: int, j: int, improved: bool) -> None:
    """Credibility bump for the learned-from neighbor, floored at 1."""
    feel[i, j] = max(1.0, feel[i, j] + (1.0 if improved else -1.0))


def neighbor_probs(feel: np.ndarray, i: int, radius: int):
    """Normalized credibility over the rank window around i, self excluded.

    Returns (window indices, probabilities); windows clamp at the edges.
    """
    pop_size = feel.shape[0]
    lo = max(0, i - radius)
    hi = min(pop_size - 1, i + radius)
    window = [j for j in range(lo, hi + 1) if j != i]
    vals = np.array([feel[i, j] for j in window], dtype=float)
    return window, vals / vals.sum()


def elite_count(pop_size: int, t: int, total: int, elitnum: int) -> int:
    """Elite set size: grows with the iteration, never below elitnum."""
    return max(math.floor(pop_size * t / total), elitnum)


def learning_increment(h_i, h_m, h_e, alpha: float, beta: float) -> np.ndarray:
    """Pull toward the population target and the chosen neighbor."""
    return alpha * (h_m - h_i) + beta * (h_e - h_i)


def epmc_update(h_i, h_m, h_e, alpha: float, beta: float) -> np.ndarray:
    return h_i + learning_increment(h_i, h_m, h_e, alpha, beta)


def accept_prob(t: int, total: int = None, scale: float = None) -> float:
    """Retention probability for worsening moves: exp(-t).

    With `scale` set the exponent becomes -(t/total)*scale, stretching the
    annealing over the whole run instead of the first ~10 iterations.
    """
    if scale is None:
        return math.exp(-float(t))
    return math.exp(-(t / total) * scale)


def retain_or_revert(old: ClusterIndividual, new: ClusterIndividual,
                     rng: np.random.Generator, t: int, total=None, scale=None) -> ClusterIndividual:
    """Keep improvements always; keep worsening moves only early on."""
    if new.fit <= old.fit:
        return new
    if rng.random() <= accept_prob(t, total, scale):
        return new
    return old


def _as_matrix(data) -> np.ndarray:
    return data.features if hasattr(data, "features") else np.asarray(data, dtype=float)


def _sorted_members(members):
    order = np.argsort([m.fit for m in members], kind="stable")
    return [members[j] for j in order]


def _pool_probs(pop_size: int, n_elite: int, whole_pop: bool) -> np.ndarray:
    probs = learn_probs(rank_weights(pop_size))
    if whole_pop:
        return probs
    pool = probs[:n_elite]
    return pool / pool.sum()


def run_epmc(data, cfg: EpmcConfig) -> EpmcResult:
    """Iterate the learn/retain cycle for cfg.iterations rounds.

    Candidates for a round are built against a frozen snapshot of the sorted
    population; evaluation, retention and credibility updates then apply in
    index order, and the population is re-sorted once per round.
    """
    x = _as_matrix(data)
    rng = np.random.default_rng(cfg.seed)
    # Candidates are kept inside the data bounding box; the ratio objective is
    # otherwise gameable by runaway centroids. The baseline update is a convex
    # combination of in-box points, so this clip never alters it.
    box = (x.min(axis=0), x.max(axis=0))
    members = [init_individual(x, cfg.n_clusters, rng) for _ in range(cfg.pop_size)]
    members = _sorted_members(members)
    feel = np.ones((cfg.pop_size, cfg.pop_size))
    best = min(members, key=lambda m: m.fit).copy()
    history, best_history, mean_history, elite_counts = [], [], [], []
    evals = 0

    for t in range(cfg.iterations):
        if cfg.max_evals is not None and evals >= cfg.max_evals:
            break
        n_elite = elite_count(cfg.pop_size, t, cfg.iterations, cfg.elitnum)
        pool = _pool_probs(cfg.pop_size, n_elite, not cfg.elite_pool)

        candidates = []
        for i in range(cfg.pop_size):
            m_idx = roulette(pool, rng)
            window, nprobs = neighbor_probs(feel, i, cfg.radius)
            e_idx = window[roulette(nprobs, rng)]
            cand = members[i].h + learning_increment(
                members[i].h, members[m_idx].h, members[e_idx].h, cfg.alpha, cfg.beta
            )
            candidates.append((np.clip(cand, box[0], box[1]), e_idx))

        for i, (cand_h, e_idx) in enumerate(candidates):
            f_new = fitness(cand_h, x)
            evals += 1
            improved = f_new < members[i].fit
            if f_new <= members[i].fit or rng.random() <= accept_prob(
                t, cfg.iterations, cfg.accept_scale
            ):
                members[i] = ClusterIndividual(cand_h, f_new)
            update_feel(feel, i, e_idx, improved)

        members = _sorted_members(members)
        if members[0].fit < best.fit:
            best = members[0].copy()
        history.append(members[0].fit)
        best_history.append(best.fit)
        mean_history.append(float(np.mean([m.fit for m in members])))
        elite_counts.append(n_elite)

    return EpmcResult(best, history, best_history, mean_history, elite_counts, evals)
