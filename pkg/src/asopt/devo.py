"""Real-vector differential evolution with an annealed scaling factor.

rand/1 mutation, binomial crossover and greedy one-to-one selection. The
scaling factor starts near 2*F0 and decays to F0 over the run.
"""

import math
from dataclasses import dataclass

import numpy as np


class FitnessError(RuntimeError):
    """Raised when the objective returns a non-finite value."""

    def __init__(self, value, x):
        super().__init__(f"non-finite fitness {value!r}")
        self.x = np.asarray(x)


@dataclass
class DeConfig:
    pop_size: int = 20
    f0: float = 0.9
    cr: float = 0.4
    max_gen: int = 20
    seed: int = 0
    bounds: tuple = None  # optional (lo, hi) arrays or scalars

    def __post_init__(self):
        if self.pop_size < 4:
            raise ValueError("pop_size must be >= 4 (mutation draws two distinct partners)")
        if self.f0 <= 0:
            raise ValueError("f0 must be positive")
        if not (0.0 <= self.cr <= 1.0):
            raise ValueError("cr must lie in [0, 1]")
        if self.max_gen < 0:
            raise ValueError("max_gen must be >= 0")


@dataclass
class DeIndividual:
    x: np.ndarray
    fit: float


@dataclass
class DeResult:
    best: DeIndividual
    history: list  # best fitness after init and after each generation
    mean_history: list
    evaluations: int


def adaptive_f(f0: float, max_gen: int, gen: int) -> float:
    """Annealed scaling factor: f0 * 2**exp(1 - max_gen/(max_gen + 1 - gen))."""
    if gen < 0 or gen > max_gen:
        raise ValueError(f"generation {gen} outside [0, {max_gen}]")
    phi = math.exp(1.0 - max_gen / (max_gen + 1.0 - gen))
    return f0 * 2.0**phi


def _clamp(x: np.ndarray, bounds) -> np.ndarray:
    if bounds is None:
        return x
    lo, hi = bounds
    return np.clip(x, lo, hi)


def mutate(pop: np.ndarray, i: int, f: float, rng: np.random.Generator,
           bounds=None, partners=None) -> np.ndarray:
    """Donor vector x_i + f*(x_r1 - x_r2) with r1, r2 distinct from each other and i.

    `partners` fixes (r1, r2) for tests.
    """
    n = len(pop)
    if n < 3:
        raise ValueError("population too small for mutation")
    if partners is None:
        others = [j for j in range(n) if j != i]
        r1, r2 = rng.choice(others, size=2, replace=False)
    else:
        r1, r2 = partners
    donor = pop[i] + f * (pop[r1] - pop[r2])
    return _clamp(donor, bounds)


def binomial_cross(target: np.ndarray, donor: np.ndarray, cr: float,
                   rng: np.random.Generator, j_rand=None) -> np.ndarray:
    """Per-gene exchange keeping at least the forced j_rand donor gene."""
    d = len(target)
    if len(donor) != d:
        raise ValueError("target/donor length mismatch")
    if j_rand is None:
        j_rand = int(rng.integers(0, d))
    take = rng.random(d) <= cr
    take[j_rand] = True
    return np.where(take, donor, target)


def select_greedy(target: DeIndividual, trial: DeIndividual) -> DeIndividual:
    """Keep the lower-fitness individual; ties admit the trial."""
    return trial if trial.fit <= target.fit else target


def _evaluate(fitness, x) -> float:
    v = float(fitness(x))
    if not math.isfinite(v):
        raise FitnessError(v, x)
    return v


def run_de(fitness, cfg: DeConfig, init) -> DeResult:
    """Evolve cfg.max_gen generations from `init` (vectors, or a sampler(rng) callable).

    history[0] is the best initial fitness; one entry follows per generation,
    and greedy selection keeps the sequence non-increasing.
    """
    rng = np.random.default_rng(cfg.seed)
    if callable(init):
        vectors = [np.asarray(init(rng), dtype=float) for _ in range(cfg.pop_size)]
    else:
        vectors = [np.asarray(v, dtype=float) for v in init]
        if len(vectors) < 4:
            raise ValueError("initial population must have >= 4 members")
    vectors = [_clamp(v, cfg.bounds) for v in vectors]
    pop = [DeIndividual(v, _evaluate(fitness, v)) for v in vectors]
    evals = len(pop)

    def best_of(members):
        return min(members, key=lambda ind: ind.fit)

    history = [best_of(pop).fit]
    mean_history = [float(np.mean([p.fit for p in pop]))]
    for gen in range(cfg.max_gen):
        f = adaptive_f(cfg.f0, cfg.max_gen, gen)
        snapshot = np.array([p.x for p in pop])
        trials = []
        for i in range(len(pop)):
            donor = mutate(snapshot, i, f, rng, cfg.bounds)
            trial = binomial_cross(snapshot[i], donor, cfg.cr, rng)
            trials.append(trial)
        for i, trial in enumerate(trials):
            cand = DeIndividual(trial, _evaluate(fitness, trial))
            evals += 1
            pop[i] = select_greedy(pop[i], cand)
        history.append(best_of(pop).fit)
        mean_history.append(float(np.mean([p.fit for p in pop])))
    winner = best_of(pop)
    return DeResult(DeIndividual(winner.x.copy(), winner.fit), history, mean_history, evals)
