"""Shared clustering substrate: centroid-matrix individuals, nearest-centroid
assignment, and the cohesion/separation ratio fitness.
"""

from dataclasses import dataclass, field

import numpy as np

# Returned instead of inf when centroids collapse, so ranking stays finite.
DEGENERATE_PENALTY = 1e12
SEPARATION_EPS = 1e-9


@dataclass
class AntennaState:
    """Two probe positions straddling an individual, with the shared step state."""

    right: np.ndarray
    left: np.ndarray
    sigma: float
    d: float


@dataclass
class ClusterIndividual:
    """A candidate solution: one centroid per row, fitness cached for the
    current matrix. `antenna` and `i_prev` carry per-individual search state
    used by the directional variant."""

    h: np.ndarray  # (l, k) centroid matrix
    fit: float
    antenna: AntennaState = None
    i_prev: np.ndarray = None

    def copy(self) -> "ClusterIndividual":
        return ClusterIndividual(self.h.copy(), self.fit, self.antenna, self.i_prev)


def assign(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Nearest-centroid labels under Euclidean distance; ties go to the lowest index."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    diffs = x[:, None, :] - h[None, :, :]
    d2 = np.einsum("ilk,ilk->il", diffs, diffs)
    return d2.argmin(axis=1)


def fitness(h: np.ndarray, x: np.ndarray) -> float:
    """Cluster-count-weighted cohesion over minimum centroid separation.

    Zero when every instance sits exactly on its centroid; a large finite
    penalty when two centroids (nearly) coincide.
    """
    h = np.asarray(h, dtype=float)
    x = np.asarray(x, dtype=float)
    n_clusters = h.shape[0]
    pair_d = np.linalg.norm(h[:, None, :] - h[None, :, :], axis=2)
    iu = np.triu_indices(n_clusters, k=1)
    min_sep = pair_d[iu].min()
    if min_sep < SEPARATION_EPS:
        return DEGENERATE_PENALTY
    labels = assign(x, h)
    cohesion = np.linalg.norm(x - h[labels], axis=1).sum()
    return float(n_clusters * cohesion / min_sep)


def init_individual(x: np.ndarray, n_clusters: int, rng: np.random.Generator) -> ClusterIndividual:
    """Forgy-style start: centroids are distinct data rows sampled without replacement."""
    n = x.shape[0]
    if n < n_clusters:
        raise ValueError(f"need at least {n_clusters} rows, got {n}")
    idx = rng.choice(n, size=n_clusters, replace=False)
    h = np.array(x[idx], dtype=float)
    return ClusterIndividual(h, fitness(h, x))
