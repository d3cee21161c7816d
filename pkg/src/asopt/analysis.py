"""Evaluation battery: error tables, observed-predicted exports, PCA,
binned mutual information, per-cluster community profiles and the adjusted
Rand index."""

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class PcaModel:
    mean: np.ndarray  # (k,)
    components: np.ndarray  # (p, k) orthonormal rows, descending eigenvalue
    eigenvalues: np.ndarray  # (p,)


@dataclass
class MseTable:
    overall: float
    per_column: np.ndarray


def mse_table(pred: np.ndarray, obs: np.ndarray) -> MseTable:
    """Overall and per-output-column mean squared error."""
    pred = np.asarray(pred, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if pred.shape != obs.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {obs.shape}")
    per_col = np.mean((pred - obs) ** 2, axis=0)
    return MseTable(float(per_col.mean()), per_col)


def obs_pred_pairs(pred: np.ndarray, obs: np.ndarray, names=None):
    """Flattened (name, observed, predicted) triples plus the least-squares
    slope/intercept of predicted ~ observed."""
    pred = np.asarray(pred, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if pred.shape != obs.shape:
        raise ValueError("prediction/observation shapes differ")
    n, k = pred.shape
    if names is None:
        names = [f"y{j}" for j in range(k)]
    rows = [
        (names[j], float(obs[i, j]), float(pred[i, j]))
        for i in range(n)
        for j in range(k)
    ]
    o = obs.ravel()
    p = pred.ravel()
    o_center = o - o.mean()
    denom = float(o_center @ o_center)
    if denom == 0.0:
        slope = 0.0
    else:
        slope = float(o_center @ (p - p.mean())) / denom
    intercept = float(p.mean() - slope * o.mean())
    return rows, slope, intercept


def _jacobi_eigh(a: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Rotates pairs until every off-diagonal entry is below tol (relative to
    the matrix scale). Small and slow, but dependable at these sizes.
    """
    a = np.array(a, dtype=float)
    k = a.shape[0]
    v = np.eye(k)
    scale = max(np.abs(a).max(), 1.0)
    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a))).max()
        if off <= tol * scale:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                if abs(a[p, q]) <= tol * scale * 1e-2:
                    continue
                theta = 0.5 * math.atan2(2.0 * a[p, q], a[q, q] - a[p, p])
                c, s = math.cos(theta), math.sin(theta)
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    return np.diag(a).copy(), v


def pca_fit(x: np.ndarray, p: int) -> PcaModel:
    """Principal components of the sample covariance, top-p by eigenvalue."""
    x = np.asarray(x, dtype=float)
    n, k = x.shape
    if n < 2:
        raise ValueError("need at least 2 rows")
    if p > min(n, k):
        raise ValueError(f"p={p} exceeds min(n, k)={min(n, k)}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = _jacobi_eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    components = eigvecs[:, order].T
    return PcaModel(mean, components[:p], eigvals[:p])


def pca_project(model: PcaModel, x: np.ndarray) -> np.ndarray:
    return (np.asarray(x, dtype=float) - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, scores: np.ndarray) -> np.ndarray:
    return np.asarray(scores, dtype=float) @ model.components + model.mean


def mutual_information(x: np.ndarray, y: np.ndarray, bins: int = 10) -> float:
    """Plug-in mutual information from an equal-width joint histogram (nats)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length vectors")
    if len(x) < 2 or bins < 2:
        raise ValueError("need n >= 2 and bins >= 2")
    if x.min() == x.max() or y.min() == y.max():
        return 0.0
    joint, _, _ = np.histogram2d(x, y, bins=bins)
    pxy = joint / joint.sum()
    px = pxy.sum(axis=1)
    py = pxy.sum(axis=0)
    nz = pxy > 0
    outer = np.outer(px, py)
    return float(np.sum(pxy[nz] * np.log(pxy[nz] / outer[nz])))


def core_community(labels: np.ndarray, targets: np.ndarray, n_clusters=None,
                   log_view: bool = False, log_floor: float = 1e-6):
    """Mean target profile per cluster (rows align with cluster ids).

    Empty clusters yield NaN rows and are reported in the returned flag
    vector. With log_view the profile is log10 after flooring at log_floor.
    """
    labels = np.asarray(labels, dtype=int)
    targets = np.asarray(targets, dtype=float)
    if n_clusters is None:
        n_clusters = int(labels.max()) + 1
    out = np.full((n_clusters, targets.shape[1]), np.nan)
    empty = np.zeros(n_clusters, dtype=bool)
    for c in range(n_clusters):
        mask = labels == c
        if mask.any():
            out[c] = targets[mask].mean(axis=0)
        else:
            empty[c] = True
    if log_view:
        filled = ~empty
        out[filled] = np.log10(np.clip(out[filled], log_floor, None))
    return out, empty


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected agreement between two labelings."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("label vectors must have equal length")
    n = len(a)
    _, a_ids = np.unique(a, return_inverse=True)
    _, b_ids = np.unique(b, return_inverse=True)
    table = np.zeros((a_ids.max() + 1, b_ids.max() + 1))
    for i, j in zip(a_ids, b_ids):
        table[i, j] += 1

    def comb2(v):
        return v * (v - 1) / 2.0

    sum_cells = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_rows * sum_cols / total
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))
