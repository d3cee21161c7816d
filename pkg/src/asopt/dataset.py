"""Tabular data handling: ingestion, normalization, splitting and synthesis.

A sample is one WWTP observation: 37 operational/environmental features in
four attribute families plus OTU proportion targets at one taxonomic level.
"""

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

FEATURE_GROUPS = ("influent", "effluent", "reactor_operation", "env_geo")

TARGET_COUNTS = {"phylum": 21, "class": 51, "order": 171}

# The standard 37-feature table. Order is the CSV column order.
_STANDARD_FEATURES = [
    ("Annual average temperature (C)", "env_geo"),
    ("Annual mean of daily maximum temperature (C)", "env_geo"),
    ("Annual mean of daily minimum temperature (C)", "env_geo"),
    ("Sampling month average temperature (C)", "env_geo"),
    ("Sampling moment temperature (C)", "env_geo"),
    ("Annual precipitation (mm)", "env_geo"),
    ("Sampling month precipitation (mm)", "env_geo"),
    ("GDP per capita (dollars)", "env_geo"),
    ("City population", "env_geo"),
    ("Actual influent rate (m3/d)", "influent"),
    ("HRT plant (hr)", "reactor_operation"),
    ("HRT aeration tank (hr)", "reactor_operation"),
    ("SRT (d)", "reactor_operation"),
    ("BOD influent (mg/l)", "influent"),
    ("BOD influent (1+recycle ratio)", "influent"),
    ("BOD aeration tank influent", "influent"),
    ("BOD removal rate", "effluent"),
    ("COD influent (mg/l)", "influent"),
    ("COD influent (1+recycle ratio)", "influent"),
    ("COD aeration tank influent", "influent"),
    ("COD removal rate", "effluent"),
    ("NH4-N influent (mg/l)", "influent"),
    ("NH4-N aeration tank influent", "influent"),
    ("NH4-N removal rate", "effluent"),
    ("TN influent (mg/l)", "influent"),
    ("TN aeration tank influent", "influent"),
    ("TN removal rate", "effluent"),
    ("TP influent (mg/l)", "influent"),
    ("TP aeration tank influent", "influent"),
    ("TP removal rate", "effluent"),
    ("Industrial wastewater percentage", "influent"),
    ("MLSS (mg/l)", "reactor_operation"),
    ("DO (mg/l)", "reactor_operation"),
    ("pH", "reactor_operation"),
    ("Mixed liquid temperature (C)", "reactor_operation"),
    ("Conductivity (uS/cm)", "reactor_operation"),
    ("SVI (ml/g)", "reactor_operation"),
]


class DataError(ValueError):
    """Raised for ingestion and contract violations in this module."""


@dataclass(frozen=True)
class FeatureSchema:
    """Column layout of a dataset: named features with group tags plus targets."""

    feature_names: tuple
    groups: tuple  # one group tag per feature
    target_level: str  # "phylum" | "class" | "order" | "custom"
    target_names: tuple

    def __post_init__(self):
        if len(self.feature_names) != len(self.groups):
            raise DataError("one group tag required per feature")
        bad = sorted(set(self.groups) - set(FEATURE_GROUPS))
        if bad:
            raise DataError(f"unknown feature groups: {bad}")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DataError("duplicate feature names")
        level = self.target_level
        if level in TARGET_COUNTS and len(self.target_names) != TARGET_COUNTS[level]:
            raise DataError(
                f"level '{level}' requires {TARGET_COUNTS[level]} targets, "
                f"got {len(self.target_names)}"
            )

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def n_targets(self) -> int:
        return len(self.target_names)

    def group_indices(self, group: str) -> np.ndarray:
        """Column indices of the features belonging to `group` ('all' keeps every column)."""
        if group == "all":
            return np.arange(self.n_features)
        if group not in FEATURE_GROUPS:
            raise DataError(f"unknown group '{group}', expected one of {FEATURE_GROUPS} or 'all'")
        return np.array([i for i, g in enumerate(self.groups) if g == group], dtype=int)


def standard_schema(level: str) -> FeatureSchema:
    """The 37-feature WWTP schema with generic OTU target names for `level`."""
    level = level.lower()
    if level not in TARGET_COUNTS:
        raise DataError(f"unknown taxonomic level '{level}'")
    names, groups = zip(*_STANDARD_FEATURES)
    targets = tuple(f"OTU_{level}_{i + 1}" for i in range(TARGET_COUNTS[level]))
    return FeatureSchema(names, groups, level, targets)


def custom_schema(feature_names, groups, target_names) -> FeatureSchema:
    return FeatureSchema(tuple(feature_names), tuple(groups), "custom", tuple(target_names))


def _synthetic_schema(in_dim: int, out_dim: int) -> FeatureSchema:
    names = tuple(f"x{i}" for i in range(in_dim))
    groups = tuple("env_geo" for _ in range(in_dim))
    targets = tuple(f"y{i}" for i in range(out_dim))
    return FeatureSchema(names, groups, "custom", targets)


@dataclass
class Dataset:
    """Row-major sample table: features (n, M) and targets (n, N)."""

    features: np.ndarray
    targets: np.ndarray
    schema: FeatureSchema
    norm_state: str = "raw"  # "raw" | "minmax"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.features.ndim != 2 or self.targets.ndim != 2:
            raise DataError("features and targets must be 2-D")
        if self.features.shape[0] != self.targets.shape[0]:
            raise DataError("feature and target row counts differ")
        if self.features.shape[1] != self.schema.n_features:
            raise DataError(
                f"data width {self.features.shape[1]} does not match schema "
                f"({self.schema.n_features} features)"
            )
        if self.targets.shape[1] != self.schema.n_targets:
            raise DataError(
                f"target width {self.targets.shape[1]} does not match schema "
                f"({self.schema.n_targets} targets)"
            )
        if not np.isfinite(self.features).all() or not np.isfinite(self.targets).all():
            raise DataError("non-finite values in dataset")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    def target_row_sums(self) -> np.ndarray:
        """Per-row target sums, recorded as-is (rows are never rescaled)."""
        return self.targets.sum(axis=1)

    def take(self, rows) -> "Dataset":
        return replace(self, features=self.features[rows], targets=self.targets[rows])

    @staticmethod
    def from_arrays(features, targets, schema=None) -> "Dataset":
        features = np.asarray(features, dtype=float)
        targets = np.asarray(targets, dtype=float)
        if schema is None:
            schema = _synthetic_schema(features.shape[1], targets.shape[1])
        return Dataset(features, targets, schema)


@dataclass(frozen=True)
class SplitSpec:
    """Half-open test fraction interval over row order; the rest is train."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi <= 1.0):
            raise DataError(f"invalid split interval [{self.lo}, {self.hi})")


@dataclass
class NormParams:
    """Per-feature min/max of the raw data; serializes to JSON by name."""

    names: tuple
    mins: np.ndarray
    maxs: np.ndarray

    def to_json(self) -> str:
        payload = {
            name: {"min": float(lo), "max": float(hi)}
            for name, lo, hi in zip(self.names, self.mins, self.maxs)
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "NormParams":
        payload = json.loads(text)
        names = tuple(payload.keys())
        mins = np.array([payload[n]["min"] for n in names])
        maxs = np.array([payload[n]["max"] for n in names])
        return NormParams(names, mins, maxs)


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Read a comma-separated table whose header matches `schema` column order.

    Rejects header mismatches (naming the offending columns) and unparseable
    cells (reported with row and column).
    """
    expected = list(schema.feature_names) + list(schema.target_names)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        if header != expected:
            wrong = [
                f"column {i + 1}: got '{got}', expected '{want}'"
                for i, (got, want) in enumerate(zip(header, expected))
                if got != want
            ]
            if len(header) != len(expected):
                wrong.append(f"column count {len(header)}, expected {len(expected)}")
            raise DataError(f"{path}: header mismatch ({'; '.join(wrong)})")
        rows = []
        for row_idx, row in enumerate(reader):
            if not row:
                continue
            if len(row) != len(expected):
                raise DataError(f"{path}: row {row_idx} has {len(row)} cells, expected {len(expected)}")
            values = []
            for col_idx, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: unparseable cell at row {row_idx}, "
                        f"column '{expected[col_idx]}': '{cell}'"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(
                        f"{path}: non-finite value at row {row_idx}, column '{expected[col_idx]}'"
                    )
                values.append(v)
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    table = np.array(rows, dtype=float)
    m = schema.n_features
    features, targets = table[:, :m], table[:, m:]
    if (targets < 0).any():
        bad = int(np.argwhere((targets < 0).any(axis=1))[0][0])
        raise DataError(f"{path}: negative target proportion at row {bad}")
    return Dataset(features, targets, schema, norm_state="raw")


def minmax_matrix(x: np.ndarray, names=None):
    """Affinely map each column of `x` to [0, 1]; constant columns map to 0.5."""
    x = np.asarray(x, dtype=float)
    mins = x.min(axis=0)
    maxs = x.max(axis=0)
    span = maxs - mins
    constant = span == 0
    safe = np.where(constant, 1.0, span)
    out = (x - mins) / safe
    out[:, constant] = 0.5
    if names is None:
        names = tuple(f"c{i}" for i in range(x.shape[1]))
    return out, NormParams(tuple(names), mins, maxs)


def denormalize_matrix(x01: np.ndarray, params: NormParams) -> np.ndarray:
    span = params.maxs - params.mins
    return x01 * span + params.mins


def minmax_normalize(d: Dataset):
    """Normalize every feature column to [0, 1]; targets are left untouched."""
    if d.norm_state != "raw":
        raise DataError("dataset already normalized")
    feats, params = minmax_matrix(d.features, d.schema.feature_names)
    return replace(d, features=feats, norm_state="minmax"), params


def denormalize(d: Dataset, params: NormParams) -> Dataset:
    if d.norm_state != "minmax":
        raise DataError("dataset is not in normalized state")
    feats = denormalize_matrix(d.features, params)
    return replace(d, features=feats, norm_state="raw")


def split(d: Dataset, s: SplitSpec):
    """Contiguous train/test split by row order; test rows are [floor(lo*n), floor(hi*n))."""
    n = d.n_rows
    start = math.floor(s.lo * n)
    stop = math.floor(s.hi * n)
    test_idx = np.arange(start, stop)
    train_idx = np.concatenate([np.arange(0, start), np.arange(stop, n)])
    if len(test_idx) == 0:
        raise DataError(f"split [{s.lo}, {s.hi}) leaves an empty test set for n={n}")
    if len(train_idx) == 0:
        raise DataError(f"split [{s.lo}, {s.hi}) leaves an empty train set for n={n}")
    return d.take(train_idx), d.take(test_idx)


def paper_splits():
    """The three standard evaluation folds (test 80-100%, 0-20%, 60-80%)."""
    return [SplitSpec(0.8, 1.0), SplitSpec(0.0, 0.2), SplitSpec(0.6, 0.8)]


def synth_blobs(k: int, per_cluster: int, dim: int, separation: float, seed: int):
    """Isotropic unit-variance Gaussian clusters with centers >= `separation` apart.

    Returns (Dataset, true_labels). Feature-only data: targets carry the
    one-hot cluster membership so the table stays self-describing.
    """
    if k < 2 or dim < 1 or separation <= 0:
        raise DataError("need k >= 2, dim >= 1, separation > 0")
    rng = np.random.default_rng(seed)
    centers = np.zeros((k, dim))
    placed = 1  # first center at the origin
    while placed < k:
        direction = rng.standard_normal(dim)
        direction /= np.linalg.norm(direction)
        candidate = direction * separation * (1.0 + rng.random()) * placed
        dists = np.linalg.norm(centers[:placed] - candidate, axis=1)
        if (dists >= separation).all():
            centers[placed] = candidate
            placed += 1
    features = np.vstack(
        [centers[c] + rng.standard_normal((per_cluster, dim)) for c in range(k)]
    )
    labels = np.repeat(np.arange(k), per_cluster)
    targets = np.eye(k)[labels]
    schema = FeatureSchema(
        tuple(f"x{i}" for i in range(dim)),
        tuple("env_geo" for _ in range(dim)),
        "custom",
        tuple(f"cluster{c}" for c in range(k)),
    )
    return Dataset(features, targets, schema), labels


def synth_regression(n: int, in_dim: int, out_dim: int, noise: float, seed: int) -> Dataset:
    """Smooth nonlinear regression table: uniform features, sine-mixture targets
    plus Gaussian noise of scale `noise`."""
    if n < 1 or in_dim < 1 or out_dim < 1:
        raise DataError("need n, in_dim, out_dim >= 1")
    rng = np.random.default_rng(seed)
    features = rng.random((n, in_dim))
    # Mixing weights drawn before the noise so noise=0 and noise>0 share the map.
    w1 = rng.normal(0.0, 1.0, (in_dim, out_dim))
    w2 = rng.normal(0.0, 1.0, (in_dim, out_dim))
    phase = rng.uniform(0.0, 2 * np.pi, out_dim)
    targets = 0.5 * np.sin(features @ w1 + phase) + 0.5 * np.tanh(features @ w2)
    if noise > 0:
        targets = targets + noise * rng.standard_normal((n, out_dim))
    return Dataset(features, targets, _synthetic_schema(in_dim, out_dim))
