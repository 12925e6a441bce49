"""Synthetic task generators, a delimited-file loader, scaling, splits.

All features fed to the models must land in [-1, 1] (the encoding domain),
so the loader pairs with a min-max scaler fitted on the training split;
test values outside the fitted range clamp to the boundary.
"""

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "ScalingStats",
    "REGRESSION_TARGETS",
    "gen_regression",
    "gen_classification",
    "load_delimited",
    "save_delimited",
    "minmax_scale",
    "apply_scale",
    "split",
    "feature_pairs",
]

REGRESSION_TARGETS = {
    "x2": lambda x: x * x,
    "exp": np.exp,
    "sin": np.sin,
    "abs": np.abs,
}

INNER_RADIUS = 0.55
OUTER_RADIUS = 0.65


@dataclass(frozen=True)
class Dataset:
    """N samples of D features with continuous or class-label targets."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple
    kind: str  # "regression" | "classification"

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        if self.kind not in ("regression", "classification"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        y = np.asarray(
            self.y, dtype=np.intp if self.kind == "classification" else np.float64
        )
        if X.shape[0] < 1 or y.shape[0] != X.shape[0]:
            raise ValueError("need at least one row and matching target length")
        if np.isnan(X).any() or (self.kind == "regression" and np.isnan(y).any()):
            raise ValueError("dataset contains NaN entries")
        names = tuple(self.feature_names) if self.feature_names else tuple(
            f"f{i}" for i in range(X.shape[1])
        )
        if len(names) != X.shape[1]:
            raise ValueError("one feature name per column required")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def n_classes(self):
        if self.kind != "classification":
            raise ValueError("not a classification dataset")
        return int(self.y.max()) + 1

    def subset(self, rows):
        return Dataset(self.X[rows], self.y[rows], self.feature_names, self.kind)


@dataclass(frozen=True)
class ScalingStats:
    """Per-feature min/max recorded from the fitting split."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, float)
        hi = np.asarray(self.hi, float)
        if lo.shape != hi.shape or (hi < lo).any():
            raise ValueError("per-feature max must be >= min")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


def gen_regression(fn, n_samples, noise_std, rng):
    """1-D regression data: x uniform on [-1,1], y = f(x) + N(0, sigma^2)."""
    if fn not in REGRESSION_TARGETS:
        raise ValueError(
            f"unknown target {fn!r}; choose from {sorted(REGRESSION_TARGETS)}"
        )
    if n_samples < 1 or noise_std < 0:
        raise ValueError("need n_samples >= 1 and noise_std >= 0")
    x = rng.uniform(-1.0, 1.0, size=n_samples)
    y = REGRESSION_TARGETS[fn](x)
    if noise_std > 0:
        y = y + rng.normal(0.0, noise_std, size=n_samples)
    return Dataset(x[:, None], y, ("x",), "regression")


def gen_classification(n_per_class, rng):
    """Nonlinearly separable 2-D task: an inner disk vs. an outer region.

    Class 1 fills the disk of radius 0.55; class 0 fills the square
    [-1,1]^2 outside radius 0.65, leaving a clear margin annulus.
    """
    if n_per_class < 1:
        raise ValueError("need n_per_class >= 1")
    # inner disk via radius transform, outer region via rejection
    r = INNER_RADIUS * np.sqrt(rng.uniform(0, 1, n_per_class))
    phi = rng.uniform(0, 2 * np.pi, n_per_class)
    inner = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
    outer = np.empty((0, 2))
    while outer.shape[0] < n_per_class:
        cand = rng.uniform(-1, 1, (4 * n_per_class, 2))
        keep = np.hypot(cand[:, 0], cand[:, 1]) >= OUTER_RADIUS
        outer = np.concatenate([outer, cand[keep]])[:n_per_class]
    X = np.concatenate([outer, inner])
    y = np.concatenate([np.zeros(n_per_class, int), np.ones(n_per_class, int)])
    return Dataset(X, y, ("x1", "x2"), "classification")


def load_delimited(path, target_column, kind):
    """Load a comma-separated file with one header row.

    ``target_column`` selects the target by header name or integer index.
    Classification labels may be arbitrary strings; they map to dense
    0-based indices in first-appearance order.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if isinstance(target_column, int) or str(target_column).lstrip("-").isdigit():
        t_idx = int(target_column)
        if not -len(header) <= t_idx < len(header):
            raise ValueError(f"target column index {t_idx} out of range")
        t_idx %= len(header)
    else:
        if target_column not in header:
            raise ValueError(f"target column {target_column!r} not in header {header}")
        t_idx = header.index(target_column)

    feat_idx = [i for i in range(len(header)) if i != t_idx]
    X = np.empty((len(rows), len(feat_idx)))
    raw_targets = []
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {r + 1} has {len(row)} cells, expected {len(header)}")
        for j, i in enumerate(feat_idx):
            try:
                X[r, j] = float(row[i])
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric cell {row[i]!r} at row {r + 1}, "
                    f"column {header[i]!r}"
                ) from None
        raw_targets.append(row[t_idx])

    if kind == "classification":
        order = {}
        y = np.array([order.setdefault(t, len(order)) for t in raw_targets])
    else:
        try:
            y = np.array([float(t) for t in raw_targets])
        except ValueError as exc:
            raise ValueError(f"{path}: non-numeric target: {exc}") from None
    names = tuple(header[i] for i in feat_idx)
    return Dataset(X, y, names, kind)


def save_delimited(ds: Dataset, path, target_name="target"):
    """Write a dataset back out in the loader's format."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + [target_name])
        for i in range(ds.n_samples):
            row = [repr(float(v)) for v in ds.X[i]]
            row.append(str(ds.y[i]) if ds.kind == "classification" else repr(float(ds.y[i])))
            writer.writerow(row)


def minmax_scale(train: Dataset):
    """Map each feature affinely so the train range becomes [-1, 1].

    Constant features map to 0.  Returns the scaled dataset and the stats
    needed to scale other splits consistently.
    """
    stats = ScalingStats(lo=train.X.min(axis=0), hi=train.X.max(axis=0))
    return apply_scale(stats, train), stats


def apply_scale(stats: ScalingStats, ds: Dataset):
    """Scale with previously fitted stats; out-of-range values clamp."""
    span = stats.hi - stats.lo
    safe = np.where(span > 0, span, 1.0)
    scaled = 2.0 * (ds.X - stats.lo) / safe - 1.0
    scaled = np.where(span > 0, scaled, 0.0)
    return Dataset(np.clip(scaled, -1.0, 1.0), ds.y, ds.feature_names, ds.kind)


def split(ds: Dataset, test_fraction, rng):
    """Random disjoint train/test partition; deterministic under seed."""
    if ds.n_samples < 5:
        raise ValueError("need at least 5 samples to split")
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    perm = rng.permutation(ds.n_samples)
    n_test = int(round(test_fraction * ds.n_samples))
    return ds.subset(np.sort(perm[n_test:])), ds.subset(np.sort(perm[:n_test]))


def feature_pairs(ds: Dataset):
    """All C(D,2) two-feature sub-datasets, in lexicographic index order."""
    if ds.n_features < 2:
        raise ValueError("need at least two features to form pairs")
    out = []
    for i in range(ds.n_features):
        for j in range(i + 1, ds.n_features):
            out.append(
                Dataset(
                    ds.X[:, [i, j]],
                    ds.y,
                    (ds.feature_names[i], ds.feature_names[j]),
                    ds.kind,
                )
            )
    return out
