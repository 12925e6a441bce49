"""Metrics, the polynomial-basis OLS baseline, and study runners.

Each runner reproduces one of the studies at desk scale: regression
sweeps over sample size and noise, the nonlinear classification task,
benchmark CSV datasets over feature pairs, and the coverage protocol
that measures how often a parameter-matched sketched model approximates
a randomly drawn statevector circuit.

Runners return (rows, summary); rows are flat dicts destined for the
results CSV, summary is JSON-serializable and echoes config and seeds
for exact replay.  Everything is deterministic under the master seed,
including under a worker pool (results are keyed, not ordered).
"""

import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import data as data_mod
from .data import gen_classification, gen_regression, REGRESSION_TARGETS
from .optimize import LossSpec, TrainConfig, train
from .qcl import CircuitSpec, EncodingSpec, Observable, QclPredictor
from .qcll import QcllModel

__all__ = [
    "rmse",
    "classification_error",
    "pearson",
    "PolyBaseline",
    "MetricReport",
    "RegressionSuiteConfig",
    "ClassificationSuiteConfig",
    "BenchmarkSuiteConfig",
    "CoverageConfig",
    "run_regression_suite",
    "run_classification_suite",
    "run_benchmark_suite",
    "run_coverage",
    "write_results_csv",
    "write_summary_json",
]


# ---- metrics ------------------------------------------------------------


def rmse(pred, target):
    """Root mean squared error."""
    p = np.asarray(pred, float)
    t = np.asarray(target, float)
    if p.shape != t.shape or p.size == 0:
        raise ValueError(f"shape mismatch or empty: {p.shape} vs {t.shape}")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def classification_error(pred_labels, true_labels):
    """Fraction of mismatched labels, in [0, 1]."""
    p = np.asarray(pred_labels)
    t = np.asarray(true_labels)
    if p.shape != t.shape or p.size == 0:
        raise ValueError(f"shape mismatch or empty: {p.shape} vs {t.shape}")
    return float(np.mean(p != t))


def pearson(a, b):
    """Product-moment correlation; rejects degenerate (zero-variance) input."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("need two equal-length vectors of size >= 2")
    da = a - a.mean()
    db = b - b.mean()
    na = np.linalg.norm(da)
    nb = np.linalg.norm(db)
    if na == 0 or nb == 0:
        raise ValueError("zero-variance input has no defined correlation")
    return float(np.dot(da, db) / (na * nb))


# ---- polynomial baseline ------------------------------------------------


def poly_features(X, qubits_per_dim):
    """The monomial-in-(x, sqrt(1-x^2)) basis the encodings span.

    Per dimension d the basis is x^j * sqrt(1-x^2)^(Q_d - j) for
    j = Q_d .. 0; multiple dimensions contribute all cross products.
    """
    X = np.atleast_2d(np.asarray(X, float))
    per_dim = []
    for d, qd in enumerate(qubits_per_dim):
        x = X[:, d]
        root = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
        per_dim.append([x ** j * root ** (qd - j) for j in range(qd, -1, -1)])
    cols = [
        np.prod(np.stack(combo, axis=0), axis=0)
        for combo in itertools.product(*per_dim)
    ]
    return np.stack(cols, axis=1)


class PolyBaseline:
    """Ordinary least squares over the encoding's polynomial basis.

    Rank-deficient systems fall back to the pseudo-inverse solution via
    SVD-based least squares rather than failing.  Classification fits
    one-hot indicators per class and predicts the argmax.
    """

    def __init__(self, qubits_per_dim=(6,), kind="regression"):
        self.qubits_per_dim = tuple(qubits_per_dim)
        self.kind = kind
        self.coef = None

    def fit(self, X, y):
        F = poly_features(X, self.qubits_per_dim)
        if self.kind == "classification":
            y = np.asarray(y, int)
            target = np.eye(int(y.max()) + 1)[y]
        else:
            target = np.asarray(y, float)
        self.coef, *_ = np.linalg.lstsq(F, target, rcond=None)
        return self

    def predict(self, X):
        if self.coef is None:
            raise ValueError("fit before predict")
        out = poly_features(X, self.qubits_per_dim) @ self.coef
        if self.kind == "classification":
            return np.argmax(out, axis=1)
        return out


# ---- reporting ----------------------------------------------------------


@dataclass
class MetricReport:
    """One aggregated metric with its per-repetition values."""

    metric: str
    values: list
    metadata: dict = field(default_factory=dict)

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def std(self):
        return float(np.std(self.values))

    def as_dict(self):
        return {
            "metric": self.metric,
            "mean": self.mean,
            "std": self.std,
            "values": [float(v) for v in self.values],
            **self.metadata,
        }


def aggregate(rows, group_keys, value_key, metric_name):
    """Group flat rows and wrap each group's values in a MetricReport."""
    groups = {}
    for row in rows:
        key = tuple(row[k] for k in group_keys)
        groups.setdefault(key, []).append(row[value_key])
    return [
        MetricReport(
            metric=metric_name,
            values=vals,
            metadata=dict(zip(group_keys, key)),
        )
        for key, vals in groups.items()
    ]


def write_results_csv(rows, path, columns=None):
    """One row per metric point; float cells use repr for exact replay."""
    if not rows:
        raise ValueError("no rows to write")
    if columns is None:
        columns = list(rows[0].keys())

    def cell(v):
        if isinstance(v, float):
            return repr(v)
        return str(v)

    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(cell(row.get(c, "")) for c in columns) + "\n")


def write_summary_json(summary, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parallel_map(fn, items, workers):
    if workers <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _child_seed(master_seed, *key):
    """Stable per-task seed independent of execution order."""
    return np.random.SeedSequence([int(master_seed)] + [int(k) for k in key])


def _class_observables(dim, n_classes, support=5):
    """Disjoint diagonal 0/1 observables, one per class."""
    width = support if support * n_classes <= dim else dim // n_classes
    if width < 1:
        raise ValueError(f"cannot fit {n_classes} observables into dim {dim}")
    return [
        Observable.diag_support(dim, c * width, (c + 1) * width)
        for c in range(n_classes)
    ]


def _build_predictor(model, encoding, depth, n_angles, n_outputs, sketch_dim,
                     variant, n_classes, seed):
    """QCL or QCLL predictor with matched parameter counts."""
    if model == "qcl":
        circuit = CircuitSpec.sample(encoding.n_qubits, depth, seed)
        obs = _class_observables(1 << encoding.n_qubits, max(n_classes, 1))
        return QclPredictor(encoding, circuit, obs[: max(n_classes, 1)])
    if model == "qcll":
        obs = _class_observables(n_outputs, max(n_classes, 1))
        return QcllModel(
            encoding=encoding,
            n_angles=n_angles,
            n_outputs=n_outputs,
            sketch_dim=sketch_dim,
            variant=variant,
            observables=obs[: max(n_classes, 1)],
            seed=seed,
        )
    raise ValueError(f"unknown model {model!r}")


def _predict_values(predictor, a, b, theta, X):
    raw = predictor.raw_outputs(theta, X)
    return (a * raw + b)[:, 0]


def _predict_labels(predictor, a, b, theta, X):
    logits = a * predictor.raw_outputs(theta, X) + b
    return np.argmax(logits, axis=1)


# ---- regression suite ---------------------------------------------------


@dataclass
class RegressionSuiteConfig:
    functions: tuple = ("x2",)
    sample_sizes: tuple = (100,)
    noise_levels: tuple = (0.0,)
    models: tuple = ("qcl", "qcll", "baseline")
    repetitions: int = 10
    qubits: int = 6
    depth: int = 6
    n_outputs: int = 10
    sketch_dim: int = 100
    variant: str = "eq14"
    grid_size: int = 201
    train: TrainConfig = field(
        default_factory=lambda: TrainConfig(restarts=10, optimizer="quasi-newton")
    )
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for fn in self.functions:
            if fn not in REGRESSION_TARGETS:
                raise ValueError(f"unknown target function {fn!r}")


def _regression_task(args):
    cfg, fn, n, sigma, rep = args
    rng = np.random.default_rng(_child_seed(cfg.master_seed, 0, rep))
    ds = gen_regression(fn, n, sigma, rng)
    grid = np.linspace(-1.0, 1.0, cfg.grid_size)[:, None]
    truth = REGRESSION_TARGETS[fn](grid[:, 0])
    enc = EncodingSpec((cfg.qubits,))
    n_angles = cfg.depth * cfg.qubits
    out = []
    for model in cfg.models:
        model_seed = _child_seed(cfg.master_seed, 1, rep).generate_state(1)[0]
        if model == "baseline":
            bl = PolyBaseline((cfg.qubits,)).fit(ds.X, ds.y)
            grid_pred = bl.predict(grid)
            train_mse = float(np.mean((bl.predict(ds.X) - ds.y) ** 2))
            init_cost = float("nan")
            final_cost = train_mse * n
        else:
            pred = _build_predictor(
                model, enc, cfg.depth, n_angles, cfg.n_outputs,
                cfg.sketch_dim, cfg.variant, 1, int(model_seed),
            )
            tc = TrainConfig(**{**asdict(cfg.train), "seed": int(model_seed)})
            res = train(pred, ds.X, ds.y, LossSpec(), tc)
            grid_pred = _predict_values(pred, res.a, res.b, res.theta, grid)
            train_mse = res.best_cost / n
            init_cost = float(res.traces[res.best_restart][0])
            final_cost = res.best_cost
        out.append({
            "suite": "regression",
            "function": fn,
            "model": model,
            "n_samples": n,
            "noise_std": float(sigma),
            "repetition": rep,
            "grid_rmse": rmse(grid_pred, truth),
            "train_mse": float(train_mse),
            "init_cost": init_cost,
            "final_cost": float(final_cost),
        })
    return out


def run_regression_suite(cfg: RegressionSuiteConfig):
    """Train every model on every (function, N, sigma, repetition) cell."""
    tasks = [
        (cfg, fn, n, sigma, rep)
        for fn in cfg.functions
        for n in cfg.sample_sizes
        for sigma in cfg.noise_levels
        for rep in range(cfg.repetitions)
    ]
    rows = [r for chunk in _parallel_map(_regression_task, tasks, cfg.workers)
            for r in chunk]
    reports = aggregate(
        rows, ("function", "model", "n_samples", "noise_std"),
        "grid_rmse", "grid_rmse",
    )
    summary = {
        "suite": "regression",
        "config": _config_dict(cfg),
        "reports": [r.as_dict() for r in reports],
    }
    return rows, summary


# ---- classification suite ----------------------------------------------


@dataclass
class ClassificationSuiteConfig:
    n_per_class: int = 100
    models: tuple = ("qcl", "qcll")
    repetitions: int = 10
    qubits_per_dim: tuple = (3, 3)
    depth: int = 3
    n_outputs: int = 10
    sketch_dim: int = 100
    variant: str = "eq14"
    train: TrainConfig = field(
        default_factory=lambda: TrainConfig(restarts=10, optimizer="quasi-newton")
    )
    master_seed: int = 0
    workers: int = 1


def _classification_task(args):
    cfg, rep = args
    rng = np.random.default_rng(_child_seed(cfg.master_seed, 0, rep))
    ds = gen_classification(cfg.n_per_class, rng)
    enc = EncodingSpec(cfg.qubits_per_dim)
    n_angles = cfg.depth * enc.n_qubits
    loss = LossSpec(kind="cross-entropy", class_count=2)
    out = []
    for model in cfg.models:
        model_seed = int(_child_seed(cfg.master_seed, 1, rep).generate_state(1)[0])
        pred = _build_predictor(
            model, enc, cfg.depth, n_angles, cfg.n_outputs,
            cfg.sketch_dim, cfg.variant, 2, model_seed,
        )
        tc = TrainConfig(**{**asdict(cfg.train), "seed": model_seed})
        res = train(pred, ds.X, ds.y, loss, tc)
        labels = _predict_labels(pred, res.a, res.b, res.theta, ds.X)
        out.append({
            "suite": "classification",
            "model": model,
            "repetition": rep,
            "train_error": classification_error(labels, ds.y),
            "train_accuracy": 1.0 - classification_error(labels, ds.y),
            "final_cost": float(res.best_cost),
        })
    return out


def run_classification_suite(cfg: ClassificationSuiteConfig):
    """The inner-disk vs. outer-region task, softmax + cross-entropy."""
    tasks = [(cfg, rep) for rep in range(cfg.repetitions)]
    rows = [r for chunk in _parallel_map(_classification_task, tasks, cfg.workers)
            for r in chunk]
    reports = aggregate(rows, ("model",), "train_accuracy", "train_accuracy")
    summary = {
        "suite": "classification",
        "config": _config_dict(cfg),
        "reports": [r.as_dict() for r in reports],
    }
    return rows, summary


# ---- benchmark suite ----------------------------------------------------


@dataclass
class BenchmarkSuiteConfig:
    paths: tuple = ()
    target_columns: tuple = ()
    kinds: tuple = ()
    fractions: tuple = (10, 20, 30, 40, 50, 75, 100)
    models: tuple = ("qcl", "qcll", "baseline")
    qubits_per_feature: int = 3
    depth: int = 6
    n_outputs: int = 10
    sketch_dim: int = 100
    variant: str = "eq14"
    test_fraction: float = 0.2
    max_pairs: int = 0  # 0 = all pairs
    train: TrainConfig = field(
        default_factory=lambda: TrainConfig(restarts=10, optimizer="quasi-newton")
    )
    master_seed: int = 0
    workers: int = 1


def _benchmark_task(args):
    cfg, name, pair_index, pair_train, pair_test, fraction = args
    kind = pair_train.kind
    n_classes = pair_train.n_classes if kind == "classification" else 1
    seed = int(
        _child_seed(cfg.master_seed, 2, pair_index, fraction).generate_state(1)[0]
    )
    rng = np.random.default_rng(seed)
    n_used = max(2, int(round(fraction / 100.0 * pair_train.n_samples)))
    rows_used = np.sort(rng.permutation(pair_train.n_samples)[:n_used])
    sub = pair_train.subset(rows_used)

    enc = EncodingSpec((cfg.qubits_per_feature,) * 2)
    n_angles = cfg.depth * enc.n_qubits
    loss = (
        LossSpec(kind="cross-entropy", class_count=n_classes)
        if kind == "classification"
        else LossSpec()
    )
    out = []
    for model in cfg.models:
        if model == "baseline":
            bl = PolyBaseline((cfg.qubits_per_feature,) * 2, kind).fit(sub.X, sub.y)
            pred_test = bl.predict(pair_test.X)
        else:
            pred = _build_predictor(
                model, enc, cfg.depth, n_angles, cfg.n_outputs,
                cfg.sketch_dim, cfg.variant, n_classes, seed,
            )
            tc = TrainConfig(**{**asdict(cfg.train), "seed": seed})
            res = train(pred, sub.X, sub.y, loss, tc)
            if kind == "classification":
                pred_test = _predict_labels(pred, res.a, res.b, res.theta, pair_test.X)
            else:
                pred_test = _predict_values(pred, res.a, res.b, res.theta, pair_test.X)
        if kind == "classification":
            err = classification_error(pred_test, pair_test.y)
            metric = "test_error"
        else:
            err = rmse(pred_test, pair_test.y)
            metric = "test_rmse"
        out.append({
            "suite": "benchmark",
            "dataset": name,
            "feature_pair": pair_index,
            "features": "|".join(pair_train.feature_names),
            "fraction": fraction,
            "model": model,
            "metric": metric,
            "value": err,
        })
    return out


def run_benchmark_suite(cfg: BenchmarkSuiteConfig):
    """Feature-pair studies on delimited datasets with a held-out test split."""
    if not cfg.paths:
        raise ValueError("benchmark suite needs at least one dataset path")
    if not (len(cfg.paths) == len(cfg.target_columns) == len(cfg.kinds)):
        raise ValueError("paths, target_columns, and kinds must align")
    tasks = []
    for d_idx, (path, target, kind) in enumerate(
        zip(cfg.paths, cfg.target_columns, cfg.kinds)
    ):
        ds = data_mod.load_delimited(path, target, kind)
        rng = np.random.default_rng(_child_seed(cfg.master_seed, 0, d_idx))
        tr, te = data_mod.split(ds, cfg.test_fraction, rng)
        tr, stats = data_mod.minmax_scale(tr)
        te = data_mod.apply_scale(stats, te)
        pairs_tr = data_mod.feature_pairs(tr)
        pairs_te = data_mod.feature_pairs(te)
        if cfg.max_pairs:
            pairs_tr = pairs_tr[: cfg.max_pairs]
            pairs_te = pairs_te[: cfg.max_pairs]
        name = str(path).rsplit("/", 1)[-1]
        for p_idx, (ptr, pte) in enumerate(zip(pairs_tr, pairs_te)):
            for fraction in cfg.fractions:
                tasks.append((cfg, name, p_idx, ptr, pte, fraction))
    rows = [r for chunk in _parallel_map(_benchmark_task, tasks, cfg.workers)
            for r in chunk]
    reports = aggregate(rows, ("dataset", "model", "fraction"), "value", "test_error")
    summary = {
        "suite": "benchmark",
        "config": _config_dict(cfg),
        "reports": [r.as_dict() for r in reports],
    }
    return rows, summary


# ---- coverage -----------------------------------------------------------


@dataclass
class CoverageConfig:
    """Protocol settings for the approximation-coverage study.

    ``depths`` controls the learnable-parameter sweep (P = depth * qubits);
    repetitions default to desk scale, the paper-scale value is 1000.
    """

    qubits: int = 6
    depths: tuple = (1, 2, 4, 6)
    thresholds: tuple = (0.90, 0.95, 0.99)
    repetitions: int = 100
    grid_size: int = 100
    n_outputs: int = 10
    sketch_dim: int = 100
    variant: str = "eq14"
    train: TrainConfig = field(
        default_factory=lambda: TrainConfig(restarts=10, optimizer="quasi-newton")
    )
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        for t in self.thresholds:
            if not 0 < t < 1:
                raise ValueError("thresholds must lie in (0, 1)")


def _coverage_task(args):
    cfg, depth, rep = args
    seed_seq = _child_seed(cfg.master_seed, depth, rep)
    target_seed, fit_seed = (int(s) for s in seed_seq.generate_state(2))
    rng = np.random.default_rng(target_seed)
    grid = np.linspace(-1.0, 1.0, cfg.grid_size)[:, None]

    enc = EncodingSpec((cfg.qubits,))
    circuit = CircuitSpec.sample(cfg.qubits, depth, target_seed)
    obs = Observable.diag_support(1 << cfg.qubits, 0, 5)
    ref = QclPredictor(enc, circuit, [obs])
    theta_ref = rng.uniform(0.0, 2.0 * np.pi, circuit.n_angles)
    target = ref.raw_outputs(theta_ref, grid)[:, 0]

    model = QcllModel(
        encoding=enc,
        n_angles=circuit.n_angles,
        n_outputs=cfg.n_outputs,
        sketch_dim=cfg.sketch_dim,
        variant=cfg.variant,
        seed=fit_seed,
    )
    tc = TrainConfig(**{**asdict(cfg.train), "seed": fit_seed})
    res = train(model, grid, target, LossSpec(), tc)
    fitted = _predict_values(model, res.a, res.b, res.theta, grid)
    try:
        rho = pearson(fitted, target)
    except ValueError:
        rho = 0.0  # constant fit cannot track the target
    return {"depth": depth, "repetition": rep, "rho": rho}


def run_coverage(cfg: CoverageConfig):
    """Fraction of random circuit functions a matched sketch model tracks.

    Per repetition: draw a random reference circuit, tabulate it on the
    evaluation grid, fit a fresh parameter-matched sketch model to that
    table, and score the Pearson correlation on the grid.  Coverage for a
    threshold is the fraction of repetitions whose correlation exceeds it.
    """
    tasks = [
        (cfg, depth, rep)
        for depth in cfg.depths
        for rep in range(cfg.repetitions)
    ]
    rho_rows = _parallel_map(_coverage_task, tasks, cfg.workers)
    rows = []
    rho_table = {}
    for depth in cfg.depths:
        rhos = [r["rho"] for r in rho_rows if r["depth"] == depth]
        rho_table[depth] = rhos
        for thr in cfg.thresholds:
            cov = float(np.mean([r > thr for r in rhos]))
            rows.append({
                "suite": "coverage",
                "qubits": cfg.qubits,
                "depth": depth,
                "n_params": depth * cfg.qubits,
                "threshold": float(thr),
                "coverage": cov,
                "repetitions": cfg.repetitions,
            })
    summary = {
        "suite": "coverage",
        "config": _config_dict(cfg),
        "rho": {str(d): rho_table[d] for d in cfg.depths},
    }
    return rows, summary


def _config_dict(cfg):
    d = asdict(cfg)
    for k, v in list(d.items()):
        if isinstance(v, tuple):
            d[k] = list(v)
    return d
