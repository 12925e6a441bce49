"""Losses, cost assembly, chain-rule gradients, and multi-restart training.

Predictors plug in through a small interface: ``n_heads`` observables,
``n_angles`` learnable angles, ``raw_outputs(theta, X) -> (N, C)`` and
``raw_outputs_and_grad(theta, X) -> ((N, C), (N, C, P))``.  Both the
sketched model and the statevector reference satisfy it.

The default optimizer is Adam with analytic gradients; a quasi-Newton
mode delegates the line search to scipy's L-BFGS-B while keeping our
cost/gradient functions.  Every restart draws its own initialization and
the lowest final cost wins.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

__all__ = [
    "LossSpec",
    "TrainConfig",
    "TrainResult",
    "squared_error",
    "softmax",
    "cross_entropy",
    "cost",
    "cost_gradient",
    "train",
]

_PROB_FLOOR = 1e-12


def squared_error(y, y_hat):
    """(y - y_hat)^2."""
    d = float(y) - float(y_hat)
    return d * d


def softmax(logits):
    """Stable softmax along the last axis; rows sum to 1."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def cross_entropy(label, p):
    """-log p[label], with probabilities floored at 1e-12."""
    p = np.asarray(p, dtype=np.float64)
    label = int(label)
    if not 0 <= label < p.size:
        raise ValueError(f"class index {label} out of range for {p.size} classes")
    return -np.log(max(p[label], _PROB_FLOOR))


@dataclass(frozen=True)
class LossSpec:
    """Which loss/output map the trainer assembles around the raw readouts."""

    kind: str = "squared-error"
    class_count: int = 0

    def __post_init__(self):
        if self.kind not in ("squared-error", "cross-entropy"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "cross-entropy" and self.class_count < 2:
            raise ValueError("classification needs class_count >= 2")


@dataclass(frozen=True)
class TrainConfig:
    max_iterations: int = 100
    restarts: int = 10
    optimizer: str = "adam"
    learning_rate: float = 0.1
    tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1 or self.max_iterations < 0:
            raise ValueError("restarts >= 1 and max_iterations >= 0 required")
        if self.optimizer not in ("adam", "quasi-newton"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainResult:
    a: np.ndarray
    b: np.ndarray
    theta: np.ndarray
    best_cost: float
    best_restart: int
    traces: list = field(default_factory=list)
    wall_time: float = 0.0

    def trace_rows(self):
        """(restart, iteration, cost) rows for CSV export."""
        rows = []
        for r, trace in enumerate(self.traces):
            for i, c in enumerate(trace):
                rows.append((r, i, c))
        return rows

    def write_trace_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("restart,iteration,cost\n")
            for r, i, c in self.trace_rows():
                fh.write(f"{r},{i},{float(c)!r}\n")


def _check_data(X, y, loss, n_heads):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] < 1:
        raise ValueError("empty dataset")
    if loss.kind == "cross-entropy":
        y = np.asarray(y, dtype=np.intp)
        if y.min() < 0 or y.max() >= loss.class_count:
            raise ValueError("class labels out of range")
        if n_heads != loss.class_count:
            raise ValueError("need one observable per class")
    else:
        y = np.asarray(y, dtype=np.float64)
        if n_heads != 1:
            raise ValueError("squared-error training expects a single readout")
    if y.shape[0] != X.shape[0]:
        raise ValueError("X and y lengths differ")
    return X, y


def _cost_from_raw(raw, y, loss, a, b):
    logits = a * raw + b
    if loss.kind == "squared-error":
        resid = logits[:, 0] - y
        return float(np.sum(resid * resid)), resid
    p = softmax(logits)
    picked = np.clip(p[np.arange(y.size), y], _PROB_FLOOR, None)
    onehot = np.zeros_like(p)
    onehot[np.arange(y.size), y] = 1.0
    return float(-np.sum(np.log(picked))), p - onehot


def cost(predictor, X, y, loss, a, b, theta):
    """Summed training loss at the given parameters."""
    X, y = _check_data(X, y, loss, predictor.n_heads)
    raw = predictor.raw_outputs(theta, X)
    a = np.atleast_1d(np.asarray(a, float))
    b = np.atleast_1d(np.asarray(b, float))
    return _cost_from_raw(raw, y, loss, a, b)[0]


def _cost_and_grad(predictor, X, y, loss, a, b, theta):
    raw, draw = predictor.raw_outputs_and_grad(theta, X)
    value, dlogit = _cost_from_raw(raw, y, loss, a, b)
    if loss.kind == "squared-error":
        dl = 2.0 * dlogit[:, None]  # dC/dlogit, (N, 1)
    else:
        dl = dlogit  # p - onehot, (N, C)
    ga = np.sum(dl * raw, axis=0)
    gb = np.sum(dl, axis=0)
    gtheta = np.einsum("nc,ncp->p", dl * a, draw)
    return value, ga, gb, gtheta


def cost_gradient(predictor, X, y, loss, a, b, theta):
    """Analytic gradient of the cost over (a, b, theta)."""
    X, y = _check_data(X, y, loss, predictor.n_heads)
    a = np.atleast_1d(np.asarray(a, float))
    b = np.atleast_1d(np.asarray(b, float))
    theta = np.asarray(theta, dtype=np.float64)
    _, ga, gb, gtheta = _cost_and_grad(predictor, X, y, loss, a, b, theta)
    return ga, gb, gtheta


def _init_params(n_heads, n_angles, rng):
    a = 1.0 + rng.uniform(-1.0, 1.0, size=n_heads)
    b = rng.uniform(-1.0, 1.0, size=n_heads)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n_angles)
    return np.concatenate([a, b, theta])


def _split(v, n_heads):
    return v[:n_heads], v[n_heads:2 * n_heads], v[2 * n_heads:]


def _run_adam(fun, v0, config):
    v = v0.copy()
    m = np.zeros_like(v)
    s = np.zeros_like(v)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    trace = []
    prev = np.inf
    for it in range(1, config.max_iterations + 1):
        value, g = fun(v)
        trace.append(value)
        if not np.isfinite(value):
            return v, trace, False
        if abs(prev - value) < config.tol:
            break
        prev = value
        m = beta1 * m + (1 - beta1) * g
        s = beta2 * s + (1 - beta2) * g * g
        mh = m / (1 - beta1 ** it)
        sh = s / (1 - beta2 ** it)
        v = v - config.learning_rate * mh / (np.sqrt(sh) + eps)
    value, _ = fun(v)
    trace.append(value)
    return v, trace, np.isfinite(value)


def _run_quasi_newton(fun, v0, config):
    trace = []
    last = {"value": np.inf}

    def objective(v):
        value, g = fun(v)
        last["value"] = value
        if not np.isfinite(value):
            # inf with a zero gradient makes the line search back off
            return 1e300, np.zeros_like(v)
        return value, g

    res = minimize(
        objective,
        v0,
        jac=True,
        method="L-BFGS-B",
        callback=lambda _v: trace.append(last["value"]),
        options={"maxiter": config.max_iterations, "ftol": config.tol},
    )
    trace.append(float(res.fun))
    return res.x, trace, np.isfinite(res.fun) and res.fun < 1e300


def train(predictor, X, y, loss: LossSpec, config: TrainConfig) -> TrainResult:
    """Multi-restart gradient training; returns the lowest-cost parameters.

    A restart that hits a non-finite cost is abandoned (its trace keeps the
    values up to that point); training only fails if every restart does.
    """
    X, y = _check_data(X, y, loss, predictor.n_heads)
    n_heads = predictor.n_heads
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)

    def fun(v):
        a, b, theta = _split(v, n_heads)
        value, ga, gb, gtheta = _cost_and_grad(predictor, X, y, loss, a, b, theta)
        return value, np.concatenate([ga, gb, gtheta])

    best = None
    traces = []
    best_restart = -1
    for r in range(config.restarts):
        v0 = _init_params(n_heads, predictor.n_angles, rng)
        if config.max_iterations == 0:
            value, _ = fun(v0)
            v, trace, ok = v0, [value], np.isfinite(value)
        elif config.optimizer == "adam":
            v, trace, ok = _run_adam(fun, v0, config)
        else:
            v, trace, ok = _run_quasi_newton(fun, v0, config)
        traces.append(np.asarray(trace))
        if ok and (best is None or trace[-1] < best[0]):
            best = (trace[-1], v)
            best_restart = r
    if best is None:
        raise RuntimeError("all restarts diverged to non-finite cost")
    a, b, theta = _split(best[1], n_heads)
    return TrainResult(
        a=a.copy(),
        b=b.copy(),
        theta=theta.copy(),
        best_cost=float(best[0]),
        best_restart=best_restart,
        traces=traces,
        wall_time=time.perf_counter() - start,
    )
