"""Acceptance gate: ten numbered end-to-end criteria.

Each test prints a single PASS/FAIL line (written to the real stdout so
it survives capture) and asserts its criterion.  Heavy suite runs are
cached at module scope because several criteria share them.

Criterion 5 contains one check that cannot hold for this target
function: x^2 lies exactly in the span of the seven-function polynomial
basis, so the least-squares baseline reproduces it to machine precision
on noiseless data and to the noise floor at N=100, and no iterative
model can land strictly below that.  The check is evaluated faithfully
and reported as the failure it is; the same ordering *is* reproduced
when the small-sample comparison includes label noise, which the test
also reports for context.
"""

import sys
import time
import tracemalloc
from functools import lru_cache

import numpy as np
import pytest

import qcll.experiments as ex
from tests.acceptance_report import record
from qcll.data import Dataset, save_delimited
from qcll.optimize import LossSpec, TrainConfig, cost, cost_gradient
from qcll.qcl import (
    CircuitSpec,
    EncodingSpec,
    Observable,
    QclPredictor,
    gradient_qcl,
)
from qcll.qcll import QcllModel
from qcll.sketch import CountSketch, FactorList, combined_sketch, tensor_sketch
from qcll.spectral import dft_naive, fft, ifft

MASTER_SEED = 2024


def _report(num, name, ok, detail):
    line = f"acceptance {num:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    record(line)
    print(line, file=sys.stderr, flush=True)
    assert ok, line


# ---- shared heavy computations ------------------------------------------


@lru_cache(maxsize=None)
def _regression_rows(sizes, noises, variant, reps, models):
    cfg = ex.RegressionSuiteConfig(
        functions=("x2",),
        sample_sizes=sizes,
        noise_levels=noises,
        models=models,
        repetitions=reps,
        variant=variant,
        train=TrainConfig(restarts=10, optimizer="quasi-newton"),
        master_seed=MASTER_SEED,
    )
    rows, _ = ex.run_regression_suite(cfg)
    return tuple(tuple(sorted(r.items())) for r in rows)


def _rmse_stats(rows, model, n, sigma):
    vals = [
        dict(r)["grid_rmse"]
        for r in rows
        if dict(r)["model"] == model
        and dict(r)["n_samples"] == n
        and dict(r)["noise_std"] == sigma
    ]
    return float(np.mean(vals)), float(np.std(vals))


@lru_cache(maxsize=None)
def _classification_rows(variant, reps):
    cfg = ex.ClassificationSuiteConfig(
        repetitions=reps,
        variant=variant,
        train=TrainConfig(restarts=10, optimizer="quasi-newton"),
        master_seed=MASTER_SEED,
    )
    rows, _ = ex.run_classification_suite(cfg)
    return tuple(tuple(sorted(r.items())) for r in rows)


@lru_cache(maxsize=None)
def _coverage_result(variant, depths, reps):
    cfg = ex.CoverageConfig(
        depths=depths,
        repetitions=reps,
        variant=variant,
        train=TrainConfig(restarts=10, optimizer="quasi-newton"),
        master_seed=MASTER_SEED,
    )
    rows, summary = ex.run_coverage(cfg)
    return tuple(tuple(sorted(r.items())) for r in rows), summary


# ---- criteria -----------------------------------------------------------


def test_criterion_01_sketch_unbiasedness_and_variance():
    start = time.perf_counter()
    k, kp, draws = 64, 100, 100_000
    rng = np.random.default_rng(11)
    u = rng.standard_normal(k)
    v = rng.standard_normal(k)
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    exact = float(u @ v)
    ests = np.empty(draws)
    chunk = 20_000
    for lo in range(0, draws, chunk):
        n = min(chunk, draws - lo)
        h = rng.integers(0, kp, size=(n, k))
        s = rng.choice([-1.0, 1.0], size=(n, k))
        rows = np.repeat(np.arange(n), k)
        cu = np.zeros((n, kp))
        cv = np.zeros((n, kp))
        np.add.at(cu, (rows, h.ravel()), (s * u).ravel())
        np.add.at(cv, (rows, h.ravel()), (s * v).ravel())
        ests[lo:lo + n] = np.einsum("ij,ij->i", cu, cv)
    se = ests.std(ddof=1) / np.sqrt(draws)
    var = float(ests.var(ddof=1))
    elapsed = time.perf_counter() - start
    mean_ok = abs(ests.mean() - exact) <= 4 * se
    var_ok = var <= 1.1 * 2.0 / kp
    _report(
        1, "sketch estimator unbiasedness/variance",
        mean_ok and var_ok and elapsed < 30,
        f"mean {ests.mean():.5f} vs exact {exact:.5f} (4se={4 * se:.5f}), "
        f"var {var:.5f} <= {1.1 * 2 / kp:.5f}, {elapsed:.1f}s",
    )


def test_criterion_02_tensor_sketch_exactness():
    start = time.perf_counter()
    worst = 0.0
    for q in range(1, 7):
        for kp in (4, 16, 100):
            rng = np.random.default_rng(1000 * q + kp)
            vectors = [rng.standard_normal(2) for _ in range(q)]
            sketches = [CountSketch.sample(2, kp, rng) for _ in range(q)]
            f = FactorList(vectors=vectors, sketches=sketches)
            full = np.ones(1)
            for vec in vectors:
                full = np.kron(full, vec)
            expected = combined_sketch(f).apply(full)
            worst = max(worst, float(np.max(np.abs(tensor_sketch(f) - expected))))
    elapsed = time.perf_counter() - start
    _report(
        2, "tensor sketch equals combined-hash oracle",
        worst <= 1e-10 and elapsed < 10,
        f"max entrywise error {worst:.2e} over Q<=6, widths 4/16/100, "
        f"{elapsed:.1f}s",
    )


def test_criterion_03_fft_correctness():
    start = time.perf_counter()
    worst_fft = 0.0
    worst_rt = 0.0
    for n in (7, 100, 128, 1024):
        rng = np.random.default_rng(n)
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        worst_fft = max(worst_fft, float(np.max(np.abs(fft(v) - dft_naive(v)))))
        worst_rt = max(worst_rt, float(np.max(np.abs(ifft(fft(v)) - v))))
    elapsed = time.perf_counter() - start
    _report(
        3, "fft matches naive dft",
        worst_fft < 1e-9 and worst_rt <= 1e-10 and elapsed < 10,
        f"max dft error {worst_fft:.2e}, round-trip {worst_rt:.2e}, "
        f"{elapsed:.1f}s",
    )


def test_criterion_04_gradient_suites():
    start = time.perf_counter()
    step = 1e-6

    def rel_err(g, fd):
        return float(np.max(np.abs(g - fd) / (1.0 + np.abs(fd))))

    worst_qcll = 0.0
    for i in range(100):
        rng = np.random.default_rng(i)
        model = QcllModel(
            encoding=EncodingSpec((1 + i % 4,)),
            n_angles=1 + i % 6,
            n_outputs=3,
            sketch_dim=16,
            variant="eq15" if i % 2 else "eq14",
            seed=i,
        )
        theta = rng.uniform(0, 2 * np.pi, model.n_angles)
        X = rng.uniform(-1, 1, (2, 1))
        _, grad = model.raw_outputs_and_grad(theta, X)
        for p in range(model.n_angles):
            tp = theta.copy()
            tp[p] += step
            tm = theta.copy()
            tm[p] -= step
            fd = (model.raw_outputs(tp, X) - model.raw_outputs(tm, X)) / (2 * step)
            worst_qcll = max(worst_qcll, rel_err(grad[:, :, p], fd))

    worst_qcl = 0.0
    for i in range(100):
        rng = np.random.default_rng(1000 + i)
        nq = 2 + i % 3
        spec = CircuitSpec.sample(nq, 1 + i % 3, seed=i)
        obs = Observable.diag_support(1 << nq, 0, min(5, 1 << nq))
        theta = rng.uniform(0, 2 * np.pi, spec.n_angles)
        x = rng.uniform(-1, 1, 1)
        grad = gradient_qcl(spec, theta, x, obs)
        pred = QclPredictor(EncodingSpec((nq,)), spec, [obs])
        for p in range(spec.n_angles):
            tp = theta.copy()
            tp[p] += step
            tm = theta.copy()
            tm[p] -= step
            fd = (pred.raw_outputs(tp, x[None, :])
                  - pred.raw_outputs(tm, x[None, :]))[0, 0] / (2 * step)
            worst_qcl = max(worst_qcl, rel_err(np.array(grad[p]), np.array(fd)))

    worst_chain = 0.0
    for i in range(100):
        rng = np.random.default_rng(2000 + i)
        classify = i % 2 == 1
        if classify:
            obs = [Observable.diag_support(4, 0, 2), Observable.diag_support(4, 2, 4)]
            loss = LossSpec(kind="cross-entropy", class_count=2)
            y = rng.integers(0, 2, 5)
        else:
            obs = None
            loss = LossSpec()
            y = rng.standard_normal(5)
        model = QcllModel(
            encoding=EncodingSpec((2,)), n_angles=1 + i % 5, n_outputs=4,
            sketch_dim=16, observables=obs, seed=i,
        )
        X = rng.uniform(-1, 1, (5, 1))
        a = rng.uniform(0.5, 1.5, model.n_heads)
        b = rng.uniform(-0.5, 0.5, model.n_heads)
        theta = rng.uniform(0, 2 * np.pi, model.n_angles)
        ga, gb, gt = cost_gradient(model, X, y, loss, a, b, theta)
        packed = np.concatenate([ga, gb, gt])
        fd = np.empty_like(packed)
        full = np.concatenate([a, b, theta])

        def at(vec):
            nh = model.n_heads
            return cost(model, X, y, loss, vec[:nh], vec[nh:2 * nh], vec[2 * nh:])

        for j in range(full.size):
            vp = full.copy()
            vp[j] += step
            vm = full.copy()
            vm[j] -= step
            fd[j] = (at(vp) - at(vm)) / (2 * step)
        worst_chain = max(worst_chain, rel_err(packed, fd))

    elapsed = time.perf_counter() - start
    ok = max(worst_qcll, worst_qcl, worst_chain) <= 1e-5 and elapsed < 120
    _report(
        4, "gradient suites vs finite differences",
        ok,
        f"rel err sketched {worst_qcll:.2e}, statevector {worst_qcl:.2e}, "
        f"chain rule {worst_chain:.2e} over 100 instances each, {elapsed:.1f}s",
    )


def test_criterion_05_regression_reproduction():
    start = time.perf_counter()
    models = ("qcl", "qcll", "baseline")
    rows_clean = _regression_rows((10, 100), (0.0,), "eq14", 10, models)
    rows_noisy = _regression_rows((100,), (0.2,), "eq14", 10, models)
    rows_small_noisy = _regression_rows((10,), (0.2,), "eq14", 10, models)

    details = []
    fit_ok = True
    for model in ("qcl", "qcll"):
        mean_rmse, _ = _rmse_stats(rows_clean, model, 100, 0.0)
        ratios = [
            dict(r)["init_cost"] / dict(r)["final_cost"]
            for r in rows_clean
            if dict(r)["model"] == model and dict(r)["n_samples"] == 100
        ]
        this_ok = mean_rmse < 0.1 and min(ratios) >= 10
        fit_ok = fit_ok and this_ok
        details.append(
            f"{model} N=100 rmse {mean_rmse:.4f} reduction >= {min(ratios):.0f}x"
        )

    order_ok = True
    for rows, n, sigma in ((rows_clean, 10, 0.0), (rows_noisy, 100, 0.2)):
        base, _ = _rmse_stats(rows, "baseline", n, sigma)
        for model in ("qcl", "qcll"):
            m, _ = _rmse_stats(rows, model, n, sigma)
            order_ok = order_ok and m < base
            details.append(f"{model} N={n} s={sigma} {m:.3g} vs baseline {base:.3g}")

    # context: with label noise included at N=10 the ordering does hold
    base_ctx, _ = _rmse_stats(rows_small_noisy, "baseline", 10, 0.2)
    ctx = ", ".join(
        f"{m} {np.round(_rmse_stats(rows_small_noisy, m, 10, 0.2)[0], 3)}"
        for m in ("qcl", "qcll")
    )
    details.append(f"[context N=10 s=0.2: {ctx} vs baseline {base_ctx:.3g}]")

    elapsed = time.perf_counter() - start
    _report(
        5, "regression reproduction",
        fit_ok and order_ok and elapsed < 1200,
        "; ".join(details) + f"; {elapsed:.0f}s"
        + ("" if order_ok else
           " — baseline ordering unattainable: x^2 lies in the baseline's "
           "exact span (see notes ledger)"),
    )


def test_criterion_06_classification_reproduction():
    start = time.perf_counter()
    rows = _classification_rows("eq14", 10)
    details = []
    ok = True
    for model in ("qcl", "qcll"):
        accs = [dict(r)["train_accuracy"] for r in rows if dict(r)["model"] == model]
        mean_acc = float(np.mean(accs))
        ok = ok and mean_acc >= 0.95
        details.append(f"{model} accuracy {mean_acc:.3f} (min {min(accs):.3f})")
    elapsed = time.perf_counter() - start
    _report(
        6, "classification reproduction",
        ok and elapsed < 600,
        "; ".join(details) + f"; {elapsed:.0f}s",
    )


def test_criterion_07_coverage_reproduction():
    start = time.perf_counter()
    rows, _ = _coverage_result("eq14", (1, 2, 4, 6), 100)
    rows = [dict(r) for r in rows]
    by = {(r["depth"], r["threshold"]): r["coverage"] for r in rows}
    depths = (1, 2, 4, 6)
    reps = 100

    covs90 = [by[(d, 0.90)] for d in depths]
    monotone = True
    for i in range(len(depths) - 1):
        # binomial SE at the pooled proportion of the two adjacent estimates
        # (the standard basis for comparing two sample proportions)
        pooled = (covs90[i] + covs90[i + 1]) / 2
        se = np.sqrt(max(pooled * (1 - pooled), 1e-12) / reps)
        monotone = monotone and covs90[i + 1] >= covs90[i] - se
    top_ok = covs90[-1] > 0.9
    nesting = all(
        by[(d, 0.90)] >= by[(d, 0.95)] >= by[(d, 0.99)] for d in depths
    )
    elapsed = time.perf_counter() - start
    _report(
        7, "coverage reproduction",
        monotone and top_ok and nesting and elapsed < 3600,
        f"coverage@0.90 by depth {covs90}, nesting exact: {nesting}, "
        f"{elapsed:.0f}s",
    )


def test_criterion_08_scalability():
    def _predict_time(n_qubits, reps=5):
        model = QcllModel(
            encoding=EncodingSpec((n_qubits,)), n_angles=10, n_outputs=4,
            sketch_dim=100, seed=0,
        )
        rng = np.random.default_rng(n_qubits)
        best = np.inf
        for _ in range(reps):
            X = rng.uniform(-1, 1, (500, 1))
            t0 = time.perf_counter()
            model.predict(X)
            best = min(best, time.perf_counter() - t0)
        return best

    tracemalloc.start()
    model50 = QcllModel(
        encoding=EncodingSpec((50,)), n_angles=10, n_outputs=4,
        sketch_dim=100, seed=1,
    )
    out = model50.predict(np.array([[0.3], [0.8]]))
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    mem_ok = np.all(np.isfinite(out)) and peak < 200 * 1024 * 1024

    _predict_time(20, reps=2)  # warm caches and allocator
    t20 = _predict_time(20)
    t40 = _predict_time(40)
    ratio = t40 / t20

    with pytest.raises(ValueError):
        CircuitSpec.sample(50, 1, seed=0)

    _report(
        8, "scalability",
        mem_ok and ratio <= 2.5,
        f"50-qubit predict peak {peak / 1e6:.1f} MB, time ratio Q40/Q20 "
        f"{ratio:.2f}, 50-qubit statevector rejected",
    )


def test_criterion_09_variant_equivalence():
    start = time.perf_counter()

    def compare(m14, s14, m15, s15):
        pooled = np.sqrt((s14 ** 2 + s15 ** 2) / 2.0)
        return abs(m14 - m15) <= 2 * pooled + 1e-12

    details = []
    ok = True

    stats = {}
    for variant in ("eq14", "eq15"):
        rows = _regression_rows((100,), (0.0,), variant, 5, ("qcll",))
        stats[variant] = _rmse_stats(rows, "qcll", 100, 0.0)
    ok &= compare(*stats["eq14"], *stats["eq15"])
    details.append(
        f"regression rmse {stats['eq14'][0]:.4f}+-{stats['eq14'][1]:.4f} vs "
        f"{stats['eq15'][0]:.4f}+-{stats['eq15'][1]:.4f}"
    )

    stats = {}
    for variant in ("eq14", "eq15"):
        rows = _classification_rows(variant, 5)
        accs = [dict(r)["train_accuracy"] for r in rows
                if dict(r)["model"] == "qcll"]
        stats[variant] = (float(np.mean(accs)), float(np.std(accs)))
    ok &= compare(*stats["eq14"], *stats["eq15"])
    details.append(
        f"accuracy {stats['eq14'][0]:.3f}+-{stats['eq14'][1]:.3f} vs "
        f"{stats['eq15'][0]:.3f}+-{stats['eq15'][1]:.3f}"
    )

    stats = {}
    for variant in ("eq14", "eq15"):
        _, summary = _coverage_result(variant, (6,), 20)
        rhos = summary["rho"]["6"]
        stats[variant] = (float(np.mean(rhos)), float(np.std(rhos)))
    ok &= compare(*stats["eq14"], *stats["eq15"])
    details.append(
        f"coverage rho {stats['eq14'][0]:.4f}+-{stats['eq14'][1]:.4f} vs "
        f"{stats['eq15'][0]:.4f}+-{stats['eq15'][1]:.4f}"
    )

    elapsed = time.perf_counter() - start
    _report(9, "variant equivalence", ok, "; ".join(details) + f"; {elapsed:.0f}s")


def test_criterion_10_determinism(tmp_path):
    fast = TrainConfig(max_iterations=20, restarts=2, optimizer="quasi-newton")

    rng = np.random.default_rng(0)
    X = rng.uniform(0, 5, (40, 3))
    csv_path = tmp_path / "bench.csv"
    save_delimited(
        Dataset(X, X[:, 0] + X[:, 1], ("a", "b", "c"), "regression"),
        csv_path, "y",
    )

    def run_all():
        results = {}
        results["regression"], _ = ex.run_regression_suite(
            ex.RegressionSuiteConfig(
                functions=("x2",), sample_sizes=(15,), repetitions=1,
                qubits=3, depth=2, grid_size=41, train=fast, master_seed=9,
            )
        )
        results["classification"], _ = ex.run_classification_suite(
            ex.ClassificationSuiteConfig(
                n_per_class=10, repetitions=1, qubits_per_dim=(2, 2), depth=2,
                train=fast, master_seed=9,
            )
        )
        results["benchmark"], _ = ex.run_benchmark_suite(
            ex.BenchmarkSuiteConfig(
                paths=(str(csv_path),), target_columns=("y",),
                kinds=("regression",), fractions=(100,), qubits_per_feature=2,
                depth=2, max_pairs=1, train=fast, master_seed=9,
            )
        )
        results["coverage"], _ = ex.run_coverage(
            ex.CoverageConfig(
                qubits=3, depths=(1,), thresholds=(0.9,), repetitions=2,
                grid_size=30, train=fast, master_seed=9,
            )
        )
        return results

    first = run_all()
    second = run_all()
    mismatched = []
    for suite in first:
        a = tmp_path / f"{suite}_a.csv"
        b = tmp_path / f"{suite}_b.csv"
        ex.write_results_csv(first[suite], a)
        ex.write_results_csv(second[suite], b)
        if a.read_bytes() != b.read_bytes():
            mismatched.append(suite)
    _report(
        10, "determinism",
        not mismatched,
        "byte-identical results CSVs for regression, classification, "
        "benchmark, coverage" if not mismatched
        else f"mismatch in: {mismatched}",
    )
