"""Figure rendering for suite results.

Figures are derived from the same flat rows that land in results.csv and
are written as PNGs next to the delimited output; the runners themselves
stay plot-free.
"""

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

__all__ = ["render_suite_figures"]

_MODEL_COLORS = {"qcl": "tab:orange", "qcll": "tab:red", "baseline": "tab:blue"}


def _grouped_mean_std(rows, x_key, value_key, model):
    pts = {}
    for r in rows:
        if r["model"] != model:
            continue
        pts.setdefault(r[x_key], []).append(r[value_key])
    xs = sorted(pts)
    means = [float(np.mean(pts[x])) for x in xs]
    stds = [float(np.std(pts[x])) for x in xs]
    return xs, means, stds


def _models(rows):
    return sorted({r["model"] for r in rows})


def _sweep_figure(rows, x_key, value_key, xlabel, ylabel, path, logy=False):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for model in _models(rows):
        xs, means, stds = _grouped_mean_std(rows, x_key, value_key, model)
        ax.errorbar(
            xs, means, yerr=stds, marker="o", capsize=3,
            label=model, color=_MODEL_COLORS.get(model),
        )
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _regression_figures(rows, outdir):
    paths = []
    for fn in sorted({r["function"] for r in rows}):
        sub = [r for r in rows if r["function"] == fn]
        n_values = sorted({r["n_samples"] for r in sub})
        s_values = sorted({r["noise_std"] for r in sub})
        if len(n_values) > 1:
            paths.append(_sweep_figure(
                [r for r in sub if r["noise_std"] == s_values[0]],
                "n_samples", "grid_rmse", "training samples", "grid RMSE",
                f"{outdir}/rmse_vs_samples_{fn}.png", logy=True,
            ))
        if len(s_values) > 1:
            paths.append(_sweep_figure(
                [r for r in sub if r["n_samples"] == n_values[-1]],
                "noise_std", "grid_rmse", "noise std", "grid RMSE",
                f"{outdir}/rmse_vs_noise_{fn}.png",
            ))
        if len(n_values) == 1 and len(s_values) == 1:
            fig, ax = plt.subplots(figsize=(4.5, 3.5))
            models = _models(sub)
            means = [np.mean([r["grid_rmse"] for r in sub if r["model"] == m])
                     for m in models]
            stds = [np.std([r["grid_rmse"] for r in sub if r["model"] == m])
                    for m in models]
            ax.bar(models, means, yerr=stds, capsize=4,
                   color=[_MODEL_COLORS.get(m) for m in models])
            ax.set_ylabel("grid RMSE")
            ax.set_title(f"target {fn}")
            fig.tight_layout()
            path = f"{outdir}/rmse_{fn}.png"
            fig.savefig(path, dpi=150)
            plt.close(fig)
            paths.append(path)
    return paths


def _classification_figures(rows, outdir):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    models = _models(rows)
    means = [np.mean([r["train_accuracy"] for r in rows if r["model"] == m])
             for m in models]
    stds = [np.std([r["train_accuracy"] for r in rows if r["model"] == m])
            for m in models]
    ax.bar(models, means, yerr=stds, capsize=4,
           color=[_MODEL_COLORS.get(m) for m in models])
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("training accuracy")
    fig.tight_layout()
    path = f"{outdir}/classification_accuracy.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def _benchmark_figures(rows, outdir):
    paths = []
    for ds in sorted({r["dataset"] for r in rows}):
        sub = [r for r in rows if r["dataset"] == ds]
        ylabel = sub[0]["metric"].replace("_", " ")
        stem = ds.rsplit(".", 1)[0]
        paths.append(_sweep_figure(
            sub, "fraction", "value", "% of training data used", ylabel,
            f"{outdir}/benchmark_{stem}.png",
        ))
    return paths


def _coverage_figures(rows, outdir):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for thr in sorted({r["threshold"] for r in rows}):
        sub = sorted(
            (r for r in rows if r["threshold"] == thr),
            key=lambda r: r["n_params"],
        )
        ax.plot(
            [r["n_params"] for r in sub],
            [r["coverage"] for r in sub],
            marker="o", label=f"threshold {thr}",
        )
    ax.set_xlabel("learnable parameters")
    ax.set_ylabel("coverage")
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.tight_layout()
    path = f"{outdir}/coverage.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


_RENDERERS = {
    "regression": _regression_figures,
    "classification": _classification_figures,
    "benchmark": _benchmark_figures,
    "coverage": _coverage_figures,
}


def render_suite_figures(suite, rows, outdir):
    """Render the figures appropriate for a suite's rows; returns paths."""
    renderer = _RENDERERS.get(suite)
    if renderer is None or not rows:
        return []
    return renderer(rows, str(outdir))
