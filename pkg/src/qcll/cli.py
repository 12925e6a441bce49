"""Command-line frontend: training, evaluation, and experiment suites.

Every run writes its fully resolved configuration (including the master
seed) into the output directory, which is enough for bit-identical
replay.  Logs go to standard error; data goes to files only.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import data as data_mod
from . import experiments as ex
from .optimize import LossSpec, TrainConfig, train
from .plots import render_suite_figures
from .qcl import CircuitSpec, EncodingSpec, QclPredictor
from .qcll import QcllModel

log = logging.getLogger("qcll")

SUITES = ("regression", "classification", "noise", "samplesize",
          "benchmark", "coverage")

_COMMON_DEFAULTS = {
    "seed": 0,
    "workers": 1,
    "variant": "eq14",
    "n_outputs": 10,
    "sketch_dim": 100,
    "optimizer": "quasi-newton",
    "restarts": 10,
    "iterations": 100,
    "learning_rate": 0.1,
}

_TRAIN_DEFAULTS = {
    **_COMMON_DEFAULTS,
    "task": "regression",
    "model": "qcll",
    "fn": "x2",
    "n_samples": 100,
    "sigma": 0.0,
    "n_per_class": 100,
    "data": None,
    "target": None,
    "qubits": None,  # task-dependent: 6 for regression, 3 per dim otherwise
    "depth": None,
}

_EXPERIMENT_DEFAULTS = {
    **_COMMON_DEFAULTS,
    "fns": "x2",
    "n_samples": 100,
    "sample_sizes": "10,25,50,75,100",
    "sigmas": "0.0,0.1,0.2,0.3",
    "reps": 10,
    "qubits": 6,
    "depth": 6,
    "depths": "1,2,4,6",
    "thresholds": "0.90,0.95,0.99",
    "grid_size": None,  # suite-dependent
    "data": None,
    "target": None,
    "kind": "regression",
    "fractions": "10,20,30,40,50,75,100",
    "max_pairs": 0,
    "figures": True,
}


def _int_list(text):
    return tuple(int(v) for v in str(text).split(",") if v != "")


def _float_list(text):
    return tuple(float(v) for v in str(text).split(",") if v != "")


def _str_list(text):
    return tuple(v for v in str(text).split(",") if v != "")


def _resolve_config(args, defaults):
    """Merge defaults < config file < explicit flags into one dict."""
    from_file = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            from_file = json.load(fh)
        if not isinstance(from_file, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
        unknown = sorted(set(from_file) - set(defaults) - {"out"})
        if unknown:
            raise ValueError(
                f"{args.config}: unknown config keys {unknown}; "
                f"valid keys: {sorted(defaults)}"
            )
    cfg = dict(defaults)
    cfg.update(from_file)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _prepare_outdir(out, force):
    if out is None:
        raise ValueError("an output directory is required (--out)")
    if os.path.isdir(out) and os.listdir(out) and not force:
        raise ValueError(
            f"output directory {out!r} is not empty; pass --force to reuse it"
        )
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(doc, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _train_config(cfg):
    return TrainConfig(
        max_iterations=int(cfg["iterations"]),
        restarts=int(cfg["restarts"]),
        optimizer=cfg["optimizer"],
        learning_rate=float(cfg["learning_rate"]),
        seed=int(cfg["seed"]),
    )


def _load_training_data(cfg, rng):
    """Dataset plus (for file inputs) the fitted scaling stats."""
    if cfg["data"]:
        if cfg["target"] is None:
            raise ValueError("--target is required with --data")
        if not os.path.exists(cfg["data"]):
            raise ValueError(f"dataset file not found: {cfg['data']}")
        ds = data_mod.load_delimited(cfg["data"], cfg["target"], cfg["task"])
        ds, stats = data_mod.minmax_scale(ds)
        return ds, stats
    if cfg["task"] == "regression":
        return data_mod.gen_regression(
            cfg["fn"], int(cfg["n_samples"]), float(cfg["sigma"]), rng
        ), None
    return data_mod.gen_classification(int(cfg["n_per_class"]), rng), None


def _fill_task_defaults(cfg, n_features):
    if cfg["qubits"] is None:
        cfg["qubits"] = 6 if (cfg["task"] == "regression" and n_features == 1) else 3
    if cfg["depth"] is None:
        cfg["depth"] = 6 if (cfg["task"] == "regression" and n_features == 1) else 3
    cfg["qubits"] = int(cfg["qubits"])
    cfg["depth"] = int(cfg["depth"])


def _save_model(cfg, ds, stats, predictor, result, path):
    core = None
    if cfg["model"] == "qcll":
        predictor.set_params(result.a, result.b, result.theta)
        core = json.loads(predictor.to_json())
    elif cfg["model"] == "qcl":
        core = {
            "model": "qcl",
            "qubits_per_dim": list(predictor.encoding.qubits_per_dim),
            "depth": predictor.circuit.depth,
            "circuit_seed": predictor.circuit.seed,
            "n_classes": predictor.n_heads,
            "a": result.a.tolist(),
            "b": result.b.tolist(),
            "theta": result.theta.tolist(),
        }
    else:
        core = {
            "model": "baseline",
            "qubits_per_dim": [cfg["qubits"]] * ds.n_features,
            "kind": ds.kind,
            "coef": np.asarray(predictor.coef).tolist(),
        }
    doc = {
        "task": cfg["task"],
        "scaling": None if stats is None else {
            "lo": stats.lo.tolist(), "hi": stats.hi.tolist()
        },
        "core": core,
    }
    _write_json(doc, path)
    return doc


def load_model(path):
    """Rebuild (kind, predict_fn, doc) from a saved model JSON."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    core = doc["core"]
    kind = core["model"]
    task = doc["task"]
    if kind == "qcll":
        model = QcllModel.from_json(json.dumps(core))

        def predict(X):
            raw = model.raw_outputs(model.theta, X)
            logits = model.a * raw + model.b
            return np.argmax(logits, axis=1) if task == "classification" else logits[:, 0]
    elif kind == "qcl":
        enc = EncodingSpec(tuple(core["qubits_per_dim"]))
        circuit = CircuitSpec.sample(enc.n_qubits, core["depth"], core["circuit_seed"])
        obs = ex._class_observables(1 << enc.n_qubits, core["n_classes"])
        ref = QclPredictor(enc, circuit, obs)
        a = np.asarray(core["a"])
        b = np.asarray(core["b"])
        theta = np.asarray(core["theta"])

        def predict(X):
            logits = a * ref.raw_outputs(theta, X) + b
            return np.argmax(logits, axis=1) if task == "classification" else logits[:, 0]
    elif kind == "baseline":
        bl = ex.PolyBaseline(tuple(core["qubits_per_dim"]), core["kind"])
        bl.coef = np.asarray(core["coef"])
        predict = bl.predict
    else:
        raise ValueError(f"unknown saved model kind {kind!r}")

    if doc.get("scaling"):
        stats = data_mod.ScalingStats(
            np.asarray(doc["scaling"]["lo"]), np.asarray(doc["scaling"]["hi"])
        )
    else:
        stats = None
    return kind, predict, stats, doc


def _metrics(task, pred, y):
    if task == "classification":
        err = ex.classification_error(pred, y)
        return {"train_error": err, "train_accuracy": 1.0 - err}
    return {
        "train_mse": float(np.mean((np.asarray(pred) - np.asarray(y)) ** 2)),
        "train_rmse": ex.rmse(pred, y),
    }


def cmd_train(args):
    cfg = _resolve_config(args, _TRAIN_DEFAULTS)
    out = _prepare_outdir(args.out, args.force)
    seed = int(cfg["seed"])
    rng = np.random.default_rng(ex._child_seed(seed, 0))
    ds, stats = _load_training_data(cfg, rng)
    _fill_task_defaults(cfg, ds.n_features)
    _write_json({**cfg, "out": out}, os.path.join(out, "config.json"))

    n_classes = ds.n_classes if ds.kind == "classification" else 1
    enc = EncodingSpec((cfg["qubits"],) * ds.n_features)
    log.info("training %s on %d samples (%d features, %d qubits)",
             cfg["model"], ds.n_samples, ds.n_features, enc.n_qubits)

    if cfg["model"] == "baseline":
        bl = ex.PolyBaseline((cfg["qubits"],) * ds.n_features, ds.kind)
        bl.fit(ds.X, ds.y)
        pred_train = bl.predict(ds.X)
        _save_model(cfg, ds, stats, bl, None, os.path.join(out, "model.json"))
        with open(os.path.join(out, "trace.csv"), "w", encoding="utf-8") as fh:
            fh.write("restart,iteration,cost\n")
        metrics = _metrics(ds.kind, pred_train, ds.y)
    else:
        model_seed = int(ex._child_seed(seed, 1).generate_state(1)[0])
        predictor = ex._build_predictor(
            cfg["model"], enc, cfg["depth"], cfg["depth"] * enc.n_qubits,
            int(cfg["n_outputs"]), int(cfg["sketch_dim"]), cfg["variant"],
            n_classes, model_seed,
        )
        loss = (
            LossSpec(kind="cross-entropy", class_count=n_classes)
            if ds.kind == "classification" else LossSpec()
        )
        result = train(predictor, ds.X, ds.y, loss, _train_config(cfg))
        result.write_trace_csv(os.path.join(out, "trace.csv"))
        _save_model(cfg, ds, stats, predictor, result, os.path.join(out, "model.json"))
        if ds.kind == "classification":
            pred_train = ex._predict_labels(
                predictor, result.a, result.b, result.theta, ds.X
            )
        else:
            pred_train = ex._predict_values(
                predictor, result.a, result.b, result.theta, ds.X
            )
        metrics = _metrics(ds.kind, pred_train, ds.y)
        metrics["final_cost"] = result.best_cost
        metrics["best_restart"] = result.best_restart

    _write_json(metrics, os.path.join(out, "metrics.json"))
    log.info("wrote model.json, trace.csv, metrics.json to %s", out)
    return 0


def cmd_eval(args):
    cfg = _resolve_config(args, _TRAIN_DEFAULTS)
    out = _prepare_outdir(args.out, args.force)
    kind, predict, stats, doc = load_model(args.model_file)
    cfg["task"] = doc["task"]
    seed = int(cfg["seed"])
    rng = np.random.default_rng(ex._child_seed(seed, 0))
    if cfg["data"]:
        if cfg["target"] is None:
            raise ValueError("--target is required with --data")
        if not os.path.exists(cfg["data"]):
            raise ValueError(f"dataset file not found: {cfg['data']}")
        ds = data_mod.load_delimited(cfg["data"], cfg["target"], cfg["task"])
        if stats is not None:
            ds = data_mod.apply_scale(stats, ds)
    else:
        ds, _ = _load_training_data({**cfg, "data": None}, rng)

    _write_json({**cfg, "out": out, "model_file": args.model_file},
                os.path.join(out, "config.json"))
    pred = predict(ds.X)
    with open(os.path.join(out, "predictions.csv"), "w", encoding="utf-8") as fh:
        fh.write("index,prediction,target\n")
        for i, (p, t) in enumerate(zip(np.asarray(pred).tolist(), ds.y.tolist())):
            fh.write(f"{i},{p!r},{t!r}\n")
    _write_json(_metrics(ds.kind, pred, ds.y), os.path.join(out, "metrics.json"))
    log.info("wrote predictions.csv, metrics.json to %s", out)
    return 0


def _suite_runner(cfg, suite):
    tc = _train_config(cfg)
    seed = int(cfg["seed"])
    workers = int(cfg["workers"])
    if suite in ("regression", "samplesize", "noise"):
        if suite == "regression":
            sizes = (int(cfg["n_samples"]),)
            sigmas = (0.0,)
        elif suite == "samplesize":
            sizes = _int_list(cfg["sample_sizes"])
            sigmas = (0.0,)
        else:
            sizes = (int(cfg["n_samples"]),)
            sigmas = _float_list(cfg["sigmas"])
        rc = ex.RegressionSuiteConfig(
            functions=_str_list(cfg["fns"]),
            sample_sizes=sizes,
            noise_levels=sigmas,
            repetitions=int(cfg["reps"]),
            qubits=int(cfg["qubits"]),
            depth=int(cfg["depth"]),
            n_outputs=int(cfg["n_outputs"]),
            sketch_dim=int(cfg["sketch_dim"]),
            variant=cfg["variant"],
            grid_size=int(cfg["grid_size"] or 201),
            train=tc,
            master_seed=seed,
            workers=workers,
        )
        return ex.run_regression_suite(rc), "regression"
    if suite == "classification":
        cc = ex.ClassificationSuiteConfig(
            n_per_class=int(cfg["n_samples"]),
            repetitions=int(cfg["reps"]),
            qubits_per_dim=(int(cfg["qubits"]),) * 2 if cfg["qubits"] != 6
            else (3, 3),
            depth=int(cfg["depth"]) if cfg["depth"] != 6 else 3,
            n_outputs=int(cfg["n_outputs"]),
            sketch_dim=int(cfg["sketch_dim"]),
            variant=cfg["variant"],
            train=tc,
            master_seed=seed,
            workers=workers,
        )
        return ex.run_classification_suite(cc), "classification"
    if suite == "benchmark":
        paths = _str_list(cfg["data"] or "")
        if not paths:
            raise ValueError("benchmark suite needs --data with dataset paths")
        for p in paths:
            if not os.path.exists(p):
                raise ValueError(f"dataset file not found: {p}")
        targets = _str_list(cfg["target"] or "")
        if len(targets) == 1:
            targets = targets * len(paths)
        kinds = _str_list(cfg["kind"])
        if len(kinds) == 1:
            kinds = kinds * len(paths)
        bc = ex.BenchmarkSuiteConfig(
            paths=paths,
            target_columns=targets,
            kinds=kinds,
            fractions=_int_list(cfg["fractions"]),
            qubits_per_feature=int(cfg["qubits"]) if cfg["qubits"] != 6 else 3,
            depth=int(cfg["depth"]),
            n_outputs=int(cfg["n_outputs"]),
            sketch_dim=int(cfg["sketch_dim"]),
            variant=cfg["variant"],
            max_pairs=int(cfg["max_pairs"]),
            train=tc,
            master_seed=seed,
            workers=workers,
        )
        return ex.run_benchmark_suite(bc), "benchmark"
    if suite == "coverage":
        vc = ex.CoverageConfig(
            qubits=int(cfg["qubits"]),
            depths=_int_list(cfg["depths"]),
            thresholds=_float_list(cfg["thresholds"]),
            repetitions=int(cfg["reps"]),
            grid_size=int(cfg["grid_size"] or 100),
            n_outputs=int(cfg["n_outputs"]),
            sketch_dim=int(cfg["sketch_dim"]),
            variant=cfg["variant"],
            train=tc,
            master_seed=seed,
            workers=workers,
        )
        return ex.run_coverage(vc), "coverage"
    raise ValueError(f"unknown suite {suite!r}; valid suites: {', '.join(SUITES)}")


def cmd_experiment(args):
    if args.suite not in SUITES:
        raise ValueError(
            f"unknown suite {args.suite!r}; valid suites: {', '.join(SUITES)}"
        )
    cfg = _resolve_config(args, _EXPERIMENT_DEFAULTS)
    out = _prepare_outdir(args.out, args.force)
    _write_json({**cfg, "suite": args.suite, "out": out},
                os.path.join(out, "config.json"))
    log.info("running %s suite (seed %s, %s workers)",
             args.suite, cfg["seed"], cfg["workers"])
    (rows, summary), family = _suite_runner(cfg, args.suite)
    ex.write_results_csv(rows, os.path.join(out, "results.csv"))
    ex.write_summary_json(summary, os.path.join(out, "summary.json"))
    if cfg["figures"]:
        for path in render_suite_figures(family, rows, out):
            log.info("rendered %s", path)
    log.info("wrote results.csv, summary.json to %s", out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qcll",
        description="Sketched circuit-like learning: training, evaluation, "
                    "and experiment suites.",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="parallel workers")
        p.add_argument("--variant", choices=("eq14", "eq15"),
                       help="sketched readout route")
        p.add_argument("--force", action="store_true",
                       help="reuse a non-empty output directory")
        p.add_argument("--optimizer", choices=("adam", "quasi-newton"))
        p.add_argument("--restarts", type=int)
        p.add_argument("--iterations", type=int)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--n-outputs", dest="n_outputs", type=int)
        p.add_argument("--sketch-dim", dest="sketch_dim", type=int)
        p.add_argument("--qubits", type=int)
        p.add_argument("--depth", type=int)

    p_train = sub.add_parser("train", help="fit one model, save it")
    common(p_train)
    p_train.add_argument("--task", choices=("regression", "classification"))
    p_train.add_argument("--model", choices=("qcl", "qcll", "baseline"))
    p_train.add_argument("--fn", choices=sorted(data_mod.REGRESSION_TARGETS))
    p_train.add_argument("--n-samples", dest="n_samples", type=int)
    p_train.add_argument("--sigma", type=float, help="label noise std")
    p_train.add_argument("--n-per-class", dest="n_per_class", type=int)
    p_train.add_argument("--data", help="delimited dataset path")
    p_train.add_argument("--target", help="target column name or index")
    p_train.set_defaults(run=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a saved model")
    common(p_eval)
    p_eval.add_argument("model_file", help="model.json written by train")
    p_eval.add_argument("--task", choices=("regression", "classification"))
    p_eval.add_argument("--fn", choices=sorted(data_mod.REGRESSION_TARGETS))
    p_eval.add_argument("--n-samples", dest="n_samples", type=int)
    p_eval.add_argument("--sigma", type=float)
    p_eval.add_argument("--n-per-class", dest="n_per_class", type=int)
    p_eval.add_argument("--data", help="delimited dataset path")
    p_eval.add_argument("--target", help="target column name or index")
    p_eval.set_defaults(run=cmd_eval)

    p_exp = sub.add_parser("experiment", help="run a study suite")
    common(p_exp)
    p_exp.add_argument("suite", help=f"one of: {', '.join(SUITES)}")
    p_exp.add_argument("--fns", help="comma-separated target functions")
    p_exp.add_argument("--n-samples", dest="n_samples", type=int)
    p_exp.add_argument("--sample-sizes", dest="sample_sizes",
                       help="comma-separated N sweep (samplesize suite)")
    p_exp.add_argument("--sigmas", help="comma-separated noise sweep")
    p_exp.add_argument("--reps", type=int, help="repetitions per cell")
    p_exp.add_argument("--depths", help="comma-separated depth sweep (coverage)")
    p_exp.add_argument("--thresholds", help="comma-separated rho thresholds")
    p_exp.add_argument("--grid-size", dest="grid_size", type=int)
    p_exp.add_argument("--data", help="comma-separated dataset paths (benchmark)")
    p_exp.add_argument("--target", help="target column(s) (benchmark)")
    p_exp.add_argument("--kind", help="dataset kind(s) (benchmark)")
    p_exp.add_argument("--fractions", help="training-data percentages")
    p_exp.add_argument("--max-pairs", dest="max_pairs", type=int)
    p_exp.add_argument("--no-figures", dest="figures", action="store_false",
                       default=None, help="skip figure rendering")
    p_exp.set_defaults(run=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.run(args)
    except (ValueError, OSError, RuntimeError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
