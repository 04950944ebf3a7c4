"""Command line driver: ``qfinseq generate | run | compare``.

Every run writes a JSON manifest (``result.json``) holding the full effective
configuration next to its metrics; ``qfinseq run --config result.json``
replays it. Config files are JSON objects whose keys mirror the long flags
(``--qrc-layers`` <-> ``"qrc_layers"``); explicit flags override the file.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .data import DataError, GpFitError, atomic_write_text, build_lags, generate_corpus, ingest_csv, standardize, write_csv
from .encoding import LIFT_KINDS, EncodingError
from .qlstm import (
    ENCODER_BIAS_KINDS, LstmCell, QlstmCell, Readout, count_params, forecast_sequence, lstm_param_count,
    matched_lstm_hidden, save_checkpoint, train_recurrent,
)
from .reservoir import EsnConfig, MlpConfig, QrcConfig, ReservoirError, fit_reservoir_forecaster, write_trace_csv
from .train import NumericalError, OptimizerConfig, pseudo_accuracy, rmse, rmse_per_channel

log = logging.getLogger("qfinseq")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

MODELS = ("lstm", "qlstm", "rc", "qrc", "nn-rc", "nn-qrc")
MODES = ("univariate", "multivariate")
RECURRENT = ("lstm", "qlstm")
RESERVOIR = ("rc", "qrc", "nn-rc", "nn-qrc")
CLASSICAL = ("lstm", "rc", "nn-rc")
PARAM_TOLERANCE = 0.10

GENERATE_DEFAULTS = {
    "out": "corpus", "seed": 0, "n_series": 20, "months": 96, "horizon": 36, "fit_months": 60,
    "gp_iterations": 200, "gp_restarts": 3,
}

RUN_DEFAULTS = {
    "corpus": None, "out": None, "model": "qlstm", "mode": "univariate", "series": None,
    "lag": 4, "horizon": 1, "train_frac": 0.8, "transform": "log1p", "seed": [0, 1, 2, 3, 4],
    "dump_trace": False,
    # recurrent models
    "optimizer": "adam", "learning_rate": 0.01, "epochs": 100,
    "n_qubits": 4, "qlstm_layers": 2, "ansatz": "hry", "enc_scale": 0.1,
    "encoder_bias": "fixed", "bias_scale": 1.0, "lstm_hidden": None,
    # reservoirs
    "qrc_layers": 3, "leak": 0.5, "memory_weights": [1 / 3, 1 / 3, 1 / 3], "bias_range": 0.1,
    "reg": 1e-2, "lift": "tanh-affine", "qrc_input_scale": 0.1,
    "esn_units": 12, "esn_rho": 0.9, "esn_input_scale": 1.0, "washout": 5,
    "mlp_hidden": 16, "mlp_learning_rate": 0.01, "mlp_epochs": 500,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# argument parsing


def _flag(key):
    return "--" + key.replace("_", "-")


def build_parser():
    parser = _Parser(prog="qfinseq", description="Quantum/classical sequence models for monthly series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = lambda **kw: dict(default=argparse.SUPPRESS, **kw)  # noqa: E731  (flags override config keys)

    g = sub.add_parser("generate", help="write a synthetic corpus (CSV + metadata JSON)")
    g.add_argument("--config", help="JSON file with generate settings")
    g.add_argument("--out", **sp(help="output directory (default: corpus)"))
    g.add_argument("--seed", **sp(type=int, help="corpus seed (default 0)"))
    g.add_argument("--n-series", **sp(type=int, help="number of series (default 20)"))
    g.add_argument("--months", **sp(type=int, help="observed months per series (default 96)"))
    g.add_argument("--horizon", **sp(type=int, help="synthetic continuation length (default 36)"))
    g.add_argument("--fit-months", **sp(type=int, help="months used to fit the GP (default 60)"))
    g.add_argument("--gp-iterations", **sp(type=int))
    g.add_argument("--gp-restarts", **sp(type=int))

    r = sub.add_parser("run", help="train and evaluate one model over several seeds")
    r.add_argument("--config", help="JSON config or a previous result.json manifest to replay")
    r.add_argument("--corpus", **sp(help="CSV with one column per series"))
    r.add_argument("--out", **sp(help="output directory (default runs/<model>-<mode>)"))
    r.add_argument("--model", **sp(choices=MODELS))
    r.add_argument("--mode", **sp(choices=MODES))
    r.add_argument("--series", **sp(action="append", help="column to use (repeat for multivariate)"))
    r.add_argument("--lag", **sp(type=int))
    r.add_argument("--horizon", **sp(type=int))
    r.add_argument("--train-frac", **sp(type=float))
    r.add_argument("--transform", **sp(choices=("log1p", "none")))
    r.add_argument("--seed", **sp(type=int, action="append", help="repeatable; default 0..4"))
    r.add_argument("--dump-trace", **sp(action="store_true", help="write reservoir feature traces"))
    r.add_argument("--optimizer", **sp(choices=("adam", "sgd")))
    r.add_argument("--learning-rate", **sp(type=float))
    r.add_argument("--epochs", **sp(type=int))
    r.add_argument("--n-qubits", **sp(type=int))
    r.add_argument("--qlstm-layers", **sp(type=int))
    r.add_argument("--ansatz", **sp(choices=("hry", "rot")))
    r.add_argument("--enc-scale", **sp(type=float))
    r.add_argument("--encoder-bias", **sp(choices=ENCODER_BIAS_KINDS))
    r.add_argument("--bias-scale", **sp(type=float))
    r.add_argument("--lstm-hidden", **sp(type=int, help="default: matched to the QLSTM parameter count"))
    r.add_argument("--qrc-layers", **sp(type=int))
    r.add_argument("--leak", **sp(type=float))
    r.add_argument("--memory-weights", **sp(type=float, nargs=3, metavar=("WX", "WY", "WZ")))
    r.add_argument("--bias-range", **sp(type=float))
    r.add_argument("--reg", **sp(type=float))
    r.add_argument("--lift", **sp(choices=LIFT_KINDS))
    r.add_argument("--qrc-input-scale", **sp(type=float))
    r.add_argument("--esn-units", **sp(type=int))
    r.add_argument("--esn-rho", **sp(type=float))
    r.add_argument("--esn-input-scale", **sp(type=float))
    r.add_argument("--washout", **sp(type=int))
    r.add_argument("--mlp-hidden", **sp(type=int))
    r.add_argument("--mlp-learning-rate", **sp(type=float))
    r.add_argument("--mlp-epochs", **sp(type=int))

    c = sub.add_parser("compare", help="side-by-side table for two runs")
    c.add_argument("runs", nargs=2, help="run directories or result.json files")
    c.add_argument("--out", help="also write the comparison as JSON")
    c.add_argument("--tolerance", type=float, default=PARAM_TOLERANCE,
                   help="relative parameter-count gap that triggers a warning (default 0.1)")
    return parser


def _load_json(path):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return obj


def resolve_config(args, defaults):
    """Defaults, then the config file (or a manifest's ``config``), then explicit flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        loaded = _load_json(args.config)
        if "config" in loaded and isinstance(loaded["config"], dict):
            loaded = loaded["config"]
        unknown = sorted(set(loaded) - set(defaults))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key in defaults:
            cfg[key] = value
    return cfg


# ---------------------------------------------------------------------------
# generate


def validate_generate(cfg):
    for key in ("n_series", "months", "horizon", "fit_months", "gp_iterations", "gp_restarts"):
        if not isinstance(cfg[key], int) or isinstance(cfg[key], bool) or cfg[key] < 1:
            raise UsageError(f"{_flag(key)} must be a positive integer, got {cfg[key]!r}")
    if cfg["fit_months"] > cfg["months"]:
        raise UsageError("--fit-months cannot exceed --months")
    if not isinstance(cfg["seed"], int):
        raise UsageError("--seed must be an integer")


def cmd_generate(cfg):
    validate_generate(cfg)
    series, meta = generate_corpus(
        n_series=cfg["n_series"], months=cfg["months"], horizon=cfg["horizon"], fit_months=cfg["fit_months"],
        seed=cfg["seed"], gp_iterations=cfg["gp_iterations"], gp_restarts=cfg["gp_restarts"],
    )
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, "corpus.csv")
    write_csv(csv_path, series)
    # The output directory is where the sidecar lives, so it is left out to keep
    # corpora generated into different directories byte-identical.
    settings = {k: v for k, v in cfg.items() if k != "out"}
    sidecar = {"command": "generate", "version": __version__, "config": settings, "series": meta}
    atomic_write_text(os.path.join(out, "corpus.meta.json"), json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    log.info("wrote %d series x %d months to %s", len(series), series[0].values.shape[0], csv_path)
    print(csv_path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# run


def _positive_int(cfg, key):
    v = cfg[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise UsageError(f"{_flag(key)} must be a positive integer, got {v!r}")


def validate_run(cfg):
    if cfg["corpus"] is None:
        raise UsageError("--corpus is required (or a config file naming it)")
    if cfg["model"] not in MODELS:
        raise UsageError(f"--model must be one of {MODELS}")
    if cfg["mode"] not in MODES:
        raise UsageError(f"--mode must be one of {MODES}")
    for key in ("lag", "horizon", "epochs", "n_qubits", "qlstm_layers", "qrc_layers", "esn_units",
                "mlp_hidden", "mlp_epochs"):
        _positive_int(cfg, key)
    if cfg["lstm_hidden"] is not None:
        _positive_int(cfg, "lstm_hidden")
    if not isinstance(cfg["washout"], int) or cfg["washout"] < 0:
        raise UsageError("--washout must be a non-negative integer")
    if not 0.0 < cfg["train_frac"] < 1.0:
        raise UsageError("--train-frac must lie strictly between 0 and 1")
    if not 0.0 <= cfg["leak"] <= 1.0:
        raise UsageError("--leak must lie in [0, 1]")
    if cfg["reg"] <= 0:
        raise UsageError("--reg must be positive")
    if cfg["learning_rate"] < 0 or cfg["mlp_learning_rate"] < 0:
        raise UsageError("learning rates must be non-negative")
    if cfg["transform"] not in ("log1p", "none"):
        raise UsageError("--transform must be 'log1p' or 'none'")
    if cfg["lift"] not in LIFT_KINDS:
        raise UsageError(f"--lift must be one of {LIFT_KINDS}")
    if cfg["encoder_bias"] not in ENCODER_BIAS_KINDS:
        raise UsageError(f"--encoder-bias must be one of {ENCODER_BIAS_KINDS}")
    if cfg["n_qubits"] > 10:
        raise UsageError("--n-qubits above 10 is too slow for training; use <= 10")
    seeds = cfg["seed"]
    if isinstance(seeds, int):
        seeds = [seeds]
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise UsageError("--seed values must be integers")
    cfg["seed"] = list(seeds)
    if len(cfg["memory_weights"]) != 3:
        raise UsageError("--memory-weights takes three values")
    series = cfg["series"]
    if isinstance(series, str):
        series = [series]
    cfg["series"] = series
    if series is not None:
        want = 1 if cfg["mode"] == "univariate" else None
        if want is not None and len(series) != want:
            raise UsageError("univariate mode takes exactly one --series")
        if cfg["mode"] == "multivariate" and len(series) < 2:
            raise UsageError("multivariate mode needs at least two --series")


def _transform(raw, cfg, stop):
    if cfg["transform"] == "none":
        return raw.values.astype(float).copy(), {"kind": "none"}
    std = standardize(raw, (0, stop))
    return std.x, {"kind": "log1p", "mean": std.mean, "scale": std.scale, "fit_window": [0, stop]}


def load_task(cfg):
    """Read the corpus, transform it and build the lag dataset."""
    path = cfg["corpus"]
    if not os.path.exists(path):
        raise DataError(f"corpus not found: {path}")
    columns = ingest_csv(path, columns=cfg["series"])
    if cfg["series"] is None:
        n = 1 if cfg["mode"] == "univariate" else 2
        if len(columns) < n:
            raise DataError(f"{path}: {cfg['mode']} mode needs {n} series, corpus has {len(columns)}")
        columns = columns[:n]
        cfg["series"] = [c.name for c in columns]
    T = columns[0].values.shape[0]
    rows = T - cfg["lag"] - cfg["horizon"] + 1
    if rows < 2:
        raise DataError(f"series of length {T} too short for lag {cfg['lag']} and horizon {cfg['horizon']}")
    split = int(math.floor(cfg["train_frac"] * rows))
    if split < 1 or split >= rows:
        raise DataError("train/test split leaves an empty side")
    stop = split + cfg["lag"] + cfg["horizon"] - 1  # points seen by training rows
    mats, transforms = [], []
    for col in columns:
        x, info = _transform(col, cfg, stop)
        mats.append(x)
        transforms.append(dict(info, series=col.name))
    mat = np.column_stack(mats)
    data = build_lags(mat, cfg["lag"], cfg["mode"], cfg["horizon"], cfg["train_frac"])
    return mat, data, columns[0].months, transforms


def _qlstm_cell(cfg, n_in, seed):
    return QlstmCell(n_in, cfg["n_qubits"], cfg["qlstm_layers"], seed=seed, ansatz=cfg["ansatz"],
                     enc_scale=cfg["enc_scale"], encoder_bias=cfg["encoder_bias"], bias_scale=cfg["bias_scale"])


def resolve_lstm_hidden(cfg, n_in):
    if cfg["lstm_hidden"] is not None:
        return cfg["lstm_hidden"]
    q = _qlstm_cell(cfg, n_in, 0)
    return matched_lstm_hidden(count_params(q, Readout(q.hidden_size, n_in)), n_in, n_in)


def _reservoir_cfg(cfg, n_in, seed):
    if cfg["model"] in ("qrc", "nn-qrc"):
        return QrcConfig.from_seed(seed, n_qubits=cfg["n_qubits"], n_layers=cfg["qrc_layers"], leak=cfg["leak"],
                                   weights=tuple(cfg["memory_weights"]), bias_range=cfg["bias_range"],
                                   reg=cfg["reg"], lift_kind=cfg["lift"], input_scale=cfg["qrc_input_scale"])
    return EsnConfig.from_seed(seed, n_in, n_units=cfg["esn_units"], rho=cfg["esn_rho"], leak=cfg["leak"],
                               reg=cfg["reg"], input_scale=cfg["esn_input_scale"], bias_range=cfg["bias_range"])


def _fit_one(cfg, mat, data, seed, out):
    """Train one model for one seed; returns ``(pred, losses, info)`` over all lag rows."""
    C = data.n_channels
    model = cfg["model"]
    if model in RECURRENT:
        if model == "qlstm":
            cell, readout = _qlstm_cell(cfg, C, seed), Readout(cfg["n_qubits"], C, seed=seed)
        else:
            H = cfg["lstm_hidden"]
            cell, readout = LstmCell(C, H, seed=seed), Readout(H, C, seed=seed)
        opt = OptimizerConfig(cfg["optimizer"], cfg["learning_rate"], cfg["epochs"], seed=seed)
        cell, readout, losses = train_recurrent(cell, readout, data, opt)
        pred = forecast_sequence(cell, readout, data.sequences())
        save_checkpoint(os.path.join(out, f"model_seed{seed}.npz"), cell, readout, {"seed": seed})
        info = {"trainable_params": count_params(cell, readout), "hidden_size": cell.hidden_size}
        return pred, losses, info
    rcfg = _reservoir_cfg(cfg, C, seed)
    mlp_cfg = None
    if model.startswith("nn-"):
        mlp_cfg = MlpConfig(cfg["mlp_hidden"], cfg["mlp_learning_rate"], cfg["mlp_epochs"], seed)
    fit = fit_reservoir_forecaster(rcfg, mat, data, washout=cfg["washout"], mlp_cfg=mlp_cfg)
    if fit.losses:
        losses = fit.losses
    else:
        tr = data.train
        losses = [float(np.mean((fit.lr_pred[tr] - data.Y[tr]) ** 2))]
    if cfg["dump_trace"]:
        write_trace_csv(os.path.join(out, f"trace_seed{seed}.csv"), fit.features, data.Y)
    info = {"trainable_params": int(fit.n_trained), "feature_width": int(rcfg.n_features),
            "readout_params": int(fit.W_out.size)}
    return fit.pred, losses, info


def _write_loss_csv(path, losses):
    lines = ["epoch,loss"] + [f"{e},{float(v)!r}" for e, v in enumerate(losses)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _write_predictions_csv(path, data, months, names, pred):
    lines = ["t,series,split,actual,predicted"]
    for j in range(data.n_rows):
        split = "train" if j < data.split_index else "test"
        t = int(months[data.target_index[j]])
        for ch, name in enumerate(names):
            lines.append(f"{t},{name},{split},{float(data.Y[j, ch])!r},{float(pred[j, ch])!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def _metrics(pred, data):
    tr, te = data.train, data.test
    m = {
        "train_rmse": rmse(pred[tr], data.Y[tr]),
        "test_rmse": rmse(pred[te], data.Y[te]),
        "test_rmse_per_channel": [float(v) for v in rmse_per_channel(pred[te], data.Y[te])],
        "persistence_train_rmse": rmse(data.persistence(tr), data.Y[tr]),
        "persistence_test_rmse": rmse(data.persistence(te), data.Y[te]),
    }
    m["train_pseudo_accuracy"] = pseudo_accuracy(m["train_rmse"])
    m["test_pseudo_accuracy"] = pseudo_accuracy(m["test_rmse"])
    return m


SUMMARY_KEYS = ("train_rmse", "test_rmse", "train_pseudo_accuracy", "test_pseudo_accuracy",
                "persistence_train_rmse", "persistence_test_rmse")


def summarize(per_seed):
    out = {}
    for key in SUMMARY_KEYS:
        vals = np.array([m[key] for m in per_seed], dtype=float)
        out[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


def run_experiment(cfg):
    """Run every seed of one experiment; returns the manifest dict (also written to disk)."""
    validate_run(cfg)
    if cfg["out"] is None:
        cfg["out"] = os.path.join("runs", f"{cfg['model']}-{cfg['mode']}")
    cfg["corpus"] = os.path.abspath(cfg["corpus"])
    mat, data, months, transforms = load_task(cfg)
    if cfg["model"] == "lstm":
        cfg["lstm_hidden"] = resolve_lstm_hidden(cfg, data.n_channels)
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    per_seed, timing, info = [], {}, {}
    for seed in cfg["seed"]:
        t0 = time.perf_counter()
        try:
            pred, losses, info = _fit_one(cfg, mat, data, seed, out)
        except NumericalError as exc:
            raise NumericalError(f"{cfg['model']} seed {seed}: {exc}") from None
        if not np.all(np.isfinite(pred)):
            raise NumericalError(f"{cfg['model']} seed {seed}: non-finite predictions")
        m = _metrics(pred, data)
        m["seed"] = seed
        m["final_loss"] = float(losses[-1])
        per_seed.append(m)
        timing[str(seed)] = time.perf_counter() - t0
        _write_loss_csv(os.path.join(out, f"loss_seed{seed}.csv"), losses)
        _write_predictions_csv(os.path.join(out, f"predictions_seed{seed}.csv"), data, months, cfg["series"], pred)
        log.info("%s seed %d: test RMSE %.4f (persistence %.4f)", cfg["model"], seed, m["test_rmse"],
                 m["persistence_test_rmse"])
    manifest = {
        "command": "run",
        "version": __version__,
        "config": cfg,
        "task": {
            "n_rows": data.n_rows, "split_index": data.split_index, "n_channels": data.n_channels,
            "transforms": transforms,
        },
        "model": dict(info, model=cfg["model"]),
        "metrics": {"per_seed": per_seed, "summary": summarize(per_seed)},
        "timing_seconds": timing,
    }
    atomic_write_text(os.path.join(out, "result.json"), json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def cmd_run(cfg):
    # Divergence is reported through NumericalError; numpy's own warnings add nothing.
    with np.errstate(over="ignore", invalid="ignore"):
        manifest = run_experiment(cfg)
    s = manifest["metrics"]["summary"]
    print(f"{cfg['model']} ({cfg['mode']}, {len(cfg['seed'])} seeds): "
          f"test RMSE {s['test_rmse']['mean']:.4f} +/- {s['test_rmse']['std']:.4f}, "
          f"persistence {s['persistence_test_rmse']['mean']:.4f}; "
          f"params {manifest['model']['trainable_params']}; wrote {os.path.join(cfg['out'], 'result.json')}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare


def _load_manifest(path):
    if os.path.isdir(path):
        path = os.path.join(path, "result.json")
    if not os.path.exists(path):
        raise DataError(f"no result manifest at {path}")
    with open(path) as fh:
        try:
            m = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path} is not valid JSON: {exc}") from None
    if m.get("command") != "run":
        raise DataError(f"{path} is not a run manifest")
    return m


def compare_manifests(a, b, tolerance=PARAM_TOLERANCE):
    """Rows of ``(label, value_a, value_b, delta)`` plus parameter-matching details."""
    sa, sb = a["metrics"]["summary"], b["metrics"]["summary"]
    rows = []
    for key in SUMMARY_KEYS:
        va, vb = sa[key]["mean"], sb[key]["mean"]
        rows.append({"metric": key, "a": va, "b": vb, "a_std": sa[key]["std"], "b_std": sb[key]["std"],
                     "delta": vb - va})
    pa, pb = a["model"]["trainable_params"], b["model"]["trainable_params"]
    # The gap is measured against the classical model's count when one side is classical.
    ref = pb if (b["config"]["model"] in CLASSICAL and a["config"]["model"] not in CLASSICAL) else pa
    gap = abs(pa - pb) / max(ref, 1)
    result = {
        "a": {"model": a["config"]["model"], "mode": a["config"]["mode"], "out": a["config"]["out"]},
        "b": {"model": b["config"]["model"], "mode": b["config"]["mode"], "out": b["config"]["out"]},
        "rows": rows,
        "params": {"a": pa, "b": pb, "ratio": pa / pb if pb else float("inf"), "relative_gap": gap,
                   "tolerance": tolerance, "matched": gap <= tolerance},
        "warnings": [],
    }
    if "feature_width" in a["model"] or "feature_width" in b["model"]:
        result["feature_width"] = {"a": a["model"].get("feature_width"), "b": b["model"].get("feature_width")}
    if gap > tolerance:
        result["warnings"].append(
            f"parameter counts differ by {100 * gap:.1f}% ({pa} vs {pb}), above the {100 * tolerance:.0f}% matching rule")
    if a["config"]["mode"] != b["config"]["mode"]:
        result["warnings"].append("runs use different modes")
    sa_series, sb_series = a["config"].get("series"), b["config"].get("series")
    if sa_series != sb_series or a["config"]["corpus"] != b["config"]["corpus"]:
        result["warnings"].append("runs use different data")
    return result


def format_comparison(result):
    a, b = result["a"], result["b"]
    head_a, head_b = f"{a['model']} [A]", f"{b['model']} [B]"
    lines = [f"{'metric':<26}{head_a:>22}{head_b:>22}{'B - A':>14}"]
    for r in result["rows"]:
        ca = f"{r['a']:.4f} +/- {r['a_std']:.4f}"
        cb = f"{r['b']:.4f} +/- {r['b_std']:.4f}"
        lines.append(f"{r['metric']:<26}{ca:>22}{cb:>22}{r['delta']:>14.4g}")
    p = result["params"]
    lines.append(f"{'trainable_params':<26}{p['a']:>22}{p['b']:>22}{p['b'] - p['a']:>14}")
    lines.append(f"{'param_ratio (A/B)':<26}{p['ratio']:>22.4f}")
    if "feature_width" in result:
        fw = result["feature_width"]
        lines.append(f"{'feature_width':<26}{str(fw['a']):>22}{str(fw['b']):>22}")
    lines.append(f"parameter matching (<= {100 * p['tolerance']:.0f}%): {'ok' if p['matched'] else 'NOT MET'}"
                 f" (gap {100 * p['relative_gap']:.1f}%)")
    return "\n".join(lines)


def cmd_compare(args):
    a, b = (_load_manifest(p) for p in args.runs)
    result = compare_manifests(a, b, args.tolerance)
    print(format_comparison(result))
    for w in result["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    if args.out:
        atomic_write_text(args.out, json.dumps(result, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.command == "generate":
            return cmd_generate(resolve_config(args, GENERATE_DEFAULTS))
        if args.command == "run":
            return cmd_run(resolve_config(args, RUN_DEFAULTS))
        return cmd_compare(args)
    except UsageError as exc:
        print(f"qfinseq: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GpFitError) as exc:
        print(f"qfinseq: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"qfinseq: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, EncodingError, ReservoirError, FloatingPointError) as exc:
        print(f"qfinseq: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
