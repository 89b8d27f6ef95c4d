"""Batch command-line interface: prepare, synth, train, evaluate.

Configuration is a TOML file with [data], [model], [train] and [eval]
sections (see README for the full field reference). Every field is validated
against its documented domain before anything runs; violations name the
offending field. All randomness derives from one seed (config `seed`,
overridable with --seed).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import coxph, date, draft
from .data import (
    DatasetSchema,
    SurvivalDataset,
    SyntheticSpec,
    generate_synthetic,
    load_artifact,
    load_csv,
    save_artifact,
    split_dataset,
)
from .metrics import MetricReport, PredictionSet, concordance_index, evaluate_predictions
from .ndnet import load_arrays, save_arrays
from .rng import RngStreams

MODEL_KINDS = ("date", "draft", "coxph")


class ConfigError(ValueError):
    """A config field is missing, unknown, or outside its domain."""


# -- config schema -----------------------------------------------------------

_POSITIVE = ("a number > 0", lambda v: isinstance(v, (int, float)) and v > 0)
_NONNEGATIVE = ("a number >= 0", lambda v: isinstance(v, (int, float)) and v >= 0)
_POS_INT = ("an integer > 0", lambda v: isinstance(v, int) and v > 0)
_BOOL = ("a boolean", lambda v: isinstance(v, bool))
_STRING = ("a string", lambda v: isinstance(v, str))
_UNIT = ("a number in (0, 1]", lambda v: isinstance(v, (int, float)) and 0 < v <= 1)
_FRACTION = ("a number in [0, 1)", lambda v: isinstance(v, (int, float)) and 0 <= v < 1)
_INT_LIST = (
    "a list of integers > 0",
    lambda v: isinstance(v, list) and all(isinstance(x, int) and x > 0 for x in v),
)
_NUM_LIST = (
    "a list of numbers",
    lambda v: isinstance(v, list) and all(isinstance(x, (int, float)) for x in v),
)

_TOP_FIELDS = {"seed": ("an integer >= 0", lambda v: isinstance(v, int) and v >= 0),
               "out": _STRING}

_DATA_FIELDS = {
    "csv": _STRING,
    "schema": _STRING,
    "artifact": _STRING,
    "synthetic": ("a table", lambda v: isinstance(v, dict)),
    "fractions": (
        "three fractions summing to 1",
        lambda v: isinstance(v, list)
        and len(v) == 3
        and all(isinstance(x, (int, float)) and x >= 0 for x in v)
        and abs(sum(v) - 1.0) < 1e-9,
    ),
}

_SYNTH_FIELDS = {
    "n": _POS_INT,
    "p": _POS_INT,
    "beta": _NUM_LIST,
    "family": ("one of lognormal/exponential/weibull",
               lambda v: v in ("lognormal", "exponential", "weibull")),
    "sigma": _NONNEGATIVE,
    "base_rate": _POSITIVE,
    "weibull_shape": _POSITIVE,
    "weibull_scale": _POSITIVE,
    "censoring": ("one of none/administrative/exponential",
                  lambda v: v in ("none", "administrative", "exponential")),
    "censor_time": _POSITIVE,
    "censor_fraction": _FRACTION,
}

_MODEL_FIELDS_COMMON = {
    "kind": (f"one of {MODEL_KINDS}", lambda v: v in MODEL_KINDS),
    "hidden": _INT_LIST,
}
_MODEL_FIELDS = {
    "date": {
        "noise_dist": (f"one of {date.NOISE_DISTRIBUTIONS}",
                       lambda v: v in date.NOISE_DISTRIBUTIONS),
        "noise_placement": (f"one of {date.NOISE_PLACEMENTS}",
                            lambda v: v in date.NOISE_PLACEMENTS),
        "lambda2": _NONNEGATIVE,
        "lambda3": _NONNEGATIVE,
        "gan_loss": (f"one of {date.GAN_LOSS_FORMS}", lambda v: v in date.GAN_LOSS_FORMS),
    },
    "draft": {
        "eta": _NONNEGATIVE,
        "sigma_floor": _POSITIVE,
        "jacobian": _BOOL,
    },
    "coxph": {
        "penalty": _NONNEGATIVE,
        "ties": ("one of efron/breslow", lambda v: v in ("efron", "breslow")),
    },
}

_TRAIN_FIELDS = {
    "epochs": _POS_INT,
    "batch_size": ("an integer >= 2", lambda v: isinstance(v, int) and v >= 2),
    "learning_rate": _POSITIVE,
    "adam_beta1": _UNIT,
    "adam_beta2": _UNIT,
    "adam_eps": _POSITIVE,
    "patience": ("an integer >= 0", lambda v: isinstance(v, int) and v >= 0),
    "dropout_keep": _UNIT,
    "batch_norm": _BOOL,
    "disc_steps": _POS_INT,
    "validation_samples": _POS_INT,
}

_EVAL_FIELDS = {
    "sample_count": _POS_INT,
    "interval_level": ("a number in (0, 1)", lambda v: isinstance(v, (int, float)) and 0 < v < 1),
    "dump_samples": _BOOL,
}


def _check_fields(section: str, table: dict, allowed: dict) -> None:
    for key, value in table.items():
        if key not in allowed:
            raise ConfigError(f"unknown field [{section}].{key}")
        domain, ok = allowed[key]
        if not ok(value):
            raise ConfigError(f"field [{section}].{key} must be {domain}, got {value!r}")


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def validate_config(cfg: dict, command: str) -> None:
    for key, value in cfg.items():
        if key in ("data", "model", "train", "eval"):
            if not isinstance(value, dict):
                raise ConfigError(f"section [{key}] must be a table")
            continue
        if key not in _TOP_FIELDS:
            raise ConfigError(f"unknown field {key}")
        domain, ok = _TOP_FIELDS[key]
        if not ok(value):
            raise ConfigError(f"field {key} must be {domain}, got {value!r}")

    data = dict(cfg.get("data", {}))
    synth = data.pop("synthetic", None)
    _check_fields("data", {**data, **({"synthetic": synth} if synth is not None else {})},
                  _DATA_FIELDS)
    if synth is not None:
        _check_fields("data.synthetic", synth, _SYNTH_FIELDS)
    sources = [k for k in ("csv",) if k in data] + (["synthetic"] if synth is not None else [])
    if command in ("prepare", "synth") and len(sources) != 1:
        raise ConfigError(
            "[data] must declare exactly one dataset source (csv or synthetic), "
            f"got {sources or 'none'}"
        )
    if len(sources) > 1:
        raise ConfigError(f"[data] must declare exactly one dataset source, got {sources}")
    if "csv" in data and "schema" not in data:
        raise ConfigError("[data].csv requires [data].schema")
    if command == "prepare" and "csv" not in data:
        raise ConfigError("prepare requires [data].csv and [data].schema")
    if command == "synth" and synth is None:
        raise ConfigError("synth requires a [data.synthetic] table")
    if command == "prepare":
        for key in ("csv", "schema"):
            if key in data and not Path(data[key]).exists():
                raise ConfigError(f"[data].{key}: file not found: {data[key]}")

    model = cfg.get("model", {})
    kind = model.get("kind")
    if command in ("train", "evaluate"):
        if kind is None:
            raise ConfigError("[model].kind is required")
        allowed = {**_MODEL_FIELDS_COMMON, **_MODEL_FIELDS[kind]} if kind in MODEL_KINDS else _MODEL_FIELDS_COMMON
        _check_fields("model", model, allowed)
        _check_fields("train", cfg.get("train", {}), _TRAIN_FIELDS)
    _check_fields("eval", cfg.get("eval", {}), _EVAL_FIELDS)


# -- command implementations --------------------------------------------------------


def _effective_seed(cfg: dict, args) -> int:
    return args.seed if args.seed is not None else int(cfg.get("seed", 0))


def _out_dir(cfg: dict, args) -> Path:
    out = args.out or cfg.get("out")
    if out is None:
        raise ConfigError("an output directory is required (--out or config `out`)")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_prepare(cfg: dict, seed: int, out_dir: Path) -> dict:
    data_cfg = cfg["data"]
    schema = DatasetSchema.from_json(data_cfg["schema"])
    fractions = tuple(data_cfg.get("fractions", (0.8, 0.1, 0.1)))
    dataset = load_csv(data_cfg["csv"], schema, fractions=fractions, seed=seed)
    manifest = save_artifact(dataset, out_dir / "dataset", {"seed": seed, "source": "csv"})
    print(
        f"prepared {manifest['n']} records, {manifest['p']} features, "
        f"events {100 * manifest['event_fraction']:.1f}%, t_max {manifest['t_max']:g}"
    )
    return manifest


def cmd_synth(cfg: dict, seed: int, out_dir: Path) -> dict:
    data_cfg = cfg["data"]
    synth = dict(data_cfg["synthetic"])
    synth.setdefault("seed", seed)
    synth["beta"] = tuple(synth.get("beta", ()))
    spec = SyntheticSpec(**synth)
    dataset = generate_synthetic(spec)
    fractions = tuple(data_cfg.get("fractions", (0.8, 0.1, 0.1)))
    dataset = split_dataset(dataset, fractions=fractions, seed=seed)
    manifest = save_artifact(dataset, out_dir / "dataset", {"seed": seed, "source": "synthetic"})
    print(
        f"synthesized {manifest['n']} records, events {100 * manifest['event_fraction']:.1f}%, "
        f"t_max {manifest['t_max']:g}"
    )
    return manifest


def _build_model_config(cfg: dict, kind: str, seed: int):
    model_cfg = {k: v for k, v in cfg.get("model", {}).items() if k not in ("kind",)}
    train_cfg = dict(cfg.get("train", {}))
    eval_cfg = cfg.get("eval", {})
    if "hidden" in model_cfg:
        model_cfg["hidden"] = tuple(model_cfg["hidden"])
    kwargs = {**model_cfg, **train_cfg, "seed": seed}
    if "sample_count" in eval_cfg:
        kwargs["sample_count"] = eval_cfg["sample_count"]
    if kind == "date":
        return date.DateConfig(**kwargs)
    if kind == "draft":
        kwargs.pop("disc_steps", None)
        kwargs.pop("validation_samples", None)
        return draft.DraftConfig(**kwargs)
    raise ConfigError(f"[model].kind must be one of {MODEL_KINDS}, got {kind!r}")


def _load_dataset(cfg: dict, out_dir: Path) -> SurvivalDataset:
    artifact = cfg.get("data", {}).get("artifact", str(out_dir / "dataset"))
    if not Path(artifact).exists():
        raise ConfigError(
            f"dataset artifact not found at {artifact}; run prepare/synth first "
            "or set [data].artifact"
        )
    return load_artifact(artifact)


def cmd_train(cfg: dict, seed: int, out_dir: Path, kind: str) -> Path:
    dataset = _load_dataset(cfg, out_dir)
    log_path = out_dir / "train_log.jsonl"
    ckpt_path = out_dir / "checkpoint.ndn"
    extra = {"preprocessing_hash": dataset.preprocessing_hash()}

    if kind == "coxph":
        model_cfg = cfg.get("model", {})
        fit = coxph.fit(
            dataset.subset("train"),
            penalty=float(model_cfg.get("penalty", 1e-4)),
            ties=model_cfg.get("ties", "efron"),
        )
        save_arrays(
            ckpt_path,
            {"beta": fit.beta},
            {
                "model": "coxph",
                "config": {"penalty": fit.penalty, "ties": fit.ties},
                "seed": seed,
                **extra,
            },
        )
        log = [
            {
                "converged": fit.converged,
                "n_iter": fit.n_iter,
                "grad_max_norm": fit.grad_max_norm,
                "log_likelihood": fit.log_likelihood,
            }
        ]
    else:
        config = _build_model_config(cfg, kind, seed)
        module = date if kind == "date" else draft
        model, log = module.train(dataset, config)
        module.save_checkpoint(model, ckpt_path, extra)

    with open(log_path, "w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    print(f"trained {kind}; checkpoint at {ckpt_path}")
    return ckpt_path


def _dump_samples(path: Path, indices, t, l, samples) -> None:
    t_hat = np.median(samples, axis=1)
    with open(path, "w", encoding="utf-8") as fh:
        header = ["record", "t", "l", "t_hat"] + [f"s{i}" for i in range(samples.shape[1])]
        fh.write(",".join(header) + "\n")
        for row, idx in enumerate(indices):
            cells = [str(int(idx)), repr(float(t[row])), str(int(l[row])), repr(float(t_hat[row]))]
            cells += [repr(float(v)) for v in samples[row]]
            fh.write(",".join(cells) + "\n")


def cmd_evaluate(cfg: dict, seed: int, out_dir: Path, checkpoint: str) -> MetricReport | dict:
    dataset = _load_dataset(cfg, out_dir)
    eval_cfg = cfg.get("eval", {})
    arrays, meta = load_arrays(checkpoint)
    stored_hash = meta.get("preprocessing_hash")
    if stored_hash is not None and stored_hash != dataset.preprocessing_hash():
        raise ConfigError(
            "checkpoint was trained against a different dataset encoding "
            "(preprocessing hash mismatch)"
        )
    test = dataset.subset("test")
    if test.n == 0:
        raise ConfigError("dataset has no test split")
    report_path = out_dir / "metrics.json"

    kind = meta.get("model")
    if kind == "coxph":
        risk = test.X @ arrays["beta"]
        report = {
            "ci": concordance_index(test.t, test.l, risk, higher_risk="larger_score"),
            "model": "coxph",
        }
        report_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", "utf-8")
        print(f"coxph CI {report['ci']:.4f}; report at {report_path}")
        return report

    if kind not in ("date", "draft"):
        raise ConfigError(f"unsupported checkpoint model kind {kind!r}")
    module = date if kind == "date" else draft
    model, _ = module.load_checkpoint(checkpoint)
    streams = RngStreams(seed)
    n_samples = int(eval_cfg.get("sample_count", model.config.sample_count))
    samples = model.sample_times_batch(test.X, n_samples, streams.eval)
    pred = PredictionSet(test.t, test.l, samples, dataset.t_max)
    report = evaluate_predictions(pred, float(eval_cfg.get("interval_level", 0.95)))
    report_path.write_text(report.to_json(), "utf-8")
    if eval_cfg.get("dump_samples", False):
        indices = np.flatnonzero(dataset.split == "test")
        _dump_samples(out_dir / "samples.csv", indices, test.t, test.l, samples)
    print(
        f"{kind} CI {report.ci:.4f}, non-censored median RAE "
        f"{report.rae_noncensored_median:.4f}; report at {report_path}"
    )
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="advsurv", description="Train and evaluate time-to-event models."
    )
    parser.add_argument("command", choices=["prepare", "synth", "train", "evaluate"])
    parser.add_argument("--config", required=True, help="path to a TOML config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--model", default=None, choices=MODEL_KINDS,
                        help="override [model].kind for train/evaluate")
    parser.add_argument("--checkpoint", default=None, help="checkpoint path for evaluate")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.model is not None:
            cfg.setdefault("model", {})["kind"] = args.model
        validate_config(cfg, args.command)
        seed = _effective_seed(cfg, args)
        out_dir = _out_dir(cfg, args)
        if args.command == "prepare":
            cmd_prepare(cfg, seed, out_dir)
        elif args.command == "synth":
            cmd_synth(cfg, seed, out_dir)
        elif args.command == "train":
            cmd_train(cfg, seed, out_dir, cfg["model"]["kind"])
        else:
            if args.checkpoint is None:
                raise ConfigError("evaluate requires --checkpoint")
            cmd_evaluate(cfg, seed, out_dir, args.checkpoint)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
