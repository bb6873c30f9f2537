"""Command-line entry point: synth, train, eval, sweep, ablate.

Each command reads an optional JSON config file; explicit flags override
file fields and the merged result is echoed to the output directory, so a
run can be reproduced from its config.json alone. Primary outputs are byte
stable across reruns; wall-clock facts live in a separate meta.json.

Exit codes: 0 ok, 2 usage, 3 numeric failure, 4 I/O, 5 data contract.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import time
from datetime import datetime, timezone

from . import __version__
from .data import (
    DataError,
    NoiseSpec,
    apply_standardization,
    generate_synthetic,
    label_subset,
    load_dataset,
    split,
    standardize,
    write_dataset,
)
from .evaluation import evaluate_state, robustness_sweep, run_ablation
from .training import TrainConfig, TrainingFailure, checkpoint, restore, train

SCHEMA_VERSION = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4
EXIT_DATA = 5

VARIANT_VIEWS = {"T": "time", "F": "freq", "T+F": "both", "full": "both"}
MODE_ALIASES = {"semi": "semi_supervised", "unsup": "unsupervised"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Defaults and argument plumbing

TRAIN_KNOBS = {
    "epochs": 12,
    "warmup_epochs": 5,
    "batch_size": 64,
    "lr": 0.001,
    "tau": 0.1,
    "lam": 1.0,
    "tau_proto": 1.0,
    "gamma": 0.01,
    "prototype_ways": None,
    "k": None,
    "seed": 0,
    "mode": "unsupervised",
    "labeled_fraction": 0.1,
    "eq11_grouping": "cross_view",
    "views": "both",
    "levels": 3,
    "channels_per_level": [32, 64, 128],
    "kernel_size": 5,
    "dropout_rate": 0.1,
    "embedding_dim": 64,
    "channel_shared": False,
    "log_magnitude": False,
    "include_positive": False,
    "track_nmi": True,
}

DEFAULTS = {
    "synth": {
        "classes": 2, "per_class": 64, "length": 64, "channels": 1,
        "seed": 0, "out": None,
    },
    "train": {
        **TRAIN_KNOBS, "data": None, "out": None, "standardize": True,
    },
    "eval": {
        "checkpoint": None, "data": None, "test_data": None, "out": None,
        "test_fraction": 0.25, "split_seed": None, "variant": "full", "seed": 0,
    },
    "sweep": {
        **TRAIN_KNOBS, "data": None, "out": None, "kind": "gaussian",
        "noise_levels": [0.0, 0.1, 0.3], "noise": None, "eval_seeds": [0],
        "corrupt": "both", "test_fraction": 0.25,
    },
    "ablate": {
        **TRAIN_KNOBS, "data": None, "out": None,
        "variants": ["T", "F", "T+F", "full"], "eval_seeds": [0],
        "test_fraction": 0.25,
    },
}


def _int_list(text: str) -> list:
    return [int(x) for x in text.split(",") if x]


def _float_list(text: str) -> list:
    return [float(x) for x in text.split(",") if x]


def _str_list(text: str) -> list:
    return [x for x in text.split(",") if x]


def _add_train_knobs(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--epochs", type=int, default=S, help="total training epochs")
    p.add_argument("--warmup-epochs", type=int, default=S,
                   help="instance-loss-only epochs before co-training")
    p.add_argument("--batch-size", type=int, default=S, help="mini-batch size")
    p.add_argument("--lr", type=float, default=S, help="Adam learning rate")
    p.add_argument("--tau", type=float, default=S, help="instance loss temperature")
    p.add_argument("--lam", type=float, default=S, help="co-training loss weight")
    p.add_argument("--tau-proto", type=float, default=S, help="prototype loss temperature")
    p.add_argument("--gamma", type=float, default=S,
                   help="prototype moving-average step in [0, 1]")
    p.add_argument("--ways", dest="prototype_ways", type=_int_list, default=S,
                   help="comma list of prototype counts (default K,2K)")
    p.add_argument("--k", type=int, default=S,
                   help="base prototype count (default: label count)")
    p.add_argument("--seed", type=int, default=S, help="master training seed")
    p.add_argument("--mode", default=S, choices=["unsupervised", "semi_supervised", "semi"],
                   help="training mode (semi = semi_supervised)")
    p.add_argument("--labeled-fraction", type=float, default=S,
                   help="labeled fraction for semi-supervised mode")
    p.add_argument("--eq11-grouping", default=S, choices=["cross_view", "intra_view"],
                   help="assignment view that groups moving-average updates")
    p.add_argument("--views", default=S, choices=["both", "time", "freq"],
                   help="which encoders to train")
    p.add_argument("--levels", type=int, default=S, help="conv levels per encoder")
    p.add_argument("--channels", dest="channels_per_level", type=_int_list, default=S,
                   help="comma list of conv channels per level")
    p.add_argument("--kernel-size", type=int, default=S, help="conv kernel width")
    p.add_argument("--dropout", dest="dropout_rate", type=float, default=S,
                   help="dropout rate for the augmented pass")
    p.add_argument("--embedding-dim", type=int, default=S, help="output embedding width")
    p.add_argument("--channel-shared", action=argparse.BooleanOptionalAction, default=S,
                   help="share one conv stack across input channels")
    p.add_argument("--log-magnitude", action=argparse.BooleanOptionalAction, default=S,
                   help="use log1p magnitudes for the frequency view")
    p.add_argument("--include-positive", action=argparse.BooleanOptionalAction, default=S,
                   help="count the positive pair in the instance loss denominator")
    p.add_argument("--track-nmi", action=argparse.BooleanOptionalAction, default=S,
                   help="record clustering NMI per epoch when labels exist")


def _parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    root = argparse.ArgumentParser(
        prog="coview",
        description="Dual-view co-trained representation learning for time series.",
    )
    root.add_argument("--version", action="version", version=f"coview {__version__}")
    sub = root.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--classes", type=int, default=S, help="number of classes (>= 2)")
    p.add_argument("--per-class", type=int, default=S, help="samples per class")
    p.add_argument("--length", type=int, default=S, help="series length (>= 32)")
    p.add_argument("--channels", type=int, default=S, help="channels per series")
    p.add_argument("--seed", type=int, default=S, help="generator seed")
    p.add_argument("--out", default=S, help="output dataset path (.tsd)")

    p = sub.add_parser("train", help="train the dual-view encoders")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--data", default=S, help="training dataset (.tsd or .csv)")
    p.add_argument("--out", default=S, help="output run directory")
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=S,
                   help="z-score the series before training (default on)")
    _add_train_knobs(p)

    p = sub.add_parser("eval", help="probe a trained checkpoint")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--checkpoint", default=S, help="checkpoint file from train")
    p.add_argument("--data", default=S, help="labeled dataset; split for probe train/test")
    p.add_argument("--test-data", default=S, help="separate test dataset (skips the split)")
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--test-fraction", type=float, default=S,
                   help="held-out fraction when --test-data is absent")
    p.add_argument("--split-seed", type=int, default=S,
                   help="seed for the probe train/test split (default --seed)")
    p.add_argument("--variant", default=S, choices=sorted(VARIANT_VIEWS),
                   help="embedding slice: T, F, T+F, or full")
    p.add_argument("--seed", type=int, default=S, help="probe seed")

    p = sub.add_parser("sweep", help="noise-robustness sweep")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--data", default=S, help="clean labeled dataset")
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--kind", default=S, choices=["missing", "gaussian"],
                   help="corruption kind for --noise-levels")
    p.add_argument("--noise-levels", dest="noise_levels", type=_float_list, default=S,
                   help="comma list of corruption levels")
    p.add_argument("--eval-seeds", dest="eval_seeds", type=_int_list, default=S,
                   help="comma list of per-cell training seeds")
    p.add_argument("--corrupt", default=S, choices=["both", "train", "test"],
                   help="which splits receive the corruption")
    p.add_argument("--test-fraction", type=float, default=S, help="held-out fraction")
    _add_train_knobs(p)

    p = sub.add_parser("ablate", help="single-view / no-co-training ablations")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--data", default=S, help="labeled dataset")
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--variants", type=_str_list, default=S,
                   help="comma list drawn from T,F,T+F,full")
    p.add_argument("--eval-seeds", dest="eval_seeds", type=_int_list, default=S,
                   help="comma list of per-cell training seeds")
    p.add_argument("--test-fraction", type=float, default=S, help="held-out fraction")
    _add_train_knobs(p)

    return root


def _merge(command: str, args: argparse.Namespace) -> dict:
    merged = dict(DEFAULTS[command])
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path) as fh:
                blob = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed config file {config_path}: {exc}") from exc
        if not isinstance(blob, dict):
            raise UsageError(f"config file {config_path} must hold a JSON object")
        unknown = sorted(set(blob) - set(merged) - {"command", "schema_version"})
        if unknown:
            raise UsageError(f"unknown config fields for {command}: {', '.join(unknown)}")
        merged.update({k: v for k, v in blob.items() if k in merged})
    explicit = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    merged.update(explicit)
    if "mode" in merged:
        merged["mode"] = MODE_ALIASES.get(merged["mode"], merged["mode"])
    return merged


def _require(merged: dict, *keys) -> None:
    for key in keys:
        if merged.get(key) in (None, ""):
            raise UsageError(f"missing --{key.replace('_', '-')}")


def _train_config(merged: dict) -> TrainConfig:
    kwargs = {key: merged[key] for key in TRAIN_KNOBS}
    return TrainConfig(**kwargs)


# ---------------------------------------------------------------------------
# Output helpers


def _echo_config(out_dir: str, command: str, merged: dict) -> None:
    blob = {"schema_version": SCHEMA_VERSION, "command": command, **merged}
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(blob, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_meta(out_dir: str, started: float, extra: dict | None = None) -> None:
    meta = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "started": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "seconds": time.time() - started,
    }
    if extra:
        meta.update(extra)
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


class _FlushingCsv:
    """CSV writer that flushes after every row, so crashes keep partial output."""

    def __init__(self, path, fieldnames):
        self.fieldnames = fieldnames
        self.fh = open(path, "w", newline="")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(fieldnames)
        self.fh.flush()

    def row(self, record: dict) -> None:
        self.writer.writerow([record[name] for name in self.fieldnames])
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()


# ---------------------------------------------------------------------------
# Commands


def cmd_synth(merged: dict) -> int:
    _require(merged, "out")
    ds = generate_synthetic(
        merged["per_class"], merged["length"], merged["channels"],
        merged["classes"], seed=merged["seed"],
    )
    write_dataset(ds, merged["out"])
    print(f"wrote {merged['out']}: n={ds.n} t={ds.t} d={ds.d} classes={ds.class_count}")
    return 0


def cmd_train(merged: dict) -> int:
    _require(merged, "data", "out")
    started = time.time()
    config = _train_config(merged)
    ds = load_dataset(merged["data"])
    stats = None
    if merged["standardize"]:
        ds, _, stats = standardize(ds, [])

    subset = None
    if config.mode == "semi_supervised":
        if ds.labels is None:
            raise DataError("semi-supervised training requires a labeled dataset")
        subset = label_subset(ds, config.labeled_fraction, seed=config.seed)

    out_dir = merged["out"]
    os.makedirs(out_dir, exist_ok=True)
    _echo_config(out_dir, "train", merged)

    state, metrics = train(ds, config, subset=subset)
    if stats is not None:
        state.time_mean, state.time_std = stats

    losses = _FlushingCsv(
        os.path.join(out_dir, "losses.csv"),
        ["epoch", "batch", "inst_h", "inst_g", "cot_h", "cot_g", "total"],
    )
    for row in metrics["batches"]:
        losses.row(row)
    losses.close()

    with open(os.path.join(out_dir, "epochs.jsonl"), "w") as fh:
        for record in metrics["epochs"]:
            row = {k: v for k, v in record.items() if k != "wall_time"}
            row["mode"] = config.mode
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    checkpoint(state, os.path.join(out_dir, "checkpoint.tsckpt"))
    _write_meta(out_dir, started, {
        "epoch_seconds": [r["wall_time"] for r in metrics["epochs"] if "wall_time" in r],
    })
    last = metrics["epochs"][-1]
    print(f"trained {config.epochs} epochs: total={last['total']:.4f} -> {out_dir}")
    return 0


def cmd_eval(merged: dict) -> int:
    _require(merged, "checkpoint", "data", "out")
    started = time.time()
    state = restore(merged["checkpoint"])
    variant = merged["variant"]
    views = VARIANT_VIEWS[variant]
    if views in ("time", "both") and state.params_h is None:
        raise DataError(f"variant {variant} needs a time encoder, checkpoint has none")
    if views in ("freq", "both") and state.params_g is None:
        raise DataError(f"variant {variant} needs a frequency encoder, checkpoint has none")
    state.config = dataclasses.replace(state.config, views=views)

    ds = load_dataset(merged["data"])
    if ds.labels is None:
        raise DataError("evaluation requires a labeled dataset")
    if state.time_mean is not None:
        ds = apply_standardization(ds, state.time_mean, state.time_std)
    if merged["test_data"]:
        train_ds = ds
        test_ds = load_dataset(merged["test_data"])
        if test_ds.labels is None:
            raise DataError("evaluation requires a labeled test dataset")
        if state.time_mean is not None:
            test_ds = apply_standardization(test_ds, state.time_mean, state.time_std)
    else:
        split_seed = merged["split_seed"]
        split_seed = merged["seed"] if split_seed is None else split_seed
        frac = merged["test_fraction"]
        train_ds, test_ds = split(ds, [1.0 - frac, frac], seed=split_seed)

    out_dir = merged["out"]
    os.makedirs(out_dir, exist_ok=True)
    _echo_config(out_dir, "eval", merged)

    report = evaluate_state(state, train_ds, test_ds, merged["seed"])
    blob = {
        "schema_version": SCHEMA_VERSION,
        "variant": variant,
        "seed": merged["seed"],
        **report.to_dict(),
    }
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(blob, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_meta(out_dir, started)
    print(
        f"accuracy={report.accuracy:.4f} auroc={report.auroc:.4f} "
        f"nmi={report.nmi:.4f} (variant={variant})"
    )
    return 0


def cmd_sweep(merged: dict) -> int:
    _require(merged, "data", "out")
    started = time.time()
    config = _train_config(merged)
    ds = load_dataset(merged["data"])
    if merged["noise"]:
        specs = [NoiseSpec(entry["kind"], float(entry["level"]), 0) for entry in merged["noise"]]
    else:
        specs = [NoiseSpec(merged["kind"], float(level), 0) for level in merged["noise_levels"]]

    out_dir = merged["out"]
    os.makedirs(out_dir, exist_ok=True)
    _echo_config(out_dir, "sweep", merged)

    table = _FlushingCsv(
        os.path.join(out_dir, "sweep.csv"),
        ["kind", "level", "seed", "accuracy", "auroc"],
    )
    try:
        rows = robustness_sweep(
            ds, specs, config, merged["eval_seeds"],
            test_fraction=merged["test_fraction"], corrupt=merged["corrupt"],
            on_row=table.row,
        )
    finally:
        table.close()
    _write_meta(out_dir, started, {"rows": len(rows)})
    print(f"swept {len(specs)} levels x {len(merged['eval_seeds'])} seeds -> {out_dir}")
    return 0


def cmd_ablate(merged: dict) -> int:
    _require(merged, "data", "out")
    started = time.time()
    config = _train_config(merged)
    ds = load_dataset(merged["data"])
    variants = merged["variants"]
    unknown = sorted(set(variants) - set(VARIANT_VIEWS))
    if unknown:
        raise UsageError(f"unknown ablation variants: {', '.join(unknown)}")

    out_dir = merged["out"]
    os.makedirs(out_dir, exist_ok=True)
    _echo_config(out_dir, "ablate", merged)

    table = _FlushingCsv(
        os.path.join(out_dir, "ablation.csv"),
        ["variant", "seed", "accuracy", "auroc"],
    )
    try:
        rows = run_ablation(
            ds, variants, config, merged["eval_seeds"],
            test_fraction=merged["test_fraction"], on_row=table.row,
        )
    finally:
        table.close()
    _write_meta(out_dir, started, {"rows": len(rows)})
    print(f"ablated {len(variants)} variants x {len(merged['eval_seeds'])} seeds -> {out_dir}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "ablate": cmd_ablate,
}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        merged = _merge(args.command, args)
        return COMMANDS[args.command](merged)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingFailure, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DataError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
