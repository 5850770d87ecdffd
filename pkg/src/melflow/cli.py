"""Command-line surface.

    melflow preprocess|train|eval|ablation|export-embeddings --config <path>
            [--seed N] [--out DIR] [--model PATH] [--data PATH] [--out-file PATH]

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
MELFLOW_LOG selects verbosity (error, info, debug; default info). Every
command validates its configuration fully before performing any write.
"""

import argparse
import csv
import datetime
import hashlib
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import dataio
from .config import load_config, serialize_config
from .errors import ConfigError, DataError, NumericError
from .evaluation import (
    ablation_run,
    compute_metrics,
    export_embeddings,
    render_metrics,
    write_confusion_csv,
    write_metrics_csv,
)
from .model_io import (
    artifact_from_params,
    load_model,
    params_from_artifact,
    save_model,
)
from .training import TrainingDiverged, train

logger = logging.getLogger("melflow.cli")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging(log_file=""):
    level = LOG_LEVELS.get(os.environ.get("MELFLOW_LOG", "info").lower(), logging.INFO)
    root = logging.getLogger()
    root.setLevel(level)
    for handler in list(root.handlers):
        root.removeHandler(handler)
    stream = logging.StreamHandler(sys.stdout)
    stream.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(stream)
    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging.Formatter("%(message)s"))
        root.addHandler(file_handler)


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="melflow",
        description="Spectral anomaly detection for network flow records",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("preprocess", "clean, encode, normalize, split, and rebalance a raw export"),
        ("train", "train on preprocessed splits and save a model artifact"),
        ("eval", "score a dataset with a saved model"),
        ("ablation", "train the spectral and raw variants and compare F1"),
        ("export-embeddings", "write encoder embeddings for external visualization"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="path to the run config")
        p.add_argument("--seed", type=int, default=None, help="override train.seed")
        p.add_argument("--out", default=None, help="override out.dir")
        if name in ("eval", "export-embeddings"):
            p.add_argument("--model", default=None, help="model artifact path")
            p.add_argument("--data", default=None, help="preprocessed data file")
        if name == "export-embeddings":
            p.add_argument("--out-file", default=None, help="embeddings output file")
    return parser.parse_args(argv)


def main(argv=None):
    args = _parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, train=replace(cfg.train, seed=args.seed))
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)
        _setup_logging(cfg.log_file)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def _out_dir(cfg):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_raw(cfg):
    # Validates the label map before any file is touched.
    label_map = cfg.data.label_map()
    if not cfg.data.path:
        raise ConfigError("data.path must be set")
    table = dataio.load_table(cfg.data.path, cfg.data.delimiter, cfg.data.label_column)
    audit = dataio.column_audit(table, cfg.prep.zero_fraction_threshold)
    cleaned = dataio.clean_columns(table, cfg.prep.zero_fraction_threshold)
    dataset = dataio.encode_labels(cleaned, label_map)
    return dataset, audit, table


def cmd_preprocess(cfg, args):
    dataset, audit, table = _load_raw(cfg)
    train_ds, test_ds = dataio.stratified_split(
        dataset, cfg.prep.test_fraction, cfg.train.seed
    )
    train_ds = dataio.minmax_normalize(train_ds)
    test_ds = dataio.apply_normalizer(test_ds, train_ds.normalizer)
    before = train_ds.class_counts()
    if cfg.prep.resample != "none":
        train_ds = dataio.rebalance(train_ds, cfg.prep.resample, cfg.train.seed)
    out = _out_dir(cfg)
    dataio.save_dataset(train_ds, out / "train.csv", cfg.data.delimiter)
    dataio.save_dataset(test_ds, out / "test.csv", cfg.data.delimiter)
    dataio.save_normalizer(train_ds.normalizer, out / "normalizer.csv")
    logger.info("read %d rows x %d columns from %s", table.n_rows, table.n_cols,
                cfg.data.path)
    for name, reason in audit:
        logger.info("dropped column %s (%s)", name, reason)
    logger.info("kept %d feature columns", dataset.n_features)
    logger.info("train split: %d normal / %d attack before resampling", *before)
    logger.info("train rows %d (%d/%d), test rows %d (%d/%d)",
                train_ds.n_rows, *train_ds.class_counts(),
                test_ds.n_rows, *test_ds.class_counts())
    logger.info("wrote %s, %s, %s", out / "train.csv", out / "test.csv",
                out / "normalizer.csv")
    return EXIT_OK


def _load_splits(cfg):
    out = Path(cfg.out_dir)
    train_path = out / "train.csv"
    test_path = out / "test.csv"
    if not train_path.exists() or not test_path.exists():
        raise DataError(
            f"preprocessed splits not found in {out}; run 'melflow preprocess' first"
        )
    return (
        dataio.load_dataset(train_path, cfg.data.delimiter),
        dataio.load_dataset(test_path, cfg.data.delimiter),
        dataio.load_normalizer(out / "normalizer.csv"),
    )


def _history_rows(history):
    rows = [["epoch", "ce_loss", "penalty", "total_loss", "train_accuracy", "val_f1"]]
    for record in history:
        rows.append(
            [
                record.epoch,
                repr(record.loss.ce_loss),
                repr(record.loss.penalty),
                repr(record.loss.total_loss),
                repr(record.loss.batch_accuracy),
                repr(record.val_f1),
            ]
        )
    return rows


def _write_history(history, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(_history_rows(history))


def cmd_train(cfg, args):
    train_ds, test_ds, normalizer = _load_splits(cfg)
    out = _out_dir(cfg)
    history_path = out / "history.csv"
    try:
        theta, history = train(cfg.model, cfg.train, train_ds, test_ds)
    except TrainingDiverged as exc:
        _write_history(exc.history, history_path)
        logger.error("training aborted: %s (partial history kept)", exc)
        raise
    _write_history(history, history_path)
    digest = hashlib.sha256(history_path.read_bytes()).hexdigest()
    artifact = artifact_from_params(serialize_config(cfg), theta, normalizer, digest)
    save_model(artifact, out / "model.bin")
    final = history[-1].val_f1 if history else float("nan")
    logger.info("saved %s (validation f1 %.4f over %d epochs)",
                out / "model.bin", final, len(history))
    return EXIT_OK


def cmd_eval(cfg, args):
    model_path = args.model or str(Path(cfg.out_dir) / "model.bin")
    data_path = args.data or str(Path(cfg.out_dir) / "test.csv")
    artifact = load_model(model_path)
    model_cfg, theta = params_from_artifact(artifact)
    dataset = dataio.load_dataset(data_path, model_cfg.data.delimiter)
    expected = len(artifact.normalizer)
    if expected and dataset.n_features != expected:
        raise DataError(
            f"model was trained on {expected} feature columns but {data_path} "
            f"has {dataset.n_features}"
        )
    from .training import predict

    preds = predict(model_cfg.model, theta, dataset.features)
    report = compute_metrics(preds, dataset.labels, model_cfg.model.n_classes)
    out = _out_dir(cfg)
    (out / "metrics.txt").write_text(render_metrics(report) + "\n", encoding="utf-8")
    write_metrics_csv(report, out / "metrics.csv")
    write_confusion_csv(report.counts, out / "confusion.csv")
    logger.info("%s", render_metrics(report))
    logger.info("wrote %s, %s, %s", out / "metrics.txt", out / "metrics.csv",
                out / "confusion.csv")
    return EXIT_OK


def cmd_ablation(cfg, args):
    dataset, _, _ = _load_raw(cfg)
    name = Path(cfg.data.path).stem
    result = ablation_run(cfg, dataset, name)
    out = _out_dir(cfg)
    ledger = out / "ablation_ledger.csv"
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    with open(ledger, "a", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerow(
            [
                stamp,
                result.dataset_name,
                result.seed,
                repr(result.f1_with_mfcc),
                repr(result.f1_without_mfcc),
                result.config_snapshot.replace("\n", "; "),
            ]
        )
    logger.info("ablation %s: f1 with mfcc %.4f, without %.4f (ledger %s)",
                name, result.f1_with_mfcc, result.f1_without_mfcc, ledger)
    return EXIT_OK


def cmd_export_embeddings(cfg, args):
    model_path = args.model or str(Path(cfg.out_dir) / "model.bin")
    data_path = args.data or str(Path(cfg.out_dir) / "test.csv")
    artifact = load_model(model_path)
    model_cfg, theta = params_from_artifact(artifact)
    dataset = dataio.load_dataset(data_path, model_cfg.data.delimiter)
    out = _out_dir(cfg)
    target = args.out_file or str(out / "embeddings.csv")
    export_embeddings(model_cfg.model, theta, dataset, target)
    logger.info("wrote %d embeddings to %s", dataset.n_rows, target)
    return EXIT_OK


_COMMANDS = {
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablation": cmd_ablation,
    "export-embeddings": cmd_export_embeddings,
}


if __name__ == "__main__":
    sys.exit(main())
