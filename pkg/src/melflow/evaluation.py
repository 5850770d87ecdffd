"""Metrics, PCA, the with/without-spectral-frontend ablation, embedding export."""

import csv
import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .dataio import apply_normalizer, minmax_normalize, rebalance, stratified_split
from .errors import ConfigError, DataError

F1_AVERAGING = ("binary-positive", "macro")


@dataclass
class ConfusionMatrix:
    """counts[t][p] = number of items of true class t predicted as p."""

    counts: np.ndarray

    @property
    def n_classes(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())


def confusion(preds, truth, n_classes=2):
    preds = np.asarray(preds, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if preds.shape != truth.shape or preds.ndim != 1:
        raise DataError(
            f"predictions ({preds.shape}) and truth ({truth.shape}) must be "
            "equal-length vectors"
        )
    for name, arr in (("predictions", preds), ("truth", truth)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise DataError(f"{name} contain labels outside [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (truth, preds), 1)
    return ConfusionMatrix(counts)


def per_class_scores(cm):
    """(precision, recall, f1) arrays with the 0/0 -> 0 convention."""
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    predicted = counts.sum(axis=0)
    actual = counts.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros_like(tp), where=actual > 0)
    pr = precision + recall
    f1_scores = np.divide(
        2.0 * precision * recall, pr, out=np.zeros_like(tp), where=pr > 0
    )
    return precision, recall, f1_scores


def f1(cm, averaging="binary-positive", include_absent=True):
    """F1 from a confusion matrix: positive-class (label 1) or macro average."""
    if averaging not in F1_AVERAGING:
        raise ConfigError(f"averaging must be one of {F1_AVERAGING}, got {averaging!r}")
    _, _, scores = per_class_scores(cm)
    if averaging == "binary-positive":
        if cm.n_classes < 2:
            raise DataError("binary-positive averaging needs at least 2 classes")
        return float(scores[1])
    if not include_absent:
        present = (cm.counts.sum(axis=0) + cm.counts.sum(axis=1)) > 0
        if present.any():
            return float(scores[present].mean())
        return 0.0
    return float(scores.mean())


def accuracy(cm):
    if cm.total == 0:
        return 0.0
    return float(np.trace(cm.counts) / cm.total)


@dataclass
class MetricsReport:
    precision: np.ndarray
    recall: np.ndarray
    f1_scores: np.ndarray
    macro_f1: float
    accuracy: float
    counts: ConfusionMatrix


def compute_metrics(preds, truth, n_classes=2):
    cm = confusion(preds, truth, n_classes)
    precision, recall, scores = per_class_scores(cm)
    return MetricsReport(
        precision, recall, scores, float(scores.mean()), accuracy(cm), cm
    )


CLASS_NAMES = {0: "normal", 1: "attack"}


def render_metrics(report):
    """Aligned text table of per-class metrics plus accuracy and macro F1."""
    lines = [f"{'class':<10}{'precision':>11}{'recall':>11}{'f1':>11}"]
    for c in range(report.counts.n_classes):
        name = CLASS_NAMES.get(c, str(c))
        lines.append(
            f"{name:<10}{report.precision[c]:>11.4f}{report.recall[c]:>11.4f}"
            f"{report.f1_scores[c]:>11.4f}"
        )
    lines.append(f"accuracy  {report.accuracy:.4f}")
    lines.append(f"macro f1  {report.macro_f1:.4f}")
    return "\n".join(lines)


def write_metrics_csv(report, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["class", "precision", "recall", "f1"])
        for c in range(report.counts.n_classes):
            writer.writerow(
                [
                    CLASS_NAMES.get(c, str(c)),
                    repr(float(report.precision[c])),
                    repr(float(report.recall[c])),
                    repr(float(report.f1_scores[c])),
                ]
            )
        writer.writerow(["accuracy", repr(report.accuracy), "", ""])
        writer.writerow(["macro_f1", repr(report.macro_f1), "", ""])


def write_confusion_csv(cm, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["true\\pred"] + [str(c) for c in range(cm.n_classes)])
        for t in range(cm.n_classes):
            writer.writerow([str(t)] + [int(v) for v in cm.counts[t]])


@dataclass
class PcaModel:
    """Mean vector, orthonormal component rows, and their explained variances."""

    mean: np.ndarray
    components: np.ndarray  # (k, d)
    explained_variance: np.ndarray


def pca_fit(features, k):
    """PCA via symmetric eigendecomposition of the sample covariance.

    Components are sorted by descending eigenvalue and sign-normalized so the
    first entry of largest magnitude is positive.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ConfigError("pca_fit needs a (n_rows >= 2, d) matrix")
    n, d = x.shape
    if not 1 <= k <= min(n, d):
        raise ConfigError(f"k_pca must be in [1, min(n_rows, d)] = [1, {min(n, d)}], got {k}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    components = eigvecs[:, order].T.copy()
    for row in components:
        pivot = np.argmax(np.abs(row) > 1e-12)
        if row[pivot] < 0:
            row *= -1.0
    return PcaModel(mean, components, eigvals[order].copy())


def pca_transform(model, features):
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != model.mean.shape[0]:
        raise DataError(
            f"pca model expects width {model.mean.shape[0]}, got {x.shape[-1]}"
        )
    return (x - model.mean) @ model.components.T


def pca_inverse_transform(model, projected):
    return np.asarray(projected, dtype=np.float64) @ model.components + model.mean


@dataclass(frozen=True)
class AblationResult:
    f1_with_mfcc: float
    f1_without_mfcc: float
    dataset_name: str
    seed: int
    config_snapshot: str


def _dataset_digest(dataset):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(dataset.features).tobytes())
    h.update(np.ascontiguousarray(dataset.labels).tobytes())
    return h.hexdigest()


def ablation_run(run_cfg, dataset, dataset_name=""):
    """Train the spectral and the raw-feature variant under identical budgets.

    The dataset must be cleaned and encoded but not yet split or normalized;
    the split happens here so both arms provably score the same test rows
    (their digests are compared). Returns both positive-class F1 values.
    """
    from . import training
    from .config import serialize_config

    train_ds, test_ds = stratified_split(
        dataset, run_cfg.prep.test_fraction, run_cfg.train.seed
    )
    train_ds = minmax_normalize(train_ds)
    test_ds = apply_normalizer(test_ds, train_ds.normalizer)
    if run_cfg.prep.resample != "none":
        train_ds = rebalance(train_ds, run_cfg.prep.resample, run_cfg.train.seed)
    scores = {}
    digests = {}
    for variant in ("mfcc", "raw"):
        settings = replace(run_cfg.model, variant=variant)
        digests[variant] = _dataset_digest(test_ds)
        theta, _ = training.train(settings, run_cfg.train, train_ds, test_ds)
        preds = training.predict(settings, theta, test_ds.features)
        scores[variant] = f1(confusion(preds, test_ds.labels, settings.n_classes))
    if digests["mfcc"] != digests["raw"]:
        raise DataError("ablation arms scored different test splits")
    return AblationResult(
        scores["mfcc"],
        scores["raw"],
        dataset_name,
        run_cfg.train.seed,
        serialize_config(run_cfg),
    )


def export_embeddings(settings, theta, dataset, path):
    """One row per item: the k embedding values then the true label."""
    from . import training

    z = training.embed(settings, theta, dataset.features)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"z{i}" for i in range(z.shape[1])] + ["label"])
        for row, label in zip(z, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])
    return path
