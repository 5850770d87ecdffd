"""Tabular intrusion-dataset loading and preprocessing.

The chain is: load_table -> clean_columns -> encode_labels ->
stratified_split -> minmax_normalize (fit on train, applied to held-out)
-> rebalance. Everything is a pure function of its inputs plus a seed, and
a Dataset is immutable once built.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, NumericError

REASON_NAN_INF = "nan/inf"
REASON_ZERO_FRACTION = "zero-fraction"


@dataclass
class RawTable:
    """Parsed delimiter-separated file with cells kept as text until encoding."""

    column_names: list
    rows: list
    label_column: str

    @property
    def n_rows(self):
        return len(self.rows)

    @property
    def n_cols(self):
        return len(self.column_names)

    def column(self, name):
        j = self.column_names.index(name)
        return [row[j] for row in self.rows]


@dataclass(frozen=True)
class LabelMap:
    """Binary label encoding: names in positive_names -> 1, negative_names -> 0."""

    positive_names: frozenset
    negative_names: frozenset

    def __post_init__(self):
        overlap = self.positive_names & self.negative_names
        if overlap:
            raise ConfigError(f"labels in both classes: {sorted(overlap)}")
        if not self.positive_names or not self.negative_names:
            raise ConfigError("label map needs at least one name per class")

    def encode(self, name):
        if name in self.positive_names:
            return 1
        if name in self.negative_names:
            return 0
        raise DataError(f"label {name!r} is not in the label map")


@dataclass
class Dataset:
    """Numeric design matrix with binary labels; arrays are read-only."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: list
    normalizer: list | None = None  # per-column (name, min, max)

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise DataError(
                f"features {self.features.shape} and labels {self.labels.shape} disagree"
            )
        if len(self.feature_names) != self.features.shape[1]:
            raise DataError("feature_names length does not match feature count")
        self.features.flags.writeable = False
        self.labels.flags.writeable = False

    @property
    def n_rows(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def class_counts(self):
        return int(np.sum(self.labels == 0)), int(np.sum(self.labels == 1))


def _parse_float(cell):
    try:
        return float(cell)
    except ValueError:
        return None


def _is_missing(cell):
    value = _parse_float(cell)
    if value is None:
        return cell.strip() == ""
    return not math.isfinite(value)


def load_table(path, delimiter=",", label_column="label"):
    """Parse a single-header delimited file; rejects ragged rows by index."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh, delimiter=delimiter)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            header = [name.strip() for name in header]
            rows = []
            for i, row in enumerate(reader, start=1):
                if not row:
                    continue
                if len(row) != len(header):
                    raise DataError(
                        f"{path}: ragged row at row {i}: has {len(row)} cells, "
                        f"expected {len(header)}"
                    )
                rows.append([cell.strip() for cell in row])
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if label_column not in header:
        raise ConfigError(f"label column {label_column!r} not found in {path}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    return RawTable(header, rows, label_column)


def column_audit(table, zero_fraction_threshold=0.5):
    """(name, reason) for every feature column the cleaning step would drop."""
    if not 0.0 <= zero_fraction_threshold <= 1.0:
        raise ConfigError(
            f"zero_fraction_threshold must be in [0, 1], got {zero_fraction_threshold}"
        )
    dropped = []
    for j, name in enumerate(table.column_names):
        if name == table.label_column:
            continue
        cells = [row[j] for row in table.rows]
        if any(_is_missing(cell) for cell in cells):
            dropped.append((name, REASON_NAN_INF))
            continue
        zeros = sum(1 for cell in cells if _parse_float(cell) == 0.0)
        if zeros / len(cells) > zero_fraction_threshold:
            dropped.append((name, REASON_ZERO_FRACTION))
    return dropped


def clean_columns(table, zero_fraction_threshold=0.5):
    """Drop columns with any NaN/inf cell or a zero fraction above the threshold.

    The label column is never dropped; surviving columns keep their order.
    Idempotent.
    """
    drop = {name for name, _ in column_audit(table, zero_fraction_threshold)}
    keep = [j for j, name in enumerate(table.column_names) if name not in drop]
    names = [table.column_names[j] for j in keep]
    if all(name == table.label_column for name in names):
        raise DataError("cleaning dropped every feature column")
    rows = [[row[j] for j in keep] for row in table.rows]
    return RawTable(names, rows, table.label_column)


def encode_labels(table, label_map):
    """Numeric Dataset from a cleaned table.

    The label column goes through the label map. Feature columns must parse
    as numbers; a column where no cell parses is treated as categorical and
    integer-coded by first appearance, while a mixed column is an error.
    """
    label_idx = table.column_names.index(table.label_column)
    labels = np.array([label_map.encode(row[label_idx]) for row in table.rows])
    feature_names = [n for n in table.column_names if n != table.label_column]
    columns = []
    for j, name in enumerate(table.column_names):
        if j == label_idx:
            continue
        cells = [row[j] for row in table.rows]
        values = [_parse_float(cell) for cell in cells]
        n_numeric = sum(1 for v in values if v is not None)
        if n_numeric == len(cells):
            columns.append(np.array(values, dtype=np.float64))
        elif n_numeric == 0:
            codes = {}
            for cell in cells:
                codes.setdefault(cell, float(len(codes)))
            columns.append(np.array([codes[cell] for cell in cells]))
        else:
            row_idx = next(i for i, v in enumerate(values) if v is None)
            raise DataError(
                f"non-numeric cell in column {name!r} at row {row_idx + 1}: "
                f"{cells[row_idx]!r}"
            )
    features = np.column_stack(columns) if columns else np.empty((table.n_rows, 0))
    return Dataset(features, labels, feature_names)


def minmax_normalize(dataset):
    """Map each column x to (x - min) / (max - min); constant columns become 0.

    The fitted (name, min, max) triples are stored on the result for reuse on
    held-out data.
    """
    if not np.isfinite(dataset.features).all():
        raise NumericError("dataset contains non-finite values; clean it first")
    mins = dataset.features.min(axis=0)
    maxs = dataset.features.max(axis=0)
    normalizer = [
        (name, float(lo), float(hi))
        for name, lo, hi in zip(dataset.feature_names, mins, maxs)
    ]
    return Dataset(
        _scale(dataset.features, mins, maxs),
        dataset.labels,
        dataset.feature_names,
        normalizer,
    )


def apply_normalizer(dataset, normalizer):
    """Normalize held-out data with stored (min, max) pairs; values are not clipped."""
    if len(normalizer) != dataset.n_features:
        raise DataError(
            f"normalizer has {len(normalizer)} columns, dataset has "
            f"{dataset.n_features}"
        )
    mins = np.array([lo for _, lo, _ in normalizer])
    maxs = np.array([hi for _, _, hi in normalizer])
    return Dataset(
        _scale(dataset.features, mins, maxs),
        dataset.labels,
        dataset.feature_names,
        list(normalizer),
    )


def _scale(features, mins, maxs):
    span = maxs - mins
    safe = np.where(span == 0.0, 1.0, span)
    scaled = (features - mins) / safe
    return np.where(span == 0.0, 0.0, scaled)


RESAMPLE_STRATEGIES = ("undersample-majority", "oversample-minority")


def rebalance(dataset, strategy="undersample-majority", seed=0):
    """Equalize class counts; rows are kept verbatim, only multiplicity changes."""
    if strategy not in RESAMPLE_STRATEGIES:
        raise ConfigError(f"unknown resampling strategy {strategy!r}")
    n_neg, n_pos = dataset.class_counts()
    if n_neg == 0 or n_pos == 0:
        raise DataError("rebalance needs both classes present")
    if n_neg == n_pos:
        return dataset
    rng = np.random.default_rng(seed)
    minority = 1 if n_pos < n_neg else 0
    min_idx = np.flatnonzero(dataset.labels == minority)
    maj_idx = np.flatnonzero(dataset.labels == 1 - minority)
    if strategy == "undersample-majority":
        chosen = rng.choice(maj_idx, size=min_idx.size, replace=False)
        keep = np.sort(np.concatenate([min_idx, chosen]))
    else:
        extra = rng.choice(min_idx, size=maj_idx.size - min_idx.size, replace=True)
        keep = np.concatenate([np.arange(dataset.n_rows), extra])
    return Dataset(
        dataset.features[keep],
        dataset.labels[keep],
        dataset.feature_names,
        dataset.normalizer,
    )


def stratified_split(dataset, test_fraction, seed=0):
    """Deterministic per-class split into (train, test) Datasets.

    Each class contributes round(n_c * test_fraction) rows to the test side;
    both sides must keep at least one row of every class.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    test_idx = []
    for cls in (0, 1):
        idx = np.flatnonzero(dataset.labels == cls)
        if idx.size < 2:
            raise DataError(f"class {cls} has {idx.size} rows; need >= 2 to stratify")
        n_test = int(round(idx.size * test_fraction))
        if n_test < 1 or n_test > idx.size - 1:
            raise DataError(
                f"class {cls} with {idx.size} rows cannot be stratified at "
                f"test_fraction={test_fraction}"
            )
        test_idx.append(rng.permutation(idx)[:n_test])
    test_mask = np.zeros(dataset.n_rows, dtype=bool)
    test_mask[np.concatenate(test_idx)] = True

    def take(mask):
        rows = np.flatnonzero(mask)
        return Dataset(
            dataset.features[rows],
            dataset.labels[rows],
            dataset.feature_names,
            dataset.normalizer,
        )

    return take(~test_mask), take(test_mask)


def save_dataset(dataset, path, delimiter=","):
    """Write features plus a trailing 'label' column; floats via repr (round-trip exact)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(list(dataset.feature_names) + ["label"])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(v) for v in row] + [int(label)])


def load_dataset(path, delimiter=","):
    """Read a file written by save_dataset."""
    table = load_table(path, delimiter=delimiter, label_column="label")
    label_idx = table.column_names.index("label")
    try:
        features = np.array(
            [
                [float(cell) for j, cell in enumerate(row) if j != label_idx]
                for row in table.rows
            ]
        )
        labels = np.array([int(float(row[label_idx])) for row in table.rows])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric cell in preprocessed data: {exc}") from exc
    names = [n for n in table.column_names if n != "label"]
    return Dataset(features, labels, names)


def save_normalizer(normalizer, path, delimiter=","):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(["column", "min", "max"])
        for name, lo, hi in normalizer:
            writer.writerow([name, repr(lo), repr(hi)])


def load_normalizer(path, delimiter=","):
    table = load_table(path, delimiter=delimiter, label_column="column")
    return [(row[0], float(row[1]), float(row[2])) for row in table.rows]
