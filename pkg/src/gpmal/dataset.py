"""Tabular classification datasets: CSV loading, [0,1] scaling, stratified folds."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np


class DataError(Exception):
    """An input file could not be parsed into a valid dataset."""


@dataclass(frozen=True)
class Dataset:
    """An n x m feature matrix with class labels.

    Labels are opaque strings, carried for evaluation only; nothing in the
    fitness path ever sees them.  ``scaled`` records whether every feature
    column has been min-max mapped to [0, 1].
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str] = field(default_factory=list)
    scaled: bool = False

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {feats.shape}")
        n, m = feats.shape
        if n < 2 or m < 1:
            raise ValueError(f"need at least 2 instances and 1 feature, got {n}x{m}")
        if not np.isfinite(feats).all():
            raise ValueError("features contain non-finite values")
        labels = np.asarray(self.labels)
        if labels.shape != (n,):
            raise ValueError(f"labels must have {n} entries, got {labels.shape}")
        names = list(self.feature_names) or [f"f{i}" for i in range(m)]
        if len(names) != m:
            raise ValueError(f"expected {m} feature names, got {len(names)}")
        if self.scaled and (feats.min() < 0.0 or feats.max() > 1.0):
            raise ValueError("scaled dataset has values outside [0, 1]")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_instances(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(np.unique(self.labels))


@dataclass(frozen=True)
class FoldAssignment:
    """Maps each instance to a fold id in [0, n_folds)."""

    fold_of_instance: np.ndarray
    n_folds: int

    def __post_init__(self):
        folds = np.asarray(self.fold_of_instance, dtype=np.int64)
        if folds.min() < 0 or folds.max() >= self.n_folds:
            raise ValueError("fold ids out of range")
        if len(np.unique(folds)) != self.n_folds:
            raise ValueError("every fold must be non-empty")
        object.__setattr__(self, "fold_of_instance", folds)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of_instance == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of_instance != fold)


def load_csv(path, label_column, has_header: bool = True) -> Dataset:
    """Read a comma-separated file into an (unscaled) Dataset.

    ``label_column`` is a column name (requires a header) or a 0-based
    index.  Every non-label cell must parse as a finite real; failures
    are reported with their file line and column.  Row order is kept.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    rows = [r for r in rows if r]  # drop blank lines
    if not rows:
        raise DataError(f"{path}: file is empty")

    header = None
    if has_header:
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: no data rows after header")

    width = len(rows[0])
    if isinstance(label_column, int):
        label_idx = label_column
        if not 0 <= label_idx < width:
            raise DataError(f"{path}: label column index {label_idx} out of range "
                            f"for {width} columns")
    else:
        if header is None:
            raise DataError(f"{path}: label column by name ({label_column!r}) "
                            "requires a header row")
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise DataError(f"{path}: label column {label_column!r} not in header "
                            f"{header}") from None

    if header is not None:
        feature_names = [h for i, h in enumerate(header) if i != label_idx]
    else:
        feature_names = [f"f{i}" for i in range(width - 1)]

    def col_name(j: int) -> str:
        return header[j] if header is not None else f"column {j}"

    features = np.empty((len(rows), width - 1), dtype=np.float64)
    labels = []
    for r, row in enumerate(rows):
        line_no = r + (2 if has_header else 1)
        if len(row) != width:
            raise DataError(f"{path}: line {line_no} has {len(row)} cells, "
                            f"expected {width}")
        k = 0
        for j, cell in enumerate(row):
            if j == label_idx:
                labels.append(cell.strip())
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: line {line_no}, {col_name(j)}: "
                                f"cannot parse {cell.strip()!r} as a number") from None
            if not np.isfinite(v):
                raise DataError(f"{path}: line {line_no}, {col_name(j)}: "
                                f"non-finite value {cell.strip()!r}")
            features[r, k] = v
            k += 1

    try:
        return Dataset(features, np.asarray(labels, dtype=object),
                       feature_names, scaled=False)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def scale_min_max(d: Dataset) -> Dataset:
    """Map each feature column to [0, 1] via (v - min) / (max - min).

    Constant columns map to 0.0 everywhere rather than being dropped, so
    feature indices stay stable.  Idempotent on already-scaled data.
    """
    feats = d.features
    lo = feats.min(axis=0)
    hi = feats.max(axis=0)
    span = hi - lo
    constant = span == 0.0
    safe_span = np.where(constant, 1.0, span)
    scaled = (feats - lo) / safe_span
    scaled[:, constant] = 0.0
    return replace(d, features=scaled, scaled=True)


def stratified_folds(d: Dataset, k_folds: int, seed: int) -> FoldAssignment:
    """Class-stratified fold assignment, deterministic for a given seed.

    Per-class counts across folds differ by at most one; a round-robin
    pointer carried across classes keeps overall fold sizes within one
    of each other as well.
    """
    n = d.n_instances
    if k_folds < 2 or k_folds > n:
        raise ValueError(f"k_folds must be in [2, {n}], got {k_folds}")
    rng = np.random.default_rng(seed)
    fold = np.empty(n, dtype=np.int64)
    pointer = 0
    for cls in np.unique(d.labels):
        idx = np.flatnonzero(d.labels == cls)
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            fold[i] = (pointer + j) % k_folds
        pointer = (pointer + len(idx)) % k_folds
    return FoldAssignment(fold, k_folds)
