"""Dataset container, CSV ingestion, splitting, and shared preprocessing."""

from __future__ import annotations

import csv
import json
import math
import sys
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._seeding import rng_for


class Task(Enum):
    REGRESSION = "regression"
    BINARY_CLASSIFICATION = "classification"


class DataError(ValueError):
    """Ingestion or validation failure."""


def emit_diagnostic(record: dict) -> None:
    """Write a structured warning record as one JSON line on stderr."""
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")


@dataclass(frozen=True)
class Dataset:
    """Dense numeric feature matrix with a response vector.

    Immutable after construction; the backing arrays are copies with the
    writeable flag cleared, so instances are safe to share across threads.
    """

    features: np.ndarray
    response: np.ndarray
    task: Task
    feature_names: list[str]

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, copy=True)
        y = np.array(self.response, dtype=np.float64, copy=True)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError("features must be an n x p matrix with n >= 1, p >= 1")
        if y.shape != (X.shape[0],):
            raise DataError(
                f"response length {y.shape} does not match n={X.shape[0]}"
            )
        if not np.isfinite(X).all():
            raise DataError("features contain NaN or infinite entries")
        if not np.isfinite(y).all():
            raise DataError("response contains NaN or infinite entries")
        if self.task is Task.BINARY_CLASSIFICATION:
            if not np.isin(y, (0.0, 1.0)).all():
                raise DataError("classification responses must be coded 0/1")
        names = list(self.feature_names)
        if len(names) != X.shape[1]:
            raise DataError(
                f"feature_names has {len(names)} entries for p={X.shape[1]}"
            )
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def take_rows(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.features[idx], self.response[idx], self.task, self.feature_names)

    def with_response(self, y: np.ndarray, task: Task) -> "Dataset":
        return Dataset(self.features, y, task, self.feature_names)


@dataclass(frozen=True)
class SplitPair:
    train: Dataset
    test: Dataset
    seed: int
    train_fraction: float


def load_csv(path, target_column: str, task: Task) -> Dataset:
    """Parse a headered CSV into a Dataset, pulling out the target column.

    Every non-target cell must parse as a finite float; the first offending
    cell is reported by data row (1-based, header excluded) and column name.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if target_column not in header:
            raise DataError(f"{path}: target column {target_column!r} not found")
        t_idx = header.index(target_column)
        rows = []
        for r, rec in enumerate(reader, start=1):
            if len(rec) != len(header):
                raise DataError(f"{path}: row {r} has {len(rec)} cells, expected {len(header)}")
            vals = []
            for c, cell in enumerate(rec):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {r}, column {header[c]!r}: cannot parse {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(
                        f"{path}: row {r}, column {header[c]!r}: non-finite value {cell!r}"
                    )
                vals.append(v)
            rows.append(vals)
    if len(rows) < 2:
        raise DataError(f"{path}: fewer than 2 data rows")
    mat = np.asarray(rows, dtype=np.float64)
    y = mat[:, t_idx]
    X = np.delete(mat, t_idx, axis=1)
    names = [h for i, h in enumerate(header) if i != t_idx]
    return Dataset(X, y, task, names)


def save_csv(ds: Dataset, path, target_column: str = "y") -> None:
    """Write a Dataset in the same schema load_csv reads, at full precision."""
    if target_column in ds.feature_names:
        raise DataError(f"target column name {target_column!r} collides with a feature")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + [target_column])
        for i in range(ds.n):
            writer.writerow([repr(v) for v in ds.features[i]] + [repr(float(ds.response[i]))])


def train_test_split(ds: Dataset, train_fraction: float, seed: int) -> SplitPair:
    """Seeded shuffle-and-cut split; train gets floor(n * train_fraction) rows."""
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must be in (0, 1)")
    perm = rng_for(seed).permutation(ds.n)
    n_train = int(math.floor(ds.n * train_fraction))
    if n_train < 1 or n_train >= ds.n:
        raise DataError(
            f"fraction {train_fraction} leaves an empty side for n={ds.n}"
        )
    return SplitPair(
        train=ds.take_rows(perm[:n_train]),
        test=ds.take_rows(perm[n_train:]),
        seed=seed,
        train_fraction=train_fraction,
    )


def _pairwise_abs_corr(a: np.ndarray, b: np.ndarray) -> float:
    # zero-variance columns are treated as uncorrelated with everything
    da = a - a.mean()
    db = b - b.mean()
    na = math.sqrt(float(da @ da))
    nb = math.sqrt(float(db @ db))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return abs(float(da @ db) / (na * nb))


def drop_correlated(ds: Dataset, threshold: float) -> Dataset:
    """Greedy left-to-right filter dropping columns that exceed the
    absolute-correlation threshold against any already-retained column.
    """
    if not 0.0 < threshold <= 1.0:
        raise DataError("threshold must be in (0, 1]")
    if ds.p < 2:
        raise DataError("need at least 2 columns")
    X = ds.features
    stds = X.std(axis=0)
    for j in np.flatnonzero(stds == 0.0):
        emit_diagnostic(
            {
                "warning": "zero-variance-column",
                "column": ds.feature_names[j],
                "detail": "correlation undefined; treated as 0 and retained",
            }
        )
    kept: list[int] = [0]
    for j in range(1, ds.p):
        if all(_pairwise_abs_corr(X[:, j], X[:, k]) <= threshold for k in kept):
            kept.append(j)
    names = [ds.feature_names[j] for j in kept]
    return Dataset(X[:, kept], ds.response, ds.task, names)


def column_means(ds: Dataset) -> np.ndarray:
    return ds.features.mean(axis=0)
