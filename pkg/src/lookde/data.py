"""Dataset ingestion, z-score normalization and reproducible splitting."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial.distance import cdist


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Row-major real matrix with column labels.

    ``values`` is stored read-only; build a new Dataset to change it.
    """

    values: np.ndarray
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2:
            raise DataError(f"expected a 2-D matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("dataset contains non-finite values")
        names = tuple(self.feature_names) or tuple(f"x{k}" for k in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise DataError(f"{len(names)} feature names for {values.shape[1]} columns")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_dims(self) -> int:
        return self.values.shape[1]

    @property
    def has_duplicates(self) -> bool:
        """True if any row is repeated exactly."""
        if self.n_rows < 2:
            return False
        return np.unique(self.values, axis=0).shape[0] < self.n_rows

    def with_values(self, values: np.ndarray) -> "Dataset":
        return Dataset(values, self.feature_names)


@dataclass(frozen=True)
class NormStats:
    means: np.ndarray
    std_devs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", _frozen(np.atleast_1d(self.means)))
        object.__setattr__(self, "std_devs", _frozen(np.atleast_1d(self.std_devs)))
        if self.means.shape != self.std_devs.shape:
            raise DataError("means and std_devs differ in length")
        if np.any(self.std_devs <= 0):
            raise DataError("standard deviations must be positive")

    @classmethod
    def identity(cls, d: int) -> "NormStats":
        return cls(np.zeros(d), np.ones(d))

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "std_devs": self.std_devs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(np.asarray(d["means"], float), np.asarray(d["std_devs"], float))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError("train_fraction must lie in (0, 1)")
        if self.seed < 0:
            raise DataError("seed must be non-negative")


def _parse_float(text):
    try:
        v = float(text)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def load_csv(
    path: str | os.PathLike,
    has_header: bool | None = None,
    drop_columns: Sequence[str | int] = (),
) -> Dataset:
    """Read a comma-separated numeric table.

    Parameters
    ----------
    path : path-like
        UTF-8 CSV file.
    has_header : bool, optional
        Whether the first line holds column names. ``None`` detects it: the
        first line is a header when any of its fields is not a number.
    drop_columns : sequence of str or int
        Columns removed before parsing (names need a header; ints are
        0-based positions). Use this for timestamp or index columns.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(lineno, r) for lineno, r in enumerate(csv.reader(fh), start=1) if r]
    if not rows:
        raise DataError(f"{path}: file is empty")

    first = rows[0][1]
    if has_header is None:
        has_header = any(_parse_float(c) is None for c in first)
    names = [c.strip() for c in first] if has_header else [f"x{k}" for k in range(len(first))]
    body = rows[1:] if has_header else rows
    width = len(first)

    drop = set()
    for c in drop_columns:
        if isinstance(c, int) or (isinstance(c, str) and c.isdigit() and c not in names):
            drop.add(int(c))
        elif c in names:
            drop.add(names.index(c))
        else:
            raise DataError(f"cannot drop unknown column {c!r}")
    keep = [k for k in range(width) if k not in drop]
    if not keep:
        raise DataError("all columns dropped")

    values = np.empty((len(body), len(keep)))
    for r, (lineno, row) in enumerate(body):
        if len(row) != width:
            raise DataError(
                f"ragged row at line {lineno}: expected {width} fields, got {len(row)}"
            )
        for c, k in enumerate(keep):
            v = _parse_float(row[k])
            if v is None:
                raise DataError(
                    f"non-numeric value {row[k]!r} at row {lineno}, column {k + 1}"
                )
            values[r, c] = v
    if values.shape[0] == 0:
        raise DataError(f"{path}: no data rows")
    return Dataset(values, tuple(names[k] for k in keep))


def save_csv(path: str | os.PathLike, values: np.ndarray, feature_names: Sequence[str]):
    values = np.asarray(values, float).reshape(-1, len(feature_names))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(feature_names)
        for row in values:
            w.writerow([repr(float(v)) for v in row])


def zscore_fit(data: Dataset) -> NormStats:
    """Per-column mean and sample standard deviation (divisor N - 1)."""
    if data.n_rows < 2:
        raise DataError("need at least two rows to estimate a standard deviation")
    means = data.values.mean(axis=0)
    stds = data.values.std(axis=0, ddof=1)
    for name, s, m in zip(data.feature_names, stds, means):
        if not s > 1e-12 * max(1.0, abs(m)):
            raise DataError(f"zero variance feature {name!r}")
    return NormStats(means, stds)


def _check_dims(data: Dataset, stats: NormStats):
    if data.n_dims != stats.means.shape[0]:
        raise DataError(
            f"dimension mismatch: data has {data.n_dims} columns, stats have {stats.means.shape[0]}"
        )


def zscore_apply(data: Dataset, stats: NormStats) -> Dataset:
    _check_dims(data, stats)
    return data.with_values((data.values - stats.means) / stats.std_devs)


def zscore_invert(data: Dataset, stats: NormStats) -> Dataset:
    _check_dims(data, stats)
    return data.with_values(data.values * stats.std_devs + stats.means)


def train_test_split(data: Dataset, split: SplitSpec) -> tuple[Dataset, Dataset]:
    """Random partition with ``floor(train_fraction * N)`` training rows."""
    n = data.n_rows
    n_train = math.floor(split.train_fraction * n)
    if n < 2 or n_train < 1 or n - n_train < 1:
        raise DataError(f"degenerate split: {n} rows at fraction {split.train_fraction}")
    perm = np.random.default_rng(split.seed).permutation(n)
    return data.with_values(data.values[perm[:n_train]]), data.with_values(data.values[perm[n_train:]])


class MinDistance(NamedTuple):
    distance: float
    has_repeats: bool


def min_pairwise_distance(data: Dataset | np.ndarray, block: int = 1024) -> MinDistance:
    """Smallest Euclidean distance over all unordered pairs of rows.

    Scans row blocks against the remaining rows, so memory stays at
    ``block x N`` distances.
    """
    x = data.values if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, float))
    n = x.shape[0]
    if n < 2:
        raise DataError("need at least two points")
    best = np.inf
    for start in range(0, n - 1, block):
        stop = min(start + block, n)
        d = cdist(x[start:stop], x[start:], "euclidean")
        # keep only pairs (i, j) with j > i
        mask = np.tri(stop - start, n - start, k=0, dtype=bool)
        d[mask] = np.inf
        best = min(best, float(d.min()))
    return MinDistance(best, best == 0.0)
