"""Dataset ingestion, client partitioning, normalisation and synthetic data."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .learn import Dataset


@dataclass(frozen=True)
class Table:
    features: np.ndarray
    labels: np.ndarray
    columns: tuple[str, ...]


def load_csv(path, label_column: str) -> Table:
    """Header row required; every cell must parse as a float."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidArgument(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise InvalidArgument(f"{path}: no column named {label_column!r} (have {header})")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InvalidArgument(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise InvalidArgument(f"{path}: non-numeric cell in row {lineno}") from None
    if not rows:
        raise InvalidArgument(f"{path}: no data rows")
    arr = np.asarray(rows)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"{path}: non-finite values")
    k = header.index(label_column)
    feats = [h for i, h in enumerate(header) if i != k]
    return Table(np.delete(arr, k, axis=1), arr[:, k], tuple(feats))


def write_csv(path, X, y, label_column: str = "label"):
    X = np.asarray(X)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{k + 1}" for k in range(X.shape[1])] + [label_column])
        for row, target in zip(X, np.ravel(y)):
            w.writerow([repr(float(v)) for v in row] + [repr(float(target))])


def train_test_split(table: Table, test_fraction: float, seed: int):
    if not 0 <= test_fraction < 1:
        raise InvalidArgument(f"test_fraction must lie in [0, 1), got {test_fraction}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(5,)))
    perm = rng.permutation(table.labels.size)
    n_test = int(round(test_fraction * perm.size))
    test, train = perm[:n_test], perm[n_test:]
    return (table.features[train], table.labels[train]), (table.features[test], table.labels[test])


def split_clients(X, y, N: int):
    """Equal contiguous parts; trailing rows that do not divide evenly are dropped."""
    m = len(y) // N
    if m == 0:
        raise InvalidArgument(f"{len(y)} rows cannot be split across {N} clients")
    extra = len(y) - m * N
    if extra:
        warnings.warn(f"dropping {extra} trailing rows so {N} clients get {m} rows each", stacklevel=2)
    return [(X[j * m : (j + 1) * m], y[j * m : (j + 1) * m]) for j in range(N)]


@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray
    scale: np.ndarray
    record_bound: float

    @classmethod
    def fit(cls, X, record_bound: float = 1.0) -> "Normalizer":
        X = np.asarray(X, dtype=float)
        std = X.std(axis=0)
        std[std == 0] = 1.0
        # standardised rows have norm about sqrt(n); this puts typical rows near half the bound
        return cls(X.mean(axis=0), std * 2.0 * math.sqrt(X.shape[1]) / record_bound, record_bound)

    def __call__(self, X) -> np.ndarray:
        return clip_rows((np.asarray(X, dtype=float) - self.mean) / self.scale, self.record_bound)

    @staticmethod
    def average(norms) -> "Normalizer":
        norms = list(norms)
        return Normalizer(
            np.mean([n.mean for n in norms], axis=0),
            np.mean([n.scale for n in norms], axis=0),
            norms[0].record_bound,
        )


def clip_rows(X, bound: float) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return X * np.minimum(1.0, bound / np.maximum(norms, 1e-300))


def prepare_clients(parts, record_bound: float = 1.0):
    """Normalise each client's features locally. Returns the client datasets
    and a normaliser (client average) for held-out data."""
    norms = [Normalizer.fit(X, record_bound) for X, _ in parts]
    datasets = [Dataset(n(X), y, record_bound) for n, (X, y) in zip(norms, parts)]
    return datasets, Normalizer.average(norms)


def make_separable(n_samples: int, n_features: int, seed: int, margin: float = 0.1):
    """Two classes split by a random hyperplane through the origin, with a gap."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=n_features)
    w /= np.linalg.norm(w)
    X = np.empty((0, n_features))
    while X.shape[0] < n_samples:
        cand = rng.normal(size=(2 * n_samples, n_features))
        cand = cand[np.abs(cand @ w) >= margin]
        X = np.vstack([X, cand])
    X = X[:n_samples]
    return X, (X @ w > 0).astype(float)


def make_linear(n_samples: int, n_features: int, seed: int, noise: float = 0.0, intercept: float = 0.5):
    """``y = X w* + intercept + noise``; returns (X, y, w_with_intercept)."""
    rng = np.random.default_rng(seed)
    w = rng.uniform(-1.0, 1.0, size=n_features)
    X = rng.normal(size=(n_samples, n_features))
    y = X @ w + intercept + noise * rng.normal(size=n_samples)
    return X, y, np.concatenate([[intercept], w])
