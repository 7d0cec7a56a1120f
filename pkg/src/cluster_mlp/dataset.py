"""Dataset loading, cleaning, normalization, splitting, and synthesis.

Cleaning follows photometric-catalog conventions: a sentinel target value
marks unlabeled rows, and per-feature sentinel magnitudes (99 / -99) mark
measurement failures. Sentinel matching is exact equality on the parsed
float; the catalogs encode flags as exact literals.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np


class DataError(Exception):
    """Raised for unreadable, malformed, or emptied-out datasets."""


class RowPolicy(enum.Enum):
    DROP_ROW_IF_ANY_SENTINEL = "drop_row_if_any_sentinel"
    KEEP_ROWS = "keep_rows"


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, d)
    targets: np.ndarray  # (n,)
    feature_names: tuple[str, ...]
    row_ids: tuple[str, ...]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        t = np.asarray(self.targets, dtype=float)
        if f.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        if t.ndim != 1:
            raise DataError("targets must be 1-d")
        n = f.shape[0]
        if t.shape[0] != n or len(self.row_ids) != n:
            raise DataError("row count mismatch between features, targets, row_ids")
        if len(self.feature_names) != f.shape[1]:
            raise DataError("feature_names length does not match feature width")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "targets", t)
        self.features.setflags(write=False)
        self.targets.setflags(write=False)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def take(self, idx: np.ndarray) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            features=self.features[idx].copy(),
            targets=self.targets[idx].copy(),
            feature_names=self.feature_names,
            row_ids=tuple(self.row_ids[i] for i in idx),
            metadata=dict(self.metadata),
        )


@dataclass(frozen=True)
class CleaningPolicy:
    target_missing_sentinel: float = -9.999
    feature_sentinels: frozenset[float] = frozenset({99.0, -99.0})
    row_policy: RowPolicy = RowPolicy.DROP_ROW_IF_ANY_SENTINEL

    def __post_init__(self):
        if self.row_policy is RowPolicy.DROP_ROW_IF_ANY_SENTINEL and not self.feature_sentinels:
            raise ValueError("feature_sentinels must be non-empty for the dropping policy")


@dataclass(frozen=True)
class NormalizationParams:
    center: np.ndarray  # (d,)
    scale: np.ndarray  # (d,), all > 0
    target_center: float
    target_scale: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        s = np.asarray(self.scale, dtype=float)
        if np.any(s <= 0) or self.target_scale <= 0:
            raise ValueError("all scales must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "scale", s)

    @property
    def d(self) -> int:
        return self.center.shape[0]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must be in (0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


class TargetFn(enum.Enum):
    LINEAR_OF_CENTER = "linear_of_center"
    SUM_OF_FEATURES = "sum_of_features"


def load_csv(path, target_column: str, id_column: str | None = None) -> Dataset:
    """Loads a comma-separated file: header row, one named target column,
    optional id column, everything else a feature. Sentinels are kept
    verbatim; cleaning is a separate step."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        if target_column not in header:
            raise DataError(f"{path}: target column {target_column!r} not in header {header}")
        if id_column is not None and id_column not in header:
            raise DataError(f"{path}: id column {id_column!r} not in header")
        t_idx = header.index(target_column)
        id_idx = header.index(id_column) if id_column is not None else None
        feat_idx = [i for i in range(len(header)) if i != t_idx and i != id_idx]
        if not feat_idx:
            raise DataError(f"{path}: no feature columns")

        rows: list[list[float]] = []
        targets: list[float] = []
        row_ids: list[str] = []
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(record)} cells, expected {len(header)}")
            parsed = []
            for i in feat_idx + [t_idx]:
                cell = record[i].strip()
                if cell == "":
                    raise DataError(f"{path}: row {lineno}, column {header[i]!r}: empty cell")
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {lineno}, column {header[i]!r}: cannot parse {cell!r} as a number"
                    ) from None
            rows.append(parsed[:-1])
            targets.append(parsed[-1])
            row_ids.append(record[id_idx].strip() if id_idx is not None else str(len(row_ids)))
        if not rows:
            raise DataError(f"{path}: no data rows")

    return Dataset(
        features=np.array(rows, dtype=float),
        targets=np.array(targets, dtype=float),
        feature_names=tuple(header[i] for i in feat_idx),
        row_ids=tuple(row_ids),
    )


def filter_labeled(ds: Dataset, policy: CleaningPolicy) -> Dataset:
    """Keeps only rows whose target differs from the missing-target sentinel."""
    keep = np.flatnonzero(ds.targets != policy.target_missing_sentinel)
    if keep.size == 0:
        raise DataError("no labeled rows after filtering the target sentinel")
    return ds.take(keep)


def clean_sentinels(ds: Dataset, policy: CleaningPolicy) -> Dataset:
    """Drops rows containing any feature sentinel (or returns ds unchanged
    under the keep-rows policy)."""
    if policy.row_policy is RowPolicy.KEEP_ROWS:
        return ds
    bad = np.zeros(ds.n, dtype=bool)
    for s in policy.feature_sentinels:
        bad |= np.any(ds.features == s, axis=1)
    keep = np.flatnonzero(~bad)
    if keep.size == 0:
        raise DataError("no rows left after dropping feature sentinels")
    return ds.take(keep)


def holdout_split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded uniform shuffle, then cut at floor(train_fraction * n)."""
    if ds.n < 2:
        raise DataError("holdout split needs at least 2 rows")
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(ds.n)
    cut = int(np.floor(spec.train_fraction * ds.n))
    cut = max(1, min(cut, ds.n - 1))
    return ds.take(perm[:cut]), ds.take(perm[cut:])


def fit_normalization(train: Dataset) -> NormalizationParams:
    """Per-column mean / population std; zero-variance columns get scale 1."""
    center = train.features.mean(axis=0)
    scale = train.features.std(axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    t_scale = float(train.targets.std())
    if t_scale == 0.0:
        t_scale = 1.0
    return NormalizationParams(
        center=center,
        scale=scale,
        target_center=float(train.targets.mean()),
        target_scale=t_scale,
    )


def apply_normalization(ds: Dataset, p: NormalizationParams) -> Dataset:
    """z-scores features and target with the given parameters."""
    if ds.d != p.d:
        raise DataError(f"dimension mismatch: dataset d={ds.d}, params d={p.d}")
    return Dataset(
        features=(ds.features - p.center) / p.scale,
        targets=(ds.targets - p.target_center) / p.target_scale,
        feature_names=ds.feature_names,
        row_ids=ds.row_ids,
        metadata=dict(ds.metadata),
    )


def invert_normalization(ds: Dataset, p: NormalizationParams) -> Dataset:
    if ds.d != p.d:
        raise DataError(f"dimension mismatch: dataset d={ds.d}, params d={p.d}")
    return Dataset(
        features=ds.features * p.scale + p.center,
        targets=ds.targets * p.target_scale + p.target_center,
        feature_names=ds.feature_names,
        row_ids=ds.row_ids,
        metadata=dict(ds.metadata),
    )


def _place_centers(k: int, d: int, separation: float, rng: np.random.Generator) -> np.ndarray:
    # Shuffled grid: each column assigns the k centers distinct jittered
    # levels spaced 1.5*separation apart. Any two centers then differ by at
    # least 1.25*separation in every column, and every column keeps enough
    # spread that z-scoring cannot blow up the within-cluster noise.
    levels = 1.5 * separation * np.arange(k, dtype=float)
    centers = np.empty((k, d))
    for j in range(d):
        jitter = rng.uniform(0.0, 0.25 * separation, size=k)
        centers[:, j] = rng.permutation(levels) + jitter
    return centers


def synth_blobs(
    k: int,
    per_cluster: int,
    d: int,
    separation: float,
    noise_std: float,
    target_fn: TargetFn = TargetFn.LINEAR_OF_CENTER,
    seed: int = 0,
) -> Dataset:
    """Seeded Gaussian blobs with mutually separated centers; the generating
    k, labels, and centers are recorded in the metadata for oracle tests."""
    if k < 1 or per_cluster < 1 or d < 1:
        raise ValueError("k, per_cluster, d must be positive")
    if separation <= 0 or noise_std <= 0:
        raise ValueError("separation and noise_std must be positive")
    rng = np.random.default_rng(seed)
    centers = _place_centers(k, d, separation, rng)
    labels = np.repeat(np.arange(k), per_cluster)
    features = centers[labels] + rng.normal(0.0, noise_std, size=(k * per_cluster, d))

    if target_fn is TargetFn.LINEAR_OF_CENTER:
        w = rng.normal(0.0, 1.0, size=d)
        targets = centers[labels] @ w / max(separation, 1.0)
    elif target_fn is TargetFn.SUM_OF_FEATURES:
        targets = features.sum(axis=1)
    else:
        raise ValueError(f"unknown target_fn: {target_fn}")

    return Dataset(
        features=features,
        targets=targets,
        feature_names=tuple(f"f{i}" for i in range(d)),
        row_ids=tuple(str(i) for i in range(k * per_cluster)),
        metadata={
            "true_k": k,
            "true_labels": labels.tolist(),
            "true_centers": centers.tolist(),
            "seed": seed,
        },
    )


def write_csv(ds: Dataset, path, target_column: str = "target", id_column: str | None = None) -> None:
    """Writes a dataset back out in the ingestion schema (17 significant
    digits, so a round-trip through load_csv is lossless)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(ds.feature_names) + [target_column]
        if id_column is not None:
            header = [id_column] + header
        writer.writerow(header)
        for i in range(ds.n):
            row = [f"{v:.17g}" for v in ds.features[i]] + [f"{ds.targets[i]:.17g}"]
            if id_column is not None:
                row = [ds.row_ids[i]] + row
            writer.writerow(row)
