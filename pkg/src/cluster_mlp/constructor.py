"""End-to-end construction: cluster the training split, size the hidden
layer from the cluster count, train with L-BFGS, and evaluate.

Also provides the ad-hoc baseline (a sweep over hidden widths) and the
kmin stability study for X-means.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import clustering, metrics, mlp
from .clustering import (
    Algorithm,
    ClusteringResult,
    DbscanConfig,
    MeanShiftConfig,
    XMeansConfig,
    cluster_count,
)
from .dataset import (
    CleaningPolicy,
    Dataset,
    SplitSpec,
    apply_normalization,
    clean_sentinels,
    filter_labeled,
    fit_normalization,
    holdout_split,
)
from .metrics import MetricBlock
from .mlp import NetworkSpec, TrainConfig


class PipelineError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"pipeline stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    algorithm: Algorithm = Algorithm.XMEANS
    xmeans: XMeansConfig | None = field(default_factory=XMeansConfig)
    dbscan: DbscanConfig | None = None
    meanshift: MeanShiftConfig | None = None
    split: SplitSpec = field(default_factory=SplitSpec)
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    cleaning: CleaningPolicy = field(default_factory=CleaningPolicy)
    validation_fraction: float = 0.2
    validation_seed: int = 1

    def __post_init__(self):
        present = {
            Algorithm.XMEANS: self.xmeans,
            Algorithm.DBSCAN: self.dbscan,
            Algorithm.MEANSHIFT: self.meanshift,
        }
        if present.get(self.algorithm) is None:
            raise ValueError(f"missing config for algorithm {self.algorithm.value}")
        others = [a for a, c in present.items() if a is not self.algorithm and c is not None]
        if others:
            raise ValueError(f"extra algorithm configs present: {[a.value for a in others]}")


@dataclass(frozen=True)
class PipelineReport:
    k: int
    spec: NetworkSpec
    clustering_seconds: float
    training_seconds: float
    metrics_train: MetricBlock
    metrics_test: MetricBlock
    metrics_validation: MetricBlock | None
    train_rows: int
    test_rows: int

    def __post_init__(self):
        if self.spec.hidden_width != self.k:
            raise ValueError("hidden width must equal the cluster count")


@dataclass(frozen=True)
class SweepEntry:
    hidden_width: int
    rms_test: float
    correlation: float
    training_seconds: float


@dataclass(frozen=True)
class SweepReport:
    entries: tuple[SweepEntry, ...]
    best_hidden_width: int


@dataclass(frozen=True)
class StabilityRow:
    kmin: int
    k: int
    clustering_seconds: float
    training_seconds: float


def _run_clustering(features: np.ndarray, cfg: PipelineConfig) -> ClusteringResult:
    if cfg.algorithm is Algorithm.XMEANS:
        return clustering.xmeans(features, cfg.xmeans)
    if cfg.algorithm is Algorithm.DBSCAN:
        return clustering.dbscan(features, cfg.dbscan)
    if cfg.algorithm is Algorithm.MEANSHIFT:
        return clustering.meanshift(features, cfg.meanshift)
    raise ValueError(f"unsupported pipeline algorithm: {cfg.algorithm}")


def construct_architecture(
    train: Dataset, cfg: PipelineConfig
) -> tuple[NetworkSpec, ClusteringResult]:
    """Clusters the (normalized) training features only; the hidden width is
    the resulting cluster count. Targets never enter the clustering input."""
    result = _run_clustering(train.features, cfg)
    k = cluster_count(result)
    return NetworkSpec(input_width=train.d, hidden_width=k), result


def run_pipeline(ds: Dataset, cfg: PipelineConfig) -> PipelineReport:
    """Full method on a raw dataset: clean, split, normalize (fit on train
    only), cluster to pick the architecture, train, evaluate."""
    report, _ = run_pipeline_with_model(ds, cfg)
    return report


def run_pipeline_with_model(
    ds: Dataset, cfg: PipelineConfig
) -> tuple[PipelineReport, mlp.MlpModel]:
    """run_pipeline, also returning the trained model for serialization."""
    try:
        cleaned = filter_labeled(ds, cfg.cleaning)
        cleaned = clean_sentinels(cleaned, cfg.cleaning)
    except Exception as e:
        raise PipelineError("cleaning", e) from e

    try:
        train_raw, test_raw = holdout_split(cleaned, cfg.split)
    except Exception as e:
        raise PipelineError("split", e) from e

    norm = fit_normalization(train_raw)
    train_norm = apply_normalization(train_raw, norm)

    try:
        spec, cluster_result = construct_architecture(train_norm, cfg)
    except Exception as e:
        raise PipelineError("clustering", e) from e

    try:
        model, train_report = mlp.train(spec, train_raw, cfg.train_cfg, norm=norm)
    except Exception as e:
        raise PipelineError("training", e) from e

    # reported-only validation cut carved from the training portion
    val_block: MetricBlock | None = None
    if train_raw.n >= 5 and 0.0 < cfg.validation_fraction < 1.0:
        fit_part, val_part = holdout_split(
            train_raw,
            SplitSpec(train_fraction=1.0 - cfg.validation_fraction, seed=cfg.validation_seed),
        )
        val_block = metrics.metric_block(mlp.predict(model, val_part), val_part.targets)

    report = PipelineReport(
        k=spec.hidden_width,
        spec=spec,
        clustering_seconds=cluster_result.elapsed_seconds,
        training_seconds=train_report.elapsed_seconds,
        metrics_train=metrics.metric_block(mlp.predict(model, train_raw), train_raw.targets),
        metrics_test=metrics.metric_block(mlp.predict(model, test_raw), test_raw.targets),
        metrics_validation=val_block,
        train_rows=train_raw.n,
        test_rows=test_raw.n,
    )
    return report, model


def sweep_hidden(
    ds: Dataset,
    widths: list[int],
    split: SplitSpec,
    train_cfg: TrainConfig,
    cleaning: CleaningPolicy | None = None,
) -> SweepReport:
    """Ad-hoc baseline: one model per hidden width on a shared split; the
    best width minimizes test RMS (ties go to the smaller network)."""
    if not widths:
        raise ValueError("widths must be non-empty")
    cleaned = ds
    if cleaning is not None:
        cleaned = clean_sentinels(filter_labeled(ds, cleaning), cleaning)
    train_raw, test_raw = holdout_split(cleaned, split)
    norm = fit_normalization(train_raw)

    entries = []
    for w in sorted(widths):
        spec = NetworkSpec(input_width=cleaned.d, hidden_width=w)
        model, report = mlp.train(spec, train_raw, train_cfg, norm=norm)
        pred = mlp.predict(model, test_raw)
        entries.append(
            SweepEntry(
                hidden_width=w,
                rms_test=metrics.rms(pred, test_raw.targets),
                correlation=metrics.correlation(pred, test_raw.targets),
                training_seconds=report.elapsed_seconds,
            )
        )
    best = min(entries, key=lambda e: (e.rms_test, e.hidden_width))
    return SweepReport(entries=tuple(entries), best_hidden_width=best.hidden_width)


def kmin_stability(ds: Dataset, kmins: list[int], cfg: PipelineConfig) -> list[StabilityRow]:
    """One full pipeline run per kmin over a shared split and seed."""
    if cfg.algorithm is not Algorithm.XMEANS:
        raise ValueError("kmin stability requires the X-means algorithm")
    if not kmins:
        raise ValueError("kmins must be non-empty")
    rows = []
    for kmin in kmins:
        xcfg = XMeansConfig(
            kmin=kmin,
            kmax=max(kmin, cfg.xmeans.kmax),
            max_split_rounds=cfg.xmeans.max_split_rounds,
            kmeans_max_iter=cfg.xmeans.kmeans_max_iter,
            kmeans_tol=cfg.xmeans.kmeans_tol,
            seed=cfg.xmeans.seed,
        )
        run_cfg = PipelineConfig(
            algorithm=Algorithm.XMEANS,
            xmeans=xcfg,
            dbscan=None,
            meanshift=None,
            split=cfg.split,
            train_cfg=cfg.train_cfg,
            cleaning=cfg.cleaning,
            validation_fraction=cfg.validation_fraction,
            validation_seed=cfg.validation_seed,
        )
        report = run_pipeline(ds, run_cfg)
        rows.append(
            StabilityRow(
                kmin=kmin,
                k=report.k,
                clustering_seconds=report.clustering_seconds,
                training_seconds=report.training_seconds,
            )
        )
    return rows
