import numpy as np
import pytest

from cluster_mlp.clustering import Algorithm, DbscanConfig, MeanShiftConfig, XMeansConfig
from cluster_mlp.constructor import (
    PipelineConfig,
    PipelineError,
    construct_architecture,
    kmin_stability,
    run_pipeline,
    sweep_hidden,
)
from cluster_mlp.dataset import (
    Dataset,
    SplitSpec,
    TargetFn,
    apply_normalization,
    fit_normalization,
    synth_blobs,
)
from cluster_mlp.mlp import TrainConfig

FAST_TRAIN = TrainConfig(max_iter=60)


def xmeans_cfg(kmin=2, kmax=20, seed=0, **kw):
    return PipelineConfig(
        algorithm=Algorithm.XMEANS,
        xmeans=XMeansConfig(kmin=kmin, kmax=kmax, seed=seed),
        train_cfg=FAST_TRAIN,
        **kw,
    )


class TestPipelineConfig:
    def test_requires_matching_algorithm_config(self):
        with pytest.raises(ValueError, match="missing config"):
            PipelineConfig(algorithm=Algorithm.DBSCAN, xmeans=None)

    def test_rejects_extra_algorithm_configs(self):
        with pytest.raises(ValueError, match="extra"):
            PipelineConfig(
                algorithm=Algorithm.XMEANS,
                xmeans=XMeansConfig(),
                dbscan=DbscanConfig(eps=1.0, min_pts=2),
            )


class TestConstructArchitecture:
    def test_blob_count_sets_width(self):
        ds = synth_blobs(4, 30, 3, 30.0, 1.0, seed=0)
        norm = apply_normalization(ds, fit_normalization(ds))
        spec, result = construct_architecture(norm, xmeans_cfg())
        assert spec.hidden_width == result.k == 4
        assert spec.input_width == 3

    def test_single_cluster_gives_minimal_architecture(self):
        ds = synth_blobs(1, 40, 2, 5.0, 1.0, seed=0)
        norm = apply_normalization(ds, fit_normalization(ds))
        spec, _ = construct_architecture(norm, xmeans_cfg(kmin=1, kmax=1))
        assert spec.hidden_width == 1

    def test_targets_do_not_affect_clustering(self):
        ds = synth_blobs(3, 30, 2, 30.0, 1.0, seed=2)
        norm = apply_normalization(ds, fit_normalization(ds))
        shuffled_targets = Dataset(
            features=norm.features.copy(),
            targets=norm.targets[::-1].copy(),
            feature_names=norm.feature_names,
            row_ids=norm.row_ids,
        )
        spec_a, ra = construct_architecture(norm, xmeans_cfg())
        spec_b, rb = construct_architecture(shuffled_targets, xmeans_cfg())
        assert spec_a == spec_b
        assert np.array_equal(ra.labels, rb.labels)

    def test_all_noise_dbscan_propagates(self):
        ds = synth_blobs(2, 3, 2, 50.0, 0.01, seed=0)
        norm = apply_normalization(ds, fit_normalization(ds))
        cfg = PipelineConfig(
            algorithm=Algorithm.DBSCAN,
            xmeans=None,
            dbscan=DbscanConfig(eps=1e-9, min_pts=3),
            train_cfg=FAST_TRAIN,
        )
        from cluster_mlp.clustering import ClusteringError

        with pytest.raises(ClusteringError):
            construct_architecture(norm, cfg)


class TestRunPipeline:
    def test_blob_recovery_report(self):
        ds = synth_blobs(5, 40, 3, 30.0, 1.0, seed=7)
        report = run_pipeline(ds, xmeans_cfg())
        assert abs(report.k - 5) <= 1
        assert report.spec.hidden_width == report.k
        assert report.metrics_test.n == report.test_rows
        assert report.clustering_seconds >= 0
        assert report.training_seconds >= 0
        assert report.metrics_validation is not None

    def test_deterministic(self):
        ds = synth_blobs(3, 30, 2, 30.0, 1.0, seed=3)
        a = run_pipeline(ds, xmeans_cfg())
        b = run_pipeline(ds, xmeans_cfg())
        assert a.k == b.k
        assert a.metrics_test == b.metrics_test
        assert a.metrics_train == b.metrics_train

    def test_test_rows_never_influence_architecture(self):
        ds = synth_blobs(3, 40, 2, 30.0, 1.0, seed=4)
        cfg = xmeans_cfg()
        base = run_pipeline(ds, cfg)

        # perturb only rows that land in the test split
        _, test = __import__("cluster_mlp.dataset", fromlist=["holdout_split"]).holdout_split(
            ds, cfg.split
        )
        test_ids = set(test.row_ids)
        feats = ds.features.copy()
        for i, rid in enumerate(ds.row_ids):
            if rid in test_ids:
                feats[i] += 0.01
        perturbed = Dataset(
            features=feats,
            targets=ds.targets.copy(),
            feature_names=ds.feature_names,
            row_ids=ds.row_ids,
        )
        assert run_pipeline(perturbed, cfg).k == base.k

    def test_stage_annotation_on_error(self):
        ds = synth_blobs(2, 2, 2, 10.0, 0.5, seed=0)
        bad = Dataset(
            features=ds.features.copy(),
            targets=np.full(4, -9.999),
            feature_names=ds.feature_names,
            row_ids=ds.row_ids,
        )
        with pytest.raises(PipelineError, match="cleaning"):
            run_pipeline(bad, xmeans_cfg())

    def test_meanshift_pipeline(self):
        ds = synth_blobs(2, 40, 2, 30.0, 1.0, seed=5)
        cfg = PipelineConfig(
            algorithm=Algorithm.MEANSHIFT,
            xmeans=None,
            meanshift=MeanShiftConfig(bandwidth=1.0),
            train_cfg=FAST_TRAIN,
        )
        report = run_pipeline(ds, cfg)
        assert report.k == 2


class TestSweep:
    def test_singleton(self):
        ds = synth_blobs(2, 30, 2, 20.0, 1.0, seed=0)
        rep = sweep_hidden(ds, [4], SplitSpec(0.7, 0), FAST_TRAIN)
        assert rep.best_hidden_width == 4
        assert len(rep.entries) == 1

    def test_best_minimizes_test_rms(self):
        ds = synth_blobs(3, 40, 2, 20.0, 1.0, seed=1)
        rep = sweep_hidden(ds, [1, 3, 6], SplitSpec(0.7, 0), FAST_TRAIN)
        best = min(rep.entries, key=lambda e: (e.rms_test, e.hidden_width))
        assert rep.best_hidden_width == best.hidden_width

    def test_entries_sorted_by_width(self):
        ds = synth_blobs(2, 30, 2, 20.0, 1.0, seed=2)
        rep = sweep_hidden(ds, [5, 1, 3], SplitSpec(0.7, 0), FAST_TRAIN)
        widths = [e.hidden_width for e in rep.entries]
        assert widths == sorted(widths) == [1, 3, 5]

    def test_error_anticorrelates_with_correlation(self):
        # statistical tendency across the sweep, not a per-pair guarantee
        ds = synth_blobs(4, 50, 3, 25.0, 1.0, seed=3)
        rep = sweep_hidden(ds, [1, 2, 4, 8], SplitSpec(0.7, 0), FAST_TRAIN)
        neg_rms = [-e.rms_test for e in rep.entries]
        corr = [e.correlation for e in rep.entries]
        rank = lambda v: np.argsort(np.argsort(v))
        rho = np.corrcoef(rank(neg_rms), rank(corr))[0, 1]
        assert rho > 0

    def test_empty_widths(self):
        ds = synth_blobs(2, 20, 2, 20.0, 1.0, seed=0)
        with pytest.raises(ValueError):
            sweep_hidden(ds, [], SplitSpec(0.7, 0), FAST_TRAIN)


class TestKminStability:
    def test_collapsed_search(self):
        ds = synth_blobs(3, 30, 2, 20.0, 1.0, seed=0)
        cfg = xmeans_cfg(kmin=3, kmax=3)
        rows = kmin_stability(ds, [3], cfg)
        assert rows[0].kmin == 3 and rows[0].k == 3

    def test_well_separated_blobs_stable(self):
        ds = synth_blobs(4, 40, 3, 40.0, 1.0, seed=1)
        cfg = xmeans_cfg(kmin=2, kmax=20)
        rows = kmin_stability(ds, [2, 3, 4], cfg)
        assert [r.k for r in rows] == [4, 4, 4]

    def test_requires_xmeans(self):
        ds = synth_blobs(2, 20, 2, 20.0, 1.0, seed=0)
        cfg = PipelineConfig(
            algorithm=Algorithm.DBSCAN,
            xmeans=None,
            dbscan=DbscanConfig(eps=1.0, min_pts=2),
            train_cfg=FAST_TRAIN,
        )
        with pytest.raises(ValueError, match="X-means"):
            kmin_stability(ds, [2], cfg)

    def test_empty_kmins(self):
        ds = synth_blobs(2, 20, 2, 20.0, 1.0, seed=0)
        with pytest.raises(ValueError):
            kmin_stability(ds, [], xmeans_cfg())
