import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cluster_mlp.dataset import (
    CleaningPolicy,
    DataError,
    Dataset,
    NormalizationParams,
    RowPolicy,
    SplitSpec,
    TargetFn,
    apply_normalization,
    clean_sentinels,
    filter_labeled,
    fit_normalization,
    holdout_split,
    invert_normalization,
    load_csv,
    synth_blobs,
    write_csv,
)


def make_ds(features, targets):
    features = np.asarray(features, dtype=float)
    return Dataset(
        features=features,
        targets=np.asarray(targets, dtype=float),
        feature_names=tuple(f"f{i}" for i in range(features.shape[1])),
        row_ids=tuple(str(i) for i in range(features.shape[0])),
    )


class TestLoadCsv:
    def test_small_file(self, tmp_path):
        p = tmp_path / "small.csv"
        p.write_text("a,b,z\n1,2,3\n4,5,6\n7,8,9\n10,11,12\n")
        ds = load_csv(p, target_column="z")
        assert ds.n == 4 and ds.d == 2
        assert ds.feature_names == ("a", "b")
        assert list(ds.targets) == [3.0, 6.0, 9.0, 12.0]

    def test_wide_magnitude_catalog_width(self, tmp_path):
        p = tmp_path / "cat.csv"
        cols = [f"mag{i}" for i in range(18)] + ["z_spec"]
        p.write_text(",".join(cols) + "\n" + ",".join(["1.0"] * 19) + "\n")
        ds = load_csv(p, target_column="z_spec")
        assert ds.d == 18

    def test_unparseable_cell_names_row(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,z\n1,2\nabc,4\n")
        with pytest.raises(DataError, match="row 3"):
            load_csv(p, target_column="z")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            load_csv(tmp_path / "nope.csv", target_column="z")

    def test_missing_target_column(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(DataError, match="target column"):
            load_csv(p, target_column="z")

    def test_empty_data_section(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("a,z\n")
        with pytest.raises(DataError, match="no data rows"):
            load_csv(p, target_column="z")

    def test_empty_cell_rejected(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("a,z\n1,\n")
        with pytest.raises(DataError, match="empty cell"):
            load_csv(p, target_column="z")

    def test_id_column(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("id,a,z\ngal1,1,2\ngal2,3,4\n")
        ds = load_csv(p, target_column="z", id_column="id")
        assert ds.row_ids == ("gal1", "gal2")
        assert ds.d == 1


class TestFilterLabeled:
    def test_drops_sentinel_targets(self):
        ds = make_ds([[1.0], [2.0], [3.0]], [0.5, -9.999, 0.7])
        out = filter_labeled(ds, CleaningPolicy())
        assert out.n == 2
        assert list(out.targets) == [0.5, 0.7]
        assert out.row_ids == ("0", "2")

    def test_identity_without_sentinels(self):
        ds = make_ds([[1.0], [2.0]], [0.5, 0.7])
        out = filter_labeled(ds, CleaningPolicy())
        assert np.array_equal(out.features, ds.features)
        assert out.row_ids == ds.row_ids

    def test_all_unlabeled_errors(self):
        ds = make_ds([[1.0], [2.0]], [-9.999, -9.999])
        with pytest.raises(DataError, match="no labeled rows"):
            filter_labeled(ds, CleaningPolicy())


class TestCleanSentinels:
    def test_drops_rows_with_feature_sentinel(self):
        ds = make_ds([[1.0, 2.0], [3.0, 99.0], [5.0, 6.0]], [1, 2, 3])
        out = clean_sentinels(ds, CleaningPolicy())
        assert out.n == 2
        assert out.row_ids == ("0", "2")

    def test_negative_sentinel(self):
        ds = make_ds([[-99.0], [1.0]], [1, 2])
        out = clean_sentinels(ds, CleaningPolicy())
        assert out.n == 1

    def test_identity_without_sentinels(self):
        ds = make_ds([[1.0], [2.0]], [1, 2])
        out = clean_sentinels(ds, CleaningPolicy())
        assert np.array_equal(out.features, ds.features)

    def test_keep_rows_policy_is_noop(self):
        ds = make_ds([[99.0]], [1])
        policy = CleaningPolicy(row_policy=RowPolicy.KEEP_ROWS)
        assert clean_sentinels(ds, policy) is ds

    def test_all_rows_dropped_errors(self):
        ds = make_ds([[99.0], [-99.0]], [1, 2])
        with pytest.raises(DataError):
            clean_sentinels(ds, CleaningPolicy())

    @given(
        st.lists(
            st.tuples(
                st.sampled_from([1.0, 2.0, 99.0, -99.0]),
                st.sampled_from([0.5, -9.999]),
            ),
            min_size=1,
            max_size=20,
        )
    )
    def test_cleaning_order_commutes(self, rows):
        # both steps drop rows by independent predicates
        ds = make_ds([[r[0]] for r in rows], [r[1] for r in rows])
        policy = CleaningPolicy()

        def safe(fn, d):
            try:
                return fn(d, policy)
            except DataError:
                return None

        a = safe(filter_labeled, ds)
        a = safe(clean_sentinels, a) if a is not None else None
        b = safe(clean_sentinels, ds)
        b = safe(filter_labeled, b) if b is not None else None
        # both orders keep exactly the intersection, so they fail together
        assert (a is None) == (b is None)
        if a is None:
            return
        assert a.row_ids == b.row_ids
        assert np.array_equal(a.features, b.features)


class TestHoldoutSplit:
    def test_sizes(self):
        ds = make_ds(np.arange(20).reshape(10, 2), np.arange(10))
        train, test = holdout_split(ds, SplitSpec(0.7, 0))
        assert train.n == 7 and test.n == 3

    def test_floor_cut_on_odd_row_count(self):
        ds = make_ds(np.arange(515).reshape(515, 1), np.arange(515))
        train, test = holdout_split(ds, SplitSpec(0.7, 0))
        assert train.n == 360 and test.n == 155

    def test_deterministic(self):
        ds = make_ds(np.arange(20).reshape(10, 2), np.arange(10))
        a = holdout_split(ds, SplitSpec(0.7, 5))
        b = holdout_split(ds, SplitSpec(0.7, 5))
        assert a[0].row_ids == b[0].row_ids and a[1].row_ids == b[1].row_ids

    def test_too_small(self):
        ds = make_ds([[1.0]], [1.0])
        with pytest.raises(DataError):
            holdout_split(ds, SplitSpec(0.7, 0))

    @given(st.integers(min_value=2, max_value=50), st.integers(min_value=0, max_value=10))
    def test_partition(self, n, seed):
        ds = make_ds(np.arange(n).reshape(n, 1), np.arange(n))
        train, test = holdout_split(ds, SplitSpec(0.7, seed))
        assert sorted(train.row_ids + test.row_ids) == sorted(ds.row_ids)
        assert set(train.row_ids).isdisjoint(test.row_ids)


class TestNormalization:
    def test_simple_column(self):
        ds = make_ds([[0.0], [2.0]], [0.0, 2.0])
        p = fit_normalization(ds)
        assert p.center[0] == pytest.approx(1.0)
        assert p.scale[0] == pytest.approx(1.0)

    def test_constant_column_gets_scale_one(self):
        ds = make_ds([[5.0], [5.0], [5.0]], [1.0, 2.0, 3.0])
        p = fit_normalization(ds)
        assert p.center[0] == 5.0 and p.scale[0] == 1.0

    def test_matches_one_pass_oracle(self):
        rng = np.random.default_rng(8)
        feats = rng.normal(size=(13, 2))
        ds = make_ds(feats, rng.normal(size=13))
        p = fit_normalization(ds)
        for j in range(2):
            col = [feats[i][j] for i in range(13)]
            mean = sum(col) / 13
            var = sum((v - mean) ** 2 for v in col) / 13
            assert p.center[j] == pytest.approx(mean, rel=1e-12)
            assert p.scale[j] == pytest.approx(var**0.5, rel=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        ds = make_ds(rng.normal(5, 3, size=(20, 3)), rng.normal(size=20))
        p = fit_normalization(ds)
        back = invert_normalization(apply_normalization(ds, p), p)
        assert np.allclose(back.features, ds.features, rtol=1e-12, atol=1e-12)
        assert np.allclose(back.targets, ds.targets, rtol=1e-12, atol=1e-12)

    def test_fitted_set_has_zero_mean(self):
        rng = np.random.default_rng(2)
        ds = make_ds(rng.normal(size=(30, 2)), rng.normal(size=30))
        norm = apply_normalization(ds, fit_normalization(ds))
        assert np.all(np.abs(norm.features.mean(axis=0)) < 1e-10)

    def test_identity_params(self):
        ds = make_ds([[1.0, 2.0]], [3.0])
        p = NormalizationParams(
            center=np.zeros(2), scale=np.ones(2), target_center=0.0, target_scale=1.0
        )
        out = apply_normalization(ds, p)
        assert np.array_equal(out.features, ds.features)
        assert np.array_equal(out.targets, ds.targets)

    def test_dimension_mismatch(self):
        ds = make_ds([[1.0, 2.0]], [3.0])
        p = NormalizationParams(
            center=np.zeros(3), scale=np.ones(3), target_center=0.0, target_scale=1.0
        )
        with pytest.raises(DataError):
            apply_normalization(ds, p)


class TestSynthBlobs:
    def test_shape_and_metadata(self):
        ds = synth_blobs(3, 50, 2, 10.0, 0.5, seed=0)
        assert ds.n == 150 and ds.d == 2
        assert ds.metadata["true_k"] == 3

    def test_single_blob(self):
        ds = synth_blobs(1, 30, 2, 5.0, 1.0, seed=0)
        assert ds.n == 30
        assert ds.metadata["true_k"] == 1

    def test_centers_separated(self):
        ds = synth_blobs(5, 10, 3, 8.0, 0.1, seed=3)
        centers = np.array(ds.metadata["true_centers"])
        for i in range(5):
            for j in range(i + 1, 5):
                assert np.linalg.norm(centers[i] - centers[j]) >= 8.0

    def test_nearest_center_recovers_labels(self):
        # brute-force nearest-center assignment at separation/noise = 20
        ds = synth_blobs(4, 50, 3, 20.0, 1.0, seed=5)
        centers = np.array(ds.metadata["true_centers"])
        true = np.array(ds.metadata["true_labels"])
        assigned = np.array(
            [np.argmin([np.linalg.norm(x - c) for c in centers]) for x in ds.features]
        )
        assert np.mean(assigned == true) >= 0.99

    def test_deterministic(self):
        a = synth_blobs(3, 20, 2, 10.0, 0.5, seed=9)
        b = synth_blobs(3, 20, 2, 10.0, 0.5, seed=9)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.targets, b.targets)

    def test_sum_of_features_targets(self):
        ds = synth_blobs(2, 10, 3, 10.0, 0.5, target_fn=TargetFn.SUM_OF_FEATURES, seed=0)
        assert np.allclose(ds.targets, ds.features.sum(axis=1))


class TestCsvRoundTrip:
    def test_write_then_load(self, tmp_path):
        ds = synth_blobs(2, 10, 3, 10.0, 0.5, seed=4)
        p = tmp_path / "blobs.csv"
        write_csv(ds, p)
        back = load_csv(p, target_column="target")
        assert np.array_equal(back.features, ds.features)
        assert np.array_equal(back.targets, ds.targets)
