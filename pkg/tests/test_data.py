import numpy as np
import pytest

from qcll.data import (
    Dataset,
    INNER_RADIUS,
    OUTER_RADIUS,
    apply_scale,
    feature_pairs,
    gen_classification,
    gen_regression,
    load_delimited,
    minmax_scale,
    save_delimited,
    split,
)


class TestDataset:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Dataset(np.array([[np.nan]]), np.array([0.0]), ("x",), "regression")

    def test_rejects_bad_kind(self):
        with pytest.raises(ValueError):
            Dataset(np.ones((2, 1)), np.zeros(2), ("x",), "ranking")

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(np.ones((3, 1)), np.zeros(2), ("x",), "regression")

    def test_n_classes(self):
        ds = Dataset(np.ones((4, 1)), np.array([0, 1, 2, 1]), ("x",),
                     "classification")
        assert ds.n_classes == 3
        with pytest.raises(ValueError):
            Dataset(np.ones((2, 1)), np.zeros(2), ("x",), "regression").n_classes


class TestGenerators:
    def test_regression_domain_and_target(self):
        rng = np.random.default_rng(0)
        ds = gen_regression("x2", 200, 0.0, rng)
        assert ds.X.shape == (200, 1)
        assert np.all(np.abs(ds.X) <= 1)
        np.testing.assert_allclose(ds.y, ds.X[:, 0] ** 2, atol=1e-12)

    def test_regression_noise_changes_targets(self):
        a = gen_regression("sin", 50, 0.0, np.random.default_rng(1))
        b = gen_regression("sin", 50, 0.3, np.random.default_rng(1))
        np.testing.assert_array_equal(a.X, b.X)
        assert not np.allclose(a.y, b.y)

    def test_unknown_function_rejected(self):
        with pytest.raises(ValueError, match="unknown target"):
            gen_regression("tanh", 10, 0.0, np.random.default_rng(0))

    def test_classification_geometry(self):
        ds = gen_classification(300, np.random.default_rng(2))
        r = np.hypot(ds.X[:, 0], ds.X[:, 1])
        assert np.all(r[ds.y == 1] <= INNER_RADIUS + 1e-12)
        assert np.all(r[ds.y == 0] >= OUTER_RADIUS - 1e-12)
        assert np.sum(ds.y == 0) == np.sum(ds.y == 1) == 300


class TestDelimitedIO:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        ds = Dataset(rng.uniform(-5, 5, (10, 3)), rng.standard_normal(10),
                     ("a", "b", "c"), "regression")
        path = tmp_path / "d.csv"
        save_delimited(ds, path, "y")
        back = load_delimited(path, "y", "regression")
        np.testing.assert_array_equal(back.X, ds.X)
        np.testing.assert_array_equal(back.y, ds.y)
        assert back.feature_names == ("a", "b", "c")

    def test_target_by_index(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("p,q,r\n1,2,3\n4,5,6\n")
        ds = load_delimited(path, 1, "regression")
        np.testing.assert_array_equal(ds.y, [2.0, 5.0])
        assert ds.feature_names == ("p", "r")

    def test_classification_labels_densify_in_order(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,label\n0.1,cat\n0.2,dog\n0.3,cat\n")
        ds = load_delimited(path, "label", "classification")
        np.testing.assert_array_equal(ds.y, [0, 1, 0])

    def test_non_numeric_cell_names_location(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y\noops,1.0\n")
        with pytest.raises(ValueError, match=r"row 1.*'x'"):
            load_delimited(path, "y", "regression")

    def test_missing_target_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y\n1,2\n")
        with pytest.raises(ValueError, match="'z'"):
            load_delimited(path, "z", "regression")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_delimited(path, 0, "regression")


class TestScaling:
    def test_train_range_becomes_unit_interval(self):
        rng = np.random.default_rng(4)
        ds = Dataset(rng.uniform(3, 9, (20, 2)), np.zeros(20), None, "regression")
        scaled, stats = minmax_scale(ds)
        np.testing.assert_allclose(scaled.X.min(axis=0), [-1, -1], atol=1e-12)
        np.testing.assert_allclose(scaled.X.max(axis=0), [1, 1], atol=1e-12)

    def test_constant_feature_maps_to_zero(self):
        ds = Dataset(np.full((5, 1), 2.5), np.zeros(5), None, "regression")
        scaled, _ = minmax_scale(ds)
        np.testing.assert_array_equal(scaled.X, np.zeros((5, 1)))

    def test_test_split_clamps_out_of_range(self):
        train_ds = Dataset(np.array([[0.0], [10.0]]), np.zeros(2), None,
                           "regression")
        _, stats = minmax_scale(train_ds)
        test_ds = Dataset(np.array([[-5.0], [20.0], [5.0]]), np.zeros(3), None,
                          "regression")
        scaled = apply_scale(stats, test_ds)
        np.testing.assert_allclose(scaled.X[:, 0], [-1.0, 1.0, 0.0], atol=1e-12)


class TestSplitAndPairs:
    def test_split_is_a_partition(self):
        rng = np.random.default_rng(5)
        ds = Dataset(np.arange(20, dtype=float)[:, None], np.zeros(20), None,
                     "regression")
        tr, te = split(ds, 0.2, rng)
        assert tr.n_samples == 16 and te.n_samples == 4
        merged = np.sort(np.concatenate([tr.X[:, 0], te.X[:, 0]]))
        np.testing.assert_array_equal(merged, np.arange(20))

    def test_split_deterministic(self):
        ds = Dataset(np.arange(10, dtype=float)[:, None], np.zeros(10), None,
                     "regression")
        t1, _ = split(ds, 0.3, np.random.default_rng(9))
        t2, _ = split(ds, 0.3, np.random.default_rng(9))
        np.testing.assert_array_equal(t1.X, t2.X)

    def test_split_validation(self):
        ds = Dataset(np.ones((4, 1)), np.zeros(4), None, "regression")
        with pytest.raises(ValueError):
            split(ds, 0.5, np.random.default_rng(0))

    def test_feature_pairs_order_and_count(self):
        ds = Dataset(np.ones((3, 4)), np.zeros(3), ("a", "b", "c", "d"),
                     "regression")
        pairs = feature_pairs(ds)
        assert len(pairs) == 6
        assert pairs[0].feature_names == ("a", "b")
        assert pairs[-1].feature_names == ("c", "d")

    def test_feature_pairs_need_two_features(self):
        ds = Dataset(np.ones((3, 1)), np.zeros(3), ("a",), "regression")
        with pytest.raises(ValueError):
            feature_pairs(ds)
