import os

import numpy as np
import pytest

from gpmal.dataset import (DataError, Dataset, load_csv, scale_min_max,
                           stratified_folds)


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_csv_basic(tmp_path):
    path = write(tmp_path, "a,b,label\n1,2,x\n3,4,y\n5,6,x\n")
    d = load_csv(path, "label")
    assert d.n_instances == 3
    assert d.n_features == 2
    assert d.feature_names == ["a", "b"]
    assert not d.scaled
    # row order preserved
    assert np.array_equal(d.features, [[1, 2], [3, 4], [5, 6]])
    assert list(d.labels) == ["x", "y", "x"]


def test_load_csv_label_by_index_no_header(tmp_path):
    path = write(tmp_path, "1,x,2\n3,y,4\n")
    d = load_csv(path, 1, has_header=False)
    assert d.n_features == 2
    assert list(d.labels) == ["x", "y"]
    assert np.array_equal(d.features, [[1, 2], [3, 4]])


def test_load_csv_parse_error_names_row_and_column(tmp_path):
    path = write(tmp_path, "a,b,label\n1,2,x\n1,abc,y\n")
    with pytest.raises(DataError, match="line 3.*b.*abc"):
        load_csv(path, "label")


def test_load_csv_ragged_row(tmp_path):
    path = write(tmp_path, "a,b,label\n1,2,x\n1,2\n")
    with pytest.raises(DataError, match="line 3"):
        load_csv(path, "label")


def test_load_csv_missing_label_column(tmp_path):
    path = write(tmp_path, "a,b,label\n1,2,x\n")
    with pytest.raises(DataError, match="not in header"):
        load_csv(path, "class")


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_csv(str(tmp_path / "nope.csv"), "label")


def test_load_csv_non_finite_cell(tmp_path):
    path = write(tmp_path, "a,label\ninf,x\n2,y\n")
    with pytest.raises(DataError, match="non-finite"):
        load_csv(path, "label")


def make(features, labels=None):
    features = np.asarray(features, dtype=float)
    if labels is None:
        labels = np.array(["c"] * len(features))
    return Dataset(features, labels)


def test_scale_affine_column():
    d = scale_min_max(make([[2], [4], [6]]))
    assert np.allclose(d.features[:, 0], [0.0, 0.5, 1.0])
    assert d.scaled


def test_scale_constant_column_maps_to_zero():
    d = scale_min_max(make([[7, 1], [7, 2], [7, 3]]))
    assert np.all(d.features[:, 0] == 0.0)
    assert np.allclose(d.features[:, 1], [0.0, 0.5, 1.0])


def test_scale_hand_case_negative_min():
    # (v - min) / (max - min) over [-1, 0, 3]
    d = scale_min_max(make([[-1], [0], [3]]))
    assert np.allclose(d.features[:, 0], [0.0, 0.25, 1.0])


def test_scale_idempotent():
    rng = np.random.default_rng(0)
    d = make(rng.normal(size=(40, 6)) * 10)
    once = scale_min_max(d)
    twice = scale_min_max(once)
    assert np.array_equal(once.features, twice.features)


def test_scale_column_extrema():
    rng = np.random.default_rng(1)
    feats = rng.normal(size=(30, 5))
    feats[:, 2] = 4.2  # constant
    d = scale_min_max(make(feats))
    for c in range(5):
        col = d.features[:, c]
        if c == 2:
            assert np.all(col == 0.0)
        else:
            assert col.min() == 0.0
            assert col.max() == 1.0


def test_dataset_invariants():
    with pytest.raises(ValueError):
        Dataset(np.ones((1, 3)), np.array(["a"]))  # n < 2
    with pytest.raises(ValueError):
        Dataset(np.array([[1.0, np.nan], [0, 1]]), np.array(["a", "b"]))
    with pytest.raises(ValueError):
        Dataset(np.ones((3, 2)), np.array(["a", "b"]))  # label count


def test_folds_balanced_two_class():
    labels = np.array(["a"] * 5 + ["b"] * 5)
    d = make(np.arange(20).reshape(10, 2), labels)
    fa = stratified_folds(d, 2, seed=3)
    sizes = np.bincount(fa.fold_of_instance, minlength=2)
    assert list(sizes) == [5, 5]
    for cls in ("a", "b"):
        counts = np.bincount(fa.fold_of_instance[labels == cls], minlength=2)
        assert counts.max() - counts.min() <= 1


def test_folds_deterministic():
    labels = np.array(["a", "b"] * 10)
    d = make(np.arange(40).reshape(20, 2), labels)
    f1 = stratified_folds(d, 4, seed=11)
    f2 = stratified_folds(d, 4, seed=11)
    assert np.array_equal(f1.fold_of_instance, f2.fold_of_instance)
    f3 = stratified_folds(d, 4, seed=12)
    assert not np.array_equal(f1.fold_of_instance, f3.fold_of_instance)


def test_folds_partition_property():
    rng = np.random.default_rng(5)
    labels = np.array([f"c{i}" for i in rng.integers(0, 4, size=57)])
    d = make(rng.normal(size=(57, 3)), labels)
    fa = stratified_folds(d, 7, seed=0)
    assert fa.fold_of_instance.shape == (57,)
    assert set(np.unique(fa.fold_of_instance)) == set(range(7))


def test_folds_size_spread_like_358_instance_6_class():
    # class mix shaped like a 358-instance 6-class table
    counts = [112, 61, 72, 49, 44, 20]
    labels = np.concatenate([[f"c{i}"] * c for i, c in enumerate(counts)])
    rng = np.random.default_rng(2)
    d = make(rng.normal(size=(358, 4)), labels)
    fa = stratified_folds(d, 10, seed=9)
    sizes = np.bincount(fa.fold_of_instance, minlength=10)
    assert set(sizes) <= {35, 36}
    for i in range(6):
        cls_counts = np.bincount(fa.fold_of_instance[labels == f"c{i}"],
                                 minlength=10)
        assert cls_counts.max() - cls_counts.min() <= 1


def test_folds_argument_errors():
    d = make(np.arange(12).reshape(6, 2))
    with pytest.raises(ValueError):
        stratified_folds(d, 1, seed=0)
    with pytest.raises(ValueError):
        stratified_folds(d, 7, seed=0)


DERMATOLOGY = os.environ.get(
    "GPMAL_DERMATOLOGY_CSV",
    os.path.join(os.path.dirname(__file__), "..", "data", "dermatology.data"))


@pytest.mark.skipif(not os.path.exists(DERMATOLOGY),
                    reason="UCI dermatology file not available")
def test_load_dermatology_shape(tmp_path):
    # raw file: 34 attributes + class, 8 rows with missing age dropped
    kept = [ln for ln in open(DERMATOLOGY, encoding="utf-8")
            if ln.strip() and "?" not in ln]
    path = tmp_path / "dermatology.csv"
    path.write_text("".join(kept), encoding="utf-8")
    d = load_csv(str(path), 34, has_header=False)
    assert d.n_instances == 358
    assert d.n_features == 34
    assert d.n_classes == 6
