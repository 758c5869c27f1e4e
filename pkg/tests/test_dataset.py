import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heretic.dataset import (
    DataError,
    Dataset,
    FeatureSpec,
    bundled_path,
    encode,
    fit_encoder,
    infer_feature,
    load_dataset,
    load_schema,
    stratified_kfold,
    train_prune_split,
)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_monks1_has_432_instances_and_two_classes():
    train, test = load_dataset(
        bundled_path("monks-1.train.csv"), header=True, extra_paths=[bundled_path("monks-1.test.csv")]
    )
    assert len(test) == 432
    assert len(train) == 124
    assert test.classes == ("0", "1")
    # six nominal attributes, one-hot to 17 columns
    assert [f.kind for f in test.schema] == ["nominal"] * 6
    assert encode(train).X.shape == (124, 17)


def test_empty_file_is_rejected(tmp_path):
    with pytest.raises(DataError, match="no instances"):
        load_dataset(write(tmp_path, "e.csv", ""))


def test_ragged_row_is_rejected(tmp_path):
    path = write(tmp_path, "r.csv", "1,2,3,a\n1,2,b\n")
    with pytest.raises(DataError, match="ragged"):
        load_dataset(path)


def test_missing_file():
    with pytest.raises(DataError):
        load_dataset("/nonexistent/file.csv")


def test_value_outside_nominal_set(tmp_path):
    schema = [FeatureSpec("color", "nominal", ("red", "green"))]
    with pytest.raises(DataError):
        load_dataset(write(tmp_path, "d.csv", "red,a\nblue,b\n"), schema)


def test_non_numeric_real(tmp_path):
    schema = [FeatureSpec("x", "real")]
    with pytest.raises(DataError):
        load_dataset(write(tmp_path, "d.csv", "1.5,a\nfoo,b\n"), schema)


def test_missing_values_rejected(tmp_path):
    with pytest.raises(DataError, match="missing"):
        load_dataset(write(tmp_path, "d.csv", "1,a\n?,b\n"))


def test_schema_file_and_named_class_column(tmp_path):
    spath = write(tmp_path, "s.txt", "color: nominal [red, green, blue]\nsize: real\nflag: binary\n")
    dpath = write(tmp_path, "d.csv", "label,color,size,flag\nx,red,1.0,0\ny,blue,3.0,1\n")
    ds = load_dataset(dpath, load_schema(spath), header=True, class_column="label")
    assert ds.feature_names == ["color", "size", "flag"]
    assert ds.y == ("x", "y")


def test_inference_rules():
    assert infer_feature("a", ["x", "y"]).kind == "nominal"
    assert infer_feature("a", ["0", "1", "1"]).kind == "binary"
    assert infer_feature("a", ["1", "2", "3"]).kind == "nominal"
    assert infer_feature("a", [str(i) for i in range(6)]).kind == "real"
    assert infer_feature("a", ["0.5", "1.5"]).kind == "real"
    # numeric nominal values sort numerically
    assert infer_feature("a", ["10", "9", "2"]).values == ("2", "9", "10")


def raw(schema, rows, labels):
    return Dataset(schema, rows, labels, sorted(set(labels)))


def test_one_hot_real_and_binary_encoding():
    schema = [
        FeatureSpec("color", "nominal", ("red", "green", "blue")),
        FeatureSpec("x", "real"),
        FeatureSpec("b", "binary"),
    ]
    ds = raw(schema, [("green", 5.0, 1), ("red", 0.0, 0), ("blue", 10.0, 1)], ["p", "n", "p"])
    enc = encode(ds)
    assert enc.feature_names == ["color=red", "color=green", "color=blue", "x", "b"]
    np.testing.assert_array_equal(enc.X[0], [0, 1, 0, 0.5, 1])
    assert enc.schema[0].group == "color"


def test_constant_real_dropped_with_warning():
    schema = [FeatureSpec("c", "real"), FeatureSpec("b", "binary")]
    ds = raw(schema, [(3.0, 0), (3.0, 1)], ["p", "n"])
    e = fit_encoder(ds)
    assert e.warnings and "c" in e.warnings[0]
    assert e.transform(ds).feature_names == ["b"]


def test_test_rows_are_clamped_with_training_statistics():
    schema = [FeatureSpec("x", "real")]
    train = raw(schema, [(0.0,), (10.0,)], ["a", "b"])
    test = raw(schema, [(-5.0,), (20.0,), (2.5,)], ["a", "b", "a"])
    out = fit_encoder(train).transform(test)
    np.testing.assert_allclose(out.X[:, 0], [0.0, 1.0, 0.25])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abc"), st.floats(-100, 100)), min_size=2, max_size=30))
def test_encoding_invariants(rows):
    schema = [FeatureSpec("n", "nominal", ("a", "b", "c")), FeatureSpec("x", "real")]
    labels = ["p", "q"] * (len(rows) // 2) + ["p"] * (len(rows) % 2)
    enc = encode(raw(schema, rows, labels))
    # exactly one hot per nominal block, reals inside [0, 1]
    assert np.all(enc.X[:, :3].sum(axis=1) == 1)
    if enc.X.shape[1] == 4:
        assert np.all((enc.X[:, 3] >= 0) & (enc.X[:, 3] <= 1))


def test_vote_tenfold_sizes_and_stratification():
    ds = load_dataset(bundled_path("vote.csv"), header=True)
    assert len(ds) == 435
    plan = stratified_kfold(ds, 10, seed=3)
    sizes = sorted(len(f) for f in plan.folds)
    assert set(sizes) <= {43, 44}
    assert sorted(i for f in plan.folds for i in f) == list(range(435))
    y = np.array(ds.y)
    for c in ds.classes:
        share = np.sum(y == c) / len(y)
        for f in plan.folds:
            assert abs(np.sum(y[list(f)] == c) - share * len(f)) <= 1


def test_kfold_errors_and_determinism():
    labels = ["a"] * 12 + ["b"] * 8
    with pytest.raises(DataError):
        stratified_kfold(labels, 1, 0)
    with pytest.raises(DataError):
        stratified_kfold(labels, 10, 0)
    assert stratified_kfold(labels, 4, 7) == stratified_kfold(labels, 4, 7)
    assert stratified_kfold(labels, 4, 7) != stratified_kfold(labels, 4, 8)


@settings(max_examples=40, deadline=None)
@given(st.integers(20, 200), st.integers(2, 5), st.integers(0, 10**6))
def test_kfold_partition_properties(n, k, seed):
    labels = [str(i % 3) for i in range(n)]
    plan = stratified_kfold(labels, k, seed)
    seen = [i for f in plan.folds for i in f]
    assert sorted(seen) == list(range(n))
    for c in "012":
        total = labels.count(c)
        for f in plan.folds:
            assert abs(sum(labels[i] == c for i in f) - total * len(f) / n) <= 1


def test_prune_split_sizes():
    grow, prune = train_prune_split(range(100), 0.2, seed=1)
    assert (len(grow), len(prune)) == (80, 20)
    assert sorted(grow + prune) == list(range(100))
    assert train_prune_split(range(100), 0.2, seed=1) == (grow, prune)
    with pytest.raises(DataError):
        train_prune_split(range(100), 0.0, seed=1)
    with pytest.raises(DataError):
        train_prune_split(range(100), 1.0, seed=1)


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 150), st.floats(0.05, 0.95), st.integers(0, 1000))
def test_prune_split_rounding_and_stratification(n, fraction, seed):
    labels = ["x" if i % 4 else "y" for i in range(n)]
    grow, prune = train_prune_split(range(n), fraction, seed, labels)
    assert len(prune) == int(np.floor(fraction * n + 0.5))
    assert not set(grow) & set(prune)
    y_share = labels.count("y") / n
    assert abs(sum(labels[i] == "y" for i in prune) - y_share * len(prune)) <= 1
