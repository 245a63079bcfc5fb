import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedtrigger import data, nn
from fedtrigger.data import DataError, EmptyDatasetError, MOORE_CLASSES


def write(path, text):
    path.write_text(text)
    return path


def test_load_small_csv(tmp_path):
    p = write(tmp_path / "a.csv", "f1,f2,f3,f4,label\n1,2,3,4,A\n5,6,7,8,B\n0,0,0,1,A\n")
    ds = data.load_csv(p)
    assert (len(ds), ds.d, ds.n_classes) == (3, 4, 2)
    assert ds.class_names == ("A", "B")
    assert ds.y.tolist() == [0, 1, 0]
    np.testing.assert_array_equal(ds.X[1], [5, 6, 7, 8])


def test_whitelist_of_seven_traffic_classes(tmp_path):
    rows = ["a,b,label"] + [f"{i},{i + 1},{c}" for i, c in enumerate(MOORE_CLASSES)]
    rows.append("9,9,GAMES")
    ds = data.load_csv(write(tmp_path / "m.csv", "\n".join(rows) + "\n"),
                       label_column="label", class_whitelist=MOORE_CLASSES)
    assert ds.n_classes == 7 and len(ds) == 7
    assert ds.class_names == MOORE_CLASSES


def test_non_numeric_cell_is_named(tmp_path):
    p = write(tmp_path / "bad.csv", "x,y,label\n1,2,A\n3,abc,B\n")
    with pytest.raises(DataError, match=r"row 3.*'y'.*'abc'"):
        data.load_csv(p)


def test_ragged_row_and_empty_filter(tmp_path):
    with pytest.raises(DataError, match="columns"):
        data.load_csv(write(tmp_path / "r.csv", "x,y,label\n1,2,A\n3,B\n"))
    with pytest.raises(EmptyDatasetError):
        data.load_csv(write(tmp_path / "e.csv", "x,label\n1,A\n"), class_whitelist=["Z"])


def test_label_column_by_index_without_header(tmp_path):
    p = write(tmp_path / "h.csv", "B,1,2\nA,3,4\n")
    ds = data.load_csv(p, label_column=0, header=False)
    assert ds.y.tolist() == [1, 0]
    np.testing.assert_array_equal(ds.X, [[1, 2], [3, 4]])


def test_csv_roundtrip(tmp_path):
    ds = data.synthesize(5, 3, 4, 1.0, 0)
    ds.to_csv(tmp_path / "s.csv")
    back = data.load_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.y, ds.y)


def test_synthesize_shape_and_determinism():
    a = data.synthesize(216, 7, 100, 3.0, 42)
    b = data.synthesize(216, 7, 100, 3.0, 42)
    assert (a.d, a.n_classes, len(a)) == (216, 7, 700)
    assert a.class_counts().tolist() == [100] * 7
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    assert not np.array_equal(a.X, data.synthesize(216, 7, 100, 3.0, 43).X)


def test_zero_separation_is_chance():
    # nothing to learn: held-out accuracy of a trained model sits near 1/L
    L = 4
    ds = data.synthesize(10, L, 500, 0.0, 3)
    train, test = data.split(ds, 0.5, 0)
    arch = nn.ModelArch(10, ((16, "relu"),), L)
    model = nn.train(nn.init_params(arch, 0), train, nn.TrainConfig(5, 50, 0.01, seed=0))
    assert abs(nn.accuracy(model, test) - 1 / L) <= 0.05


def test_minmax_cases():
    sc = data.MinMaxScaler(np.array([0.0, 3.0]), np.array([10.0, 3.0]))
    np.testing.assert_array_equal(sc.transform([5.0, 3.0]), [0.5, 0.0])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 30), st.integers(1, 6))
def test_normalize_roundtrip(seed, n, d):
    X = np.random.default_rng(seed).normal(0, 100, size=(n, d))
    ds = data.Dataset(X, np.zeros(n, dtype=int), 2)
    scaled, sc = data.normalize(ds)
    assert scaled.X.min() >= 0.0 and scaled.X.max() <= 1.0
    np.testing.assert_allclose(sc.inverse(scaled.X), X, rtol=1e-9, atol=1e-9)


def test_split_sizes_and_determinism():
    ds = data.synthesize(3, 2, 50, 1.0, 0)
    a_tr, a_te = data.split(ds, 0.2, 9)
    b_tr, b_te = data.split(ds, 0.2, 9)
    assert (len(a_tr), len(a_te)) == (80, 20)
    np.testing.assert_array_equal(a_te.X, b_te.X)
    np.testing.assert_array_equal(a_tr.y, b_tr.y)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 40), min_size=2, max_size=6),
       st.floats(0.05, 0.95), st.integers(0, 2**32))
def test_split_is_stratified_and_disjoint(counts, frac, seed):
    y = np.repeat(np.arange(len(counts)), counts)
    X = np.arange(y.size, dtype=float)[:, None]
    tr, te = data.split(data.Dataset(X, y, len(counts)), frac, seed)
    assert len(tr) + len(te) == y.size
    assert set(tr.X[:, 0]).isdisjoint(te.X[:, 0])
    assert len(te) == round(y.size * frac) or np.any(tr.class_counts() == 1)
    # each class within one record of its proportional share
    assert np.all(np.abs(te.class_counts() - np.array(counts) * frac) < 1 + 1e-9)


def test_partition_sizes_identity_and_balance():
    ds = data.synthesize(4, 7, 143, 1.0, 0).subset(np.arange(1000))
    part = data.partition_iid(ds, 10, 3)
    assert [len(c) for c in part.client_datasets] == [100] * 10
    allidx = np.sort(np.concatenate(part.indices))
    np.testing.assert_array_equal(allidx, np.arange(1000))
    glob = ds.class_counts() / len(ds)
    for c in part.client_datasets:
        assert np.max(np.abs(c.class_counts() / len(c) - glob)) <= 0.05

    one = data.partition_iid(ds, 1, 3)
    np.testing.assert_array_equal(one[0].X, ds.X)


def test_partition_rejects_too_many_clients():
    with pytest.raises(DataError):
        data.partition_iid(data.synthesize(2, 2, 2, 1.0, 0), 5, 0)


def test_dataset_validation():
    with pytest.raises(DataError):
        data.Dataset(np.zeros((2, 2)), np.array([0, 3]), 2)
    with pytest.raises(DataError):
        data.Dataset(np.array([[np.nan]]), np.array([0]), 2)
