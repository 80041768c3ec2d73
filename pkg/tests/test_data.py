import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slscreen import (
    CsvOptions,
    Dataset,
    InvalidCovariance,
    InvalidDataset,
    ParseError,
    SyntheticConfig,
    add_intercept_column,
    gen_synthetic,
    load_dense_csv,
    load_sparse_text,
    standardize_columns,
    write_dense_csv,
)
from slscreen.data import dense_csv_text, true_support_indices


def test_large_parameter_set_shape():
    d = gen_synthetic(SyntheticConfig(n=500, m=200, k=50, s=1000, seed=1))
    assert d.a.shape == (200, 500)
    assert len(d.true_support) == 50


def test_equispaced_support():
    d = gen_synthetic(SyntheticConfig(n=10, m=5, k=2, s=1.0, seed=0))
    assert d.true_support == frozenset({0, 5})


@given(st.integers(1, 300), st.data())
def test_support_indices_distinct_and_in_range(n, data):
    k = data.draw(st.integers(1, n))
    idx = true_support_indices(n, k)
    assert len(set(idx.tolist())) == k
    assert idx.min() >= 0 and idx.max() < n


def test_zero_signal_labels_are_fair_coins():
    ys = np.array([gen_synthetic(SyntheticConfig(n=4, m=3, k=1, s=0.0, seed=s)).y
                   for s in range(3334)]).ravel()[:10_000]
    assert abs(np.mean(ys == 1.0) - 0.5) < 0.02


def test_same_seed_bit_identical():
    cfg = SyntheticConfig(n=7, m=9, k=3, s=2.0, seed=2**63 + 5)
    a, b = gen_synthetic(cfg), gen_synthetic(cfg)
    assert a.a.tobytes() == b.a.tobytes() and a.y.tobytes() == b.y.tobytes()
    c = gen_synthetic(SyntheticConfig(n=7, m=9, k=3, s=2.0, seed=6))
    assert a.a.tobytes() != c.a.tobytes()


def test_label_probability_follows_sigmoid():
    # single feature in the support, fixed design row -> label frequency = sigmoid(s a)
    cov = np.eye(1)
    hits, total = 0, 0
    for seed in range(4000):
        d = gen_synthetic(SyntheticConfig(n=1, m=1, k=1, s=1.0, seed=seed, covariance=cov))
        if abs(d.a[0, 0] - 0.5) < 0.25:
            total += 1
            hits += d.y[0] == 1.0
    assert total > 500
    assert abs(hits / total - 1 / (1 + np.exp(-0.5))) < 0.06


def test_explicit_covariance_is_used():
    cov = np.array([[1.0, 0.9], [0.9, 1.0]])
    d = gen_synthetic(SyntheticConfig(n=2, m=20000, k=1, s=1.0, seed=3, covariance=cov))
    emp = np.cov(d.a.T)
    assert np.allclose(emp, cov, atol=0.05)


def test_invalid_covariance():
    with pytest.raises(InvalidCovariance):
        gen_synthetic(SyntheticConfig(n=2, m=3, k=1, s=1.0, covariance=np.array([[1.0, 2.0], [2.0, 1.0]])))
    with pytest.raises(InvalidCovariance):
        gen_synthetic(SyntheticConfig(n=2, m=3, k=1, s=1.0, covariance=np.array([[1.0, 0.1], [0.0, 1.0]])))


@pytest.mark.parametrize("kw", [dict(k=0), dict(k=5), dict(s=-1.0), dict(seed=-1), dict(seed=2**64)])
def test_invalid_synthetic_config(kw):
    base = dict(n=4, m=3, k=1, s=1.0, seed=0)
    base.update(kw)
    with pytest.raises(ValueError):
        SyntheticConfig(**base)


def test_dataset_validation():
    with pytest.raises(InvalidDataset):
        Dataset(np.ones((2, 2)), [1.0, 0.0])
    with pytest.raises(InvalidDataset):
        Dataset(np.array([[np.nan]]), [1.0])
    with pytest.raises(InvalidDataset):
        Dataset(np.ones((2, 2)), [1.0])
    with pytest.raises(InvalidDataset):
        Dataset(np.ones((0, 2)), [])
    with pytest.raises(InvalidDataset):
        Dataset(np.ones((1, 2)), [1.0], true_support={2})


def test_dataset_is_immutable():
    src = np.ones((2, 2))
    d = Dataset(src, [1.0, -1.0])
    src[0, 0] = 5.0
    assert d.a[0, 0] == 1.0
    with pytest.raises(ValueError):
        d.a[0, 0] = 3.0


def test_csv_labels_zero_maps_to_minus_one(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1,0.5,2\n0,1,1\n1,3,4\n")
    d = load_dense_csv(p)
    assert d.y.tolist() == [1.0, -1.0, 1.0]
    assert d.a.shape == (3, 2)


def test_csv_nan_cell_location(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1,0.5,2,3\n0,1,1,NaN\n")
    with pytest.raises(ParseError) as exc:
        load_dense_csv(p)
    assert exc.value.line == 2 and exc.value.column == 4
    assert "row 2" in str(exc.value) and "column 4" in str(exc.value)


def test_csv_bad_label_and_ragged_rows(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("2,0.5\n")
    with pytest.raises(ParseError):
        load_dense_csv(p)
    p.write_text("1,0.5\n1,0.5,3\n")
    with pytest.raises(ParseError):
        load_dense_csv(p)


def test_csv_label_column_and_header(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,target\n0.5,1,1\n2,3,-1\n")
    d = load_dense_csv(p, CsvOptions(label_column=2))
    assert d.feature_names == ("a", "b")
    assert d.y.tolist() == [1.0, -1.0]
    assert d.a.tolist() == [[0.5, 1.0], [2.0, 3.0]]


def test_csv_round_trip_exact(tmp_path):
    d = gen_synthetic(SyntheticConfig(n=6, m=11, k=2, s=3.0, seed=4))
    p = tmp_path / "d.csv"
    write_dense_csv(d, p)
    back = load_dense_csv(p)
    assert np.array_equal(back.a, d.a) and np.array_equal(back.y, d.y)
    assert dense_csv_text(back) == p.read_text()


def test_sparse_examples(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("+1 3:2.5\n")
    d = load_sparse_text(p, n_features=4)
    assert d.a.tolist() == [[0.0, 0.0, 2.5, 0.0]] and d.y.tolist() == [1.0]
    p.write_text("-1\n+1 1:1\n")
    d = load_sparse_text(p)
    assert d.a.tolist() == [[0.0], [1.0]] and d.y.tolist() == [-1.0, 1.0]


@pytest.mark.parametrize("line", ["+1 2:1 2:1", "+1 3:1 2:1", "+1 x:1", "+1 2:abc", "+1 0:1", "7 1:1"])
def test_sparse_errors_name_line(tmp_path, line):
    p = tmp_path / "s.txt"
    p.write_text(line + "\n")
    with pytest.raises(ParseError) as exc:
        load_sparse_text(p)
    assert exc.value.line == 1


def test_standardize_and_intercept():
    rng = np.random.default_rng(0)
    d = Dataset(rng.standard_normal((30, 3)) * [1.0, 5.0, 0.1], np.sign(rng.standard_normal(30)))
    s = standardize_columns(d)
    assert np.allclose(s.a.std(axis=0), 1.0)
    c = add_intercept_column(s)
    assert c.n == 4 and np.all(c.a[:, -1] == 1.0)
