import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from csvm.data import (
    DataError,
    Dataset,
    Domain,
    SyntheticSpec,
    apply_pca,
    apply_standardizer,
    fit_pca,
    fit_standardizer,
    invert_standardizer,
    load_csv,
    load_libsvm,
    make_shifted_gaussians,
    sample_split,
    write_libsvm,
)


def test_libsvm_single_line(tmp_path):
    p = tmp_path / "a.libsvm"
    p.write_text("1 1:2.0 3:1.0\n")
    d = load_libsvm(p, "source")
    assert d.dim == 3
    np.testing.assert_array_equal(d.X, [[2.0, 0.0, 1.0]])
    assert d.raw_labels().tolist() == [1]
    assert d.labels.tolist() == [0]
    assert d.domains.tolist() == [Domain.SOURCE]


def test_libsvm_mixed_dimension_uses_global_max(tmp_path):
    p = tmp_path / "a.libsvm"
    p.write_text("-1 2:1\n+1 5:3.5 1:1\n")
    d = load_libsvm(p, Domain.TARGET)
    assert d.dim == 5
    np.testing.assert_array_equal(d.X, [[0, 1, 0, 0, 0], [1, 0, 0, 0, 3.5]])
    assert d.classes.tolist() == [-1, 1]
    assert d.n_target == 2 and d.n_source == 0


def test_libsvm_parse_error_names_line(tmp_path):
    p = tmp_path / "bad.libsvm"
    p.write_text("1 2:abc\n")
    with pytest.raises(DataError, match="line 1"):
        load_libsvm(p, "source")


def test_libsvm_empty_file(tmp_path):
    p = tmp_path / "empty.libsvm"
    p.write_text("\n")
    with pytest.raises(DataError, match="empty"):
        load_libsvm(p, "source")


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 6)),
              elements=st.floats(-1e6, 1e6, allow_subnormal=False)),
       st.integers(0, 2**31))
def test_libsvm_round_trip(tmp_path_factory, X, seed):
    labels = np.random.default_rng(seed).integers(0, 3, len(X))
    d = Dataset(X, labels, np.zeros(len(X)), [0, 1, 2])
    path = tmp_path_factory.mktemp("rt") / "d.libsvm"
    write_libsvm(d, path)
    back = load_libsvm(path, "source", dim=d.dim)
    np.testing.assert_allclose(back.X, d.X, atol=1e-12, rtol=0)
    np.testing.assert_array_equal(back.raw_labels(), d.raw_labels())


def test_csv_basic_and_encoding(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("9,1.0,2.0\n5,3.0,4.0\n9,5.0,6.0\n")
    d = load_csv(p, 0, "target")
    assert len(d) == 3 and d.dim == 2
    assert d.classes.tolist() == [5, 9]
    assert d.labels.tolist() == [1, 0, 1]
    np.testing.assert_array_equal(d.X[1], [3.0, 4.0])


def test_csv_header_flag(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("a,b,label\n1,2,0\n3,4,1\n")
    d = load_csv(p, 2, "source", header=True)
    assert d.X.tolist() == [[1, 2], [3, 4]]


def test_csv_errors(tmp_path):
    p = tmp_path / "ragged.csv"
    p.write_text("1,2,3\n4,5\n")
    with pytest.raises(DataError, match="row 2"):
        load_csv(p, 0, "source")
    p.write_text("1,2\n3,x\n")
    with pytest.raises(DataError, match="non-numeric"):
        load_csv(p, 0, "source")
    p.write_text("1,2\n3,4\n")
    with pytest.raises(DataError, match="label column"):
        load_csv(p, 5, "source")


def test_dataset_rejects_nonfinite():
    with pytest.raises(DataError):
        Dataset([[np.nan]], [0], [0])


def test_standardizer_two_points():
    d = Dataset([[0.0], [2.0]], [0, 1], [0, 0])
    sc = fit_standardizer(d)
    assert sc.mean.tolist() == [1.0] and sc.std.tolist() == [1.0]
    np.testing.assert_array_equal(apply_standardizer(sc, d).X, [[-1.0], [1.0]])


def test_standardizer_constant_column_maps_to_zero():
    d = Dataset([[0.1, 1.0], [0.1, 2.0], [0.1, 4.0]], [0, 1, 0], [0, 0, 1])
    z = apply_standardizer(fit_standardizer(d), d).X
    assert np.all(z[:, 0] == 0.0)


def test_standardizer_uses_train_statistics(rng):
    train = Dataset(rng.normal(size=(50, 3)), np.zeros(50), np.zeros(50))
    test = Dataset(rng.normal(5.0, 2.0, size=(20, 3)), np.zeros(20), np.ones(20))
    sc = fit_standardizer(train)
    np.testing.assert_allclose(apply_standardizer(sc, test).X, (test.X - sc.mean) / sc.std)
    with pytest.raises(DataError):
        fit_standardizer(train.subset(np.zeros(50, bool)))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 5)),
              elements=st.floats(-1e3, 1e3, allow_subnormal=False)))
def test_standardizer_properties(X):
    d = Dataset(X, np.zeros(len(X)), np.zeros(len(X)))
    sc = fit_standardizer(d)
    Z = apply_standardizer(sc, d).X
    varying = X.std(axis=0) > 1e-6 * (1 + np.abs(X).max())
    np.testing.assert_allclose(Z[:, varying].mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(Z[:, varying].std(axis=0), 1.0, atol=1e-8)
    back = invert_standardizer(sc, apply_standardizer(sc, d)).X
    np.testing.assert_allclose(back, X, atol=1e-10 * (1 + np.abs(X).max()), rtol=0)


def test_pca_line_geometry():
    t = np.linspace(-2, 3, 11)
    d = Dataset(np.column_stack([t, t]), np.zeros(11), np.zeros(11))
    pca = fit_pca(d, 1)
    np.testing.assert_allclose(pca.components[0], [1 / math.sqrt(2)] * 2, atol=1e-12)
    proj = apply_pca(pca, d).X
    total = ((d.X - d.X.mean(0)) ** 2).sum()
    assert abs((proj ** 2).sum() - total) <= 1e-8 * total


def test_pca_full_rank_reconstruction(rng):
    d = Dataset(rng.normal(size=(30, 4)), np.zeros(30), np.zeros(30))
    pca = fit_pca(d, 4)
    Xc = d.X - pca.mean
    np.testing.assert_allclose(apply_pca(pca, d).X @ pca.components, Xc, atol=1e-8)
    np.testing.assert_allclose(pca.components @ pca.components.T, np.eye(4), atol=1e-8)


def test_pca_matches_dense_eigensolver(rng):
    X = rng.normal(size=(20, 5))
    d = Dataset(X, np.zeros(20), np.zeros(20))
    pca = fit_pca(d, 3)
    proj = apply_pca(pca, d).X
    proj_cov = np.cov(proj, rowvar=False)
    top = np.sort(np.linalg.eigvalsh(np.cov(X, rowvar=False)))[::-1][:3]
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(proj_cov))[::-1], top, atol=1e-8)
    # sign convention
    for comp in pca.components:
        assert comp[np.argmax(np.abs(comp))] > 0


def test_pca_errors(rng):
    d = Dataset(rng.normal(size=(5, 3)), np.zeros(5), np.zeros(5))
    with pytest.raises(DataError):
        fit_pca(d, 4)
    with pytest.raises(DataError):
        fit_pca(d, 0)
    t = np.arange(6.0)
    line = Dataset(np.column_stack([t, 2 * t, -t]), np.zeros(6), np.zeros(6))
    with pytest.raises(DataError, match="achievable rank is 1"):
        fit_pca(line, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_pca_nonexpansive(seed, p):
    X = np.random.default_rng(seed).normal(size=(12, 4)) * [3, 1, 0.5, 2]
    d = Dataset(X, np.zeros(12), np.zeros(12))
    pca = fit_pca(d, p)
    Xc = X - pca.mean
    assert np.all(np.linalg.norm(pca.transform(X), axis=1) <= np.linalg.norm(Xc, axis=1) + 1e-10)


def _spec(**kw):
    base = dict(means=[[2.0, 0.0], [-1.0, 1.0]], covariances=[[1.0, 0.3], [0.3, 0.5]],
                n_source_per_class=1000, n_target_per_class=1000)
    base.update(kw)
    return SyntheticSpec(**base)


def test_synthetic_no_shift_same_distribution():
    d = make_shifted_gaussians(_spec(), seed=3)
    for c in range(2):
        s = d.X[(d.labels == c) & (d.domains == 0)]
        t = d.X[(d.labels == c) & (d.domains == 1)]
        sigma = np.sqrt(s.var(0) + t.var(0))
        assert np.all(np.abs(s.mean(0) - t.mean(0)) <= 4 * sigma / np.sqrt(1000))


def test_synthetic_determinism():
    a = make_shifted_gaussians(_spec(rotation_deg=10), seed=11)
    b = make_shifted_gaussians(_spec(rotation_deg=10), seed=11)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.labels, b.labels)
    c = make_shifted_gaussians(_spec(rotation_deg=10), seed=12)
    assert not np.array_equal(a.X, c.X)


def test_synthetic_rotated_mean_matches_analytic():
    spec = _spec(rotation_deg=30, translation=[0.5, -1.0])
    d = make_shifted_gaussians(spec, seed=5)
    th = math.radians(30)
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    cov = np.asarray(spec.covariances)
    for c, mu in enumerate(spec.means):
        t = d.X[(d.labels == c) & (d.domains == 1)]
        expected = R @ np.asarray(mu) + [0.5, -1.0]
        sd = np.sqrt(np.diag(R @ cov @ R.T))
        assert np.all(np.abs(t.mean(0) - expected) <= 4 * sd / np.sqrt(len(t)))


def test_synthetic_errors():
    with pytest.raises(DataError, match="positive definite"):
        make_shifted_gaussians(_spec(covariances=[[1.0, 2.0], [2.0, 1.0]]), 0)
    with pytest.raises(DataError, match="at least 2"):
        make_shifted_gaussians(SyntheticSpec(means=[[0.0, 0.0]]), 0)


def _ten_class_data():
    spec = SyntheticSpec(means=[[math.cos(k), math.sin(k)] for k in range(10)],
                         covariances=0.1, n_source_per_class=25, n_target_per_class=8)
    return make_shifted_gaussians(spec, 0)


def test_split_counts_follow_protocol():
    train, test = sample_split(_ten_class_data(), 20, 3, seed=0)
    assert train.n_source == 200 and train.n_target == 30
    assert test.n_source == 0 and test.n_target == 50
    for c in range(10):
        assert np.count_nonzero((train.labels == c) & (train.domains == 1)) == 3


def test_split_partition_and_determinism():
    data = _ten_class_data()
    train, test = sample_split(data, 20, 3, seed=4)
    rows = lambda d: {tuple(r) for r in d.X}  # noqa: E731
    target_rows = rows(data.domain("target"))
    assert rows(train) & rows(test) == set()
    assert rows(train.domain("target")) | rows(test) == target_rows
    again, _ = sample_split(data, 20, 3, seed=4)
    assert np.array_equal(train.X, again.X)
    other, _ = sample_split(data, 20, 3, seed=5)
    assert not np.array_equal(train.X, other.X)


def test_split_insufficient_class_is_named():
    with pytest.raises(DataError, match="class 0"):
        sample_split(_ten_class_data(), 20, 8, seed=0)
    with pytest.raises(DataError, match="source"):
        sample_split(_ten_class_data(), 26, 3, seed=0)
