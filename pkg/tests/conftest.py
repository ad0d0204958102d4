import numpy as np
import pytest

from csvm.data import Dataset, SyntheticSpec, make_shifted_gaussians


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def three_class_spec():
    return SyntheticSpec(
        means=[[0.0, 3.0], [2.6, -1.5], [-2.6, -1.5]],
        covariances=0.3,
        rotation_deg=0.0,
        n_source_per_class=60,
        n_target_per_class=60,
    )


@pytest.fixture(scope="session")
def three_class_data(three_class_spec):
    return make_shifted_gaussians(three_class_spec, seed=7)


def random_binary(rng, n_s, n_t, d, separable=False):
    """Source/target arrays with +-1 labels containing both signs."""
    while True:
        X_s = rng.normal(size=(n_s, d))
        X_t = rng.normal(size=(n_t, d)) + 0.3
        if separable:
            w = rng.normal(size=d)
            y_s = np.where(X_s @ w + 0.1 >= 0, 1.0, -1.0)
            y_t = np.where(X_t @ w + 0.1 >= 0, 1.0, -1.0)
            X_s = X_s + 0.5 * y_s[:, None] * w / np.linalg.norm(w)
            X_t = X_t + 0.5 * y_t[:, None] * w / np.linalg.norm(w)
        else:
            y_s = np.where(rng.random(n_s) < 0.5, 1.0, -1.0)
            y_t = np.where(rng.random(n_t) < 0.5, 1.0, -1.0)
            X_s = X_s + 0.8 * y_s[:, None]
            X_t = X_t + 0.8 * y_t[:, None]
        y = np.concatenate([y_s, y_t])
        if (n_s == 0 or len(set(y_s)) == 2) and (n_t == 0 or len(set(y_t)) == 2) and len(set(y)) == 2:
            return X_s, y_s, X_t, y_t


def binary_datasets(X_s, y_s, X_t, y_t):
    """Wrap +-1 arrays as two-class Datasets (class 1 = positive)."""
    src = Dataset(X_s, (y_s > 0).astype(int), np.zeros(len(y_s)), [0, 1])
    tgt = Dataset(X_t, (y_t > 0).astype(int), np.ones(len(y_t)), [0, 1])
    return src, tgt
