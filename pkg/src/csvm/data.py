"""Two-domain labeled datasets: loading, synthesis, scaling, PCA, splitting."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

STD_FLOOR = 1e-12


class DataError(ValueError):
    """Raised for malformed input files or invalid dataset operations."""


class Domain(enum.IntEnum):
    SOURCE = 0
    TARGET = 1

    @classmethod
    def parse(cls, value) -> "Domain":
        if isinstance(value, Domain):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise DataError(f"unknown domain {value!r}") from None
        return cls(int(value))


class LabeledSample(NamedTuple):
    features: np.ndarray
    label: int
    domain: Domain


def _clean_raw_labels(raw: np.ndarray) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size and np.all(raw == np.round(raw)):
        return raw.astype(np.int64)
    return raw


@dataclass(frozen=True, eq=False)
class Dataset:
    """Samples stored column-wise.

    ``labels`` are dense class ids into ``classes``, which holds the raw label
    value of each id (sorted ascending). ``domains`` holds ``Domain`` codes.
    """

    X: np.ndarray
    labels: np.ndarray
    domains: np.ndarray
    classes: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        domains = np.asarray(self.domains, dtype=np.int8).reshape(-1)
        if not (len(labels) == len(domains) == X.shape[0]):
            raise DataError("features, labels and domains differ in length")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain NaN or Inf")
        classes = self.classes
        if classes is None:
            k = int(labels.max()) + 1 if labels.size else 0
            classes = np.arange(k, dtype=np.int64)
        classes = _clean_raw_labels(classes)
        if labels.size and (labels.min() < 0 or labels.max() >= len(classes)):
            raise DataError("label ids outside [0, class_count)")
        if domains.size and not np.all((domains == 0) | (domains == 1)):
            raise DataError("domain codes must be 0 (source) or 1 (target)")
        for arr in (X, labels, domains, classes):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "domains", domains)
        object.__setattr__(self, "classes", classes)

    def __len__(self) -> int:
        return self.X.shape[0]

    def __iter__(self) -> Iterator[LabeledSample]:
        for x, y, d in zip(self.X, self.labels, self.domains):
            yield LabeledSample(x, int(y), Domain(int(d)))

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def class_count(self) -> int:
        return len(self.classes)

    @property
    def n_source(self) -> int:
        return int(np.count_nonzero(self.domains == Domain.SOURCE))

    @property
    def n_target(self) -> int:
        return int(np.count_nonzero(self.domains == Domain.TARGET))

    def subset(self, index) -> "Dataset":
        return Dataset(self.X[index], self.labels[index], self.domains[index], self.classes)

    def domain(self, dom) -> "Dataset":
        return self.subset(self.domains == Domain.parse(dom))

    def with_features(self, X) -> "Dataset":
        return Dataset(X, self.labels, self.domains, self.classes)

    def with_domain(self, dom) -> "Dataset":
        return Dataset(self.X, self.labels, np.full(len(self), int(Domain.parse(dom))), self.classes)

    def raw_labels(self) -> np.ndarray:
        return self.classes[self.labels]

    @classmethod
    def from_raw(cls, X, raw_labels, domain) -> "Dataset":
        """Build a dataset, re-encoding raw labels to dense ids in sorted order."""
        raw = _clean_raw_labels(raw_labels)
        classes, dense = np.unique(raw, return_inverse=True)
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(len(raw), -1)
        return cls(X, dense, np.full(len(raw), int(Domain.parse(domain))), classes)


def empty_like(data: Dataset) -> Dataset:
    """Zero-sample dataset with the same width and label space."""
    return Dataset(np.zeros((0, data.dim)), np.zeros(0), np.zeros(0), data.classes)


def align_classes(*datasets: Dataset) -> list[Dataset]:
    """Re-encode datasets onto the sorted union of their raw label values."""
    raws = [d.raw_labels() for d in datasets]
    classes = np.unique(np.concatenate([d.classes for d in datasets]))
    classes = _clean_raw_labels(classes)
    out = []
    for d, raw in zip(datasets, raws):
        dense = np.searchsorted(classes, raw)
        out.append(Dataset(d.X, dense, d.domains, classes))
    return out


def concat(*datasets: Dataset) -> Dataset:
    """Stack datasets that already share a label space and dimension."""
    first = datasets[0]
    for d in datasets[1:]:
        if d.dim != first.dim:
            raise DataError(f"dimension mismatch: {first.dim} vs {d.dim}")
        if not np.array_equal(d.classes, first.classes):
            raise DataError("datasets use different label spaces; align_classes first")
    return Dataset(
        np.concatenate([d.X for d in datasets]),
        np.concatenate([d.labels for d in datasets]),
        np.concatenate([d.domains for d in datasets]),
        first.classes,
    )


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def load_libsvm(path, domain, dim: int | None = None) -> Dataset:
    """Read ``label idx:val ...`` lines with 1-based feature indices.

    ``dim`` pads the feature space beyond the largest index seen (used when a
    model expects a fixed width). Blank lines and ``#`` comments are skipped.
    """
    rows, labels = [], []
    max_idx = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                label = float(parts[0])
                entries = {}
                for tok in parts[1:]:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    if idx < 1:
                        raise ValueError(f"feature index {idx} is not 1-based")
                    val = float(val_s)
                    if not math.isfinite(val):
                        raise ValueError(f"non-finite value {val_s!r}")
                    entries[idx] = val
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: cannot parse: {exc}") from None
            if entries:
                max_idx = max(max_idx, max(entries))
            rows.append(entries)
            labels.append(label)
    if not rows:
        raise DataError(f"{path}: empty file")
    width = max_idx if dim is None else dim
    if width < max_idx:
        raise DataError(f"{path}: feature index {max_idx} exceeds dim {dim}")
    X = np.zeros((len(rows), width))
    for r, entries in enumerate(rows):
        for idx, val in entries.items():
            X[r, idx - 1] = val
    return Dataset.from_raw(X, labels, domain)


def _fmt(v) -> str:
    return repr(int(v)) if float(v).is_integer() and abs(v) < 2**53 else repr(float(v))


def write_libsvm(data: Dataset, path) -> None:
    """Write features sparsely (zeros omitted), raw labels first on each line."""
    with open(path, "w") as fh:
        for x, raw in zip(data.X, data.raw_labels()):
            nz = np.flatnonzero(x)
            feats = " ".join(f"{j + 1}:{float(x[j])!r}" for j in nz)
            fh.write(f"{_fmt(raw)} {feats}".rstrip() + "\n")


def load_csv(path, label_column: int, domain, header: bool = False) -> Dataset:
    """Read a rectangular numeric CSV; every column but ``label_column`` is a feature."""
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    if header and rows:
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: empty file")
    width = len(rows[0])
    if not -width <= label_column < width:
        raise DataError(f"{path}: label column {label_column} missing (rows have {width} columns)")
    label_column %= width
    values = np.empty((len(rows), width))
    first = 2 if header else 1
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: row {r + first} has {len(row)} columns, expected {width}")
        try:
            values[r] = [float(cell) for cell in row]
        except ValueError:
            raise DataError(f"{path}: row {r + first} has a non-numeric cell") from None
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite value")
    X = np.delete(values, label_column, axis=1)
    return Dataset.from_raw(X, values[:, label_column], domain)


def load_dataset(path, domain, fmt: str | None = None, label_column: int = 0,
                 header: bool = False, dim: int | None = None) -> Dataset:
    """Dispatch on ``fmt`` or the file suffix (``.csv`` means CSV, else libsvm)."""
    fmt = fmt or ("csv" if str(path).lower().endswith(".csv") else "libsvm")
    if fmt == "csv":
        data = load_csv(path, label_column, domain, header=header)
        if dim is not None and data.dim != dim:
            raise DataError(f"{path}: expected {dim} features, found {data.dim}")
        return data
    if fmt == "libsvm":
        return load_libsvm(path, domain, dim=dim)
    raise DataError(f"unknown data format {fmt!r}")


# ---------------------------------------------------------------------------
# standardization
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalerParams:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


def fit_standardizer(train: Dataset) -> ScalerParams:
    if len(train) == 0:
        raise DataError("cannot fit a standardizer on an empty dataset")
    mean = train.X.mean(axis=0)
    std = np.maximum(train.X.std(axis=0), STD_FLOOR)
    return ScalerParams(mean, std)


def standardize_array(params: ScalerParams, X: np.ndarray) -> np.ndarray:
    Z = (X - params.mean) / params.std
    Z[:, params.std <= STD_FLOOR] = 0.0
    return Z


def apply_standardizer(params: ScalerParams, data: Dataset) -> Dataset:
    if data.dim != len(params.mean):
        raise DataError(f"scaler fitted on {len(params.mean)} features, data has {data.dim}")
    return data.with_features(standardize_array(params, data.X))


def invert_standardizer(params: ScalerParams, data: Dataset) -> Dataset:
    return data.with_features(data.X * params.std + params.mean)


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (p, d), orthonormal rows
    eigenvalues: np.ndarray

    @property
    def p(self) -> int:
        return self.components.shape[0]

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) @ self.components.T


def fit_pca(train: Dataset, p: int) -> PcaModel:
    """Top-``p`` principal axes from a dense symmetric eigendecomposition.

    Components are ordered by descending eigenvalue and signed so that the
    largest-magnitude entry of each one is positive.
    """
    n, d = train.X.shape
    if not 1 <= p <= min(d, n):
        raise DataError(f"PCA dimension {p} outside [1, min(d={d}, n={n})]")
    mean = train.X.mean(axis=0)
    Xc = train.X - mean
    cov = Xc.T @ Xc / max(n - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    top = evals[0] if evals.size else 0.0
    rank = int(np.count_nonzero(evals > max(n, d) * np.finfo(float).eps * max(top, 0.0)))
    if p > rank:
        raise DataError(f"PCA dimension {p} exceeds the data rank; achievable rank is {rank}")
    comps = evecs[:, :p].T.copy()
    flip = comps[np.arange(p), np.argmax(np.abs(comps), axis=1)] < 0
    comps[flip] *= -1.0
    return PcaModel(mean, comps, evals[:p].copy())


def apply_pca(model: PcaModel, data: Dataset) -> Dataset:
    if data.dim != len(model.mean):
        raise DataError(f"PCA fitted on {len(model.mean)} features, data has {data.dim}")
    return data.with_features(model.transform(data.X))


# ---------------------------------------------------------------------------
# synthetic two-domain data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian classes in the source; the target applies a rigid motion.

    The rotation acts in the plane of the first two coordinates; the
    translation is added afterwards.
    """

    means: Sequence[Sequence[float]]
    covariances: Sequence | float = 1.0
    rotation_deg: float = 0.0
    translation: Sequence[float] | None = None
    n_source_per_class: int = 100
    n_target_per_class: int = 100

    @property
    def class_count(self) -> int:
        return len(self.means)

    @property
    def dim(self) -> int:
        return len(self.means[0])

    def covariance_matrices(self) -> np.ndarray:
        k, d = self.class_count, self.dim
        cov = self.covariances
        if np.isscalar(cov):
            return np.broadcast_to(float(cov) * np.eye(d), (k, d, d)).copy()
        cov = np.asarray(cov, dtype=float)
        if cov.shape == (d, d):
            return np.broadcast_to(cov, (k, d, d)).copy()
        if cov.shape != (k, d, d):
            raise DataError(f"covariances must be scalar, (d,d) or (K,d,d); got {cov.shape}")
        return cov

    def rotation(self) -> np.ndarray:
        R = np.eye(self.dim)
        if self.dim >= 2:
            t = math.radians(self.rotation_deg)
            R[:2, :2] = [[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]]
        return R

    def shift(self) -> np.ndarray:
        if self.translation is None:
            return np.zeros(self.dim)
        t = np.asarray(self.translation, dtype=float)
        if t.shape != (self.dim,):
            raise DataError(f"translation must have length {self.dim}")
        return t

    def to_dict(self) -> dict:
        cov = self.covariances
        return {
            "means": np.asarray(self.means, dtype=float).tolist(),
            "covariances": cov if np.isscalar(cov) else np.asarray(cov, dtype=float).tolist(),
            "rotation_deg": self.rotation_deg,
            "translation": None if self.translation is None else list(map(float, self.translation)),
            "n_source_per_class": self.n_source_per_class,
            "n_target_per_class": self.n_target_per_class,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        allowed = {"means", "covariances", "rotation_deg", "translation",
                   "n_source_per_class", "n_target_per_class"}
        unknown = set(d) - allowed
        if unknown:
            raise DataError(f"unknown synthetic spec keys: {sorted(unknown)}")
        return cls(**d)


def make_shifted_gaussians(spec: SyntheticSpec, seed: int) -> Dataset:
    """Draw source then target samples class by class from ``default_rng(seed)``."""
    k = spec.class_count
    if k < 2:
        raise DataError(f"need at least 2 classes, got {k}")
    means = np.asarray(spec.means, dtype=float)
    if means.ndim != 2:
        raise DataError("means must be a K x d array")
    covs = spec.covariance_matrices()
    chols = []
    for c, cov in enumerate(covs):
        if not np.allclose(cov, cov.T):
            raise DataError(f"covariance of class {c} is not symmetric")
        try:
            chols.append(np.linalg.cholesky(cov))
        except np.linalg.LinAlgError:
            raise DataError(f"covariance of class {c} is not positive definite") from None
    R, t = spec.rotation(), spec.shift()
    rng = np.random.default_rng(seed)
    d = spec.dim
    X, y, dom = [], [], []
    for domain, count in ((Domain.SOURCE, spec.n_source_per_class),
                          (Domain.TARGET, spec.n_target_per_class)):
        for c in range(k):
            pts = means[c] + rng.standard_normal((count, d)) @ chols[c].T
            if domain is Domain.TARGET:
                pts = pts @ R.T + t
            X.append(pts)
            y.append(np.full(count, c))
            dom.append(np.full(count, int(domain)))
    return Dataset(np.concatenate(X), np.concatenate(y), np.concatenate(dom),
                   np.arange(k))


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------


def sample_split(data: Dataset, n_source_per_class: int, n_target_per_class: int,
                 seed: int) -> tuple[Dataset, Dataset]:
    """Per-class sampling without replacement.

    Training gets ``n_source_per_class`` source and ``n_target_per_class``
    target items of every class; the test set is every target item left over.
    """
    if n_source_per_class < 0 or n_target_per_class < 0:
        raise DataError("per-class counts must be non-negative")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in range(data.class_count):
        src = np.flatnonzero((data.labels == c) & (data.domains == Domain.SOURCE))
        tgt = np.flatnonzero((data.labels == c) & (data.domains == Domain.TARGET))
        if len(src) < n_source_per_class:
            raise DataError(f"class {data.classes[c].item()!r}: {len(src)} source samples, "
                            f"need {n_source_per_class}")
        if len(tgt) < n_target_per_class + 1:
            raise DataError(f"class {data.classes[c].item()!r}: {len(tgt)} target samples, "
                            f"need {n_target_per_class + 1} to leave a test item")
        train_idx.append(rng.choice(src, n_source_per_class, replace=False))
        picked = rng.permutation(len(tgt))
        train_idx.append(tgt[picked[:n_target_per_class]])
        test_idx.append(tgt[picked[n_target_per_class:]])
    train = np.sort(np.concatenate(train_idx))
    test = np.sort(np.concatenate(test_idx))
    return data.subset(train), data.subset(test)
