"""Training and prediction: binary coupled SVMs, baselines, multiclass."""
from __future__ import annotations

import enum
import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .coupling import BoundaryPair, LiftedProblem, recover_boundaries
from .data import Dataset, DataError, Domain, PcaModel, ScalerParams, align_classes
from .qp import DEFAULT_MAX_EPOCHS, DEFAULT_TOL, BoxQp, primal_objective, solve_box_qp

log = logging.getLogger(__name__)

MODEL_FORMAT = "csvm-model"
MODEL_VERSION = 1


class TrainingError(ValueError):
    pass


class Boundary(str, enum.Enum):
    SOURCE = "source"
    TARGET = "target"

    @property
    def domain(self) -> Domain:
        return Domain.SOURCE if self is Boundary.SOURCE else Domain.TARGET

    @classmethod
    def parse(cls, value) -> "Boundary":
        if isinstance(value, Boundary):
            return value
        if isinstance(value, Domain):
            return cls.SOURCE if value == Domain.SOURCE else cls.TARGET
        return cls(str(value).lower())


class Mode(str, enum.Enum):
    """Training recipe: the coupled model or one of the three baselines."""

    CSVM = "csvm"
    TARGET_ONLY = "target_only"
    SOURCE_ONLY = "source_only"
    UNION = "union"


class Strategy(str, enum.Enum):
    OVA = "ova"
    OVO = "ovo"


@dataclass(frozen=True)
class Hyperparams:
    lam: float = 1.0
    c_source: float = 1.0
    c_target: float = 1.0
    tol: float = DEFAULT_TOL
    max_epochs: int = DEFAULT_MAX_EPOCHS
    seed: int = 0

    def __post_init__(self):
        for name in ("lam", "c_source", "c_target", "tol"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite, got {val}")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        for name in ("c_source", "c_target", "tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        return cls(**d)


@dataclass(frozen=True)
class Diagnostics:
    primal: float
    dual: float
    duality_gap: float
    kkt_violation: float
    coupling_distance: float
    n_support: int
    n_support_source: int
    n_support_target: int
    iterations: int
    converged: bool
    layout: str
    backend: str


@dataclass(frozen=True, eq=False)
class CoupledBinaryModel:
    boundaries: BoundaryPair
    hyper: Hyperparams
    diagnostics: Diagnostics | None = None
    alphas: np.ndarray | None = None
    mode: Mode = Mode.CSVM
    default_boundary: Boundary = Boundary.TARGET

    @property
    def dim(self) -> int:
        return len(self.boundaries.w_s)

    def decision(self, X, use=None) -> np.ndarray:
        w, b = self.boundaries.select(Boundary.parse(use or self.default_boundary).domain)
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise DataError(f"model expects {self.dim} features, got {X.shape[-1]}")
        return X @ w + b


def sign_label(score):
    """sign with the tie rule sign(0) = +1."""
    return np.where(np.asarray(score) >= 0, 1, -1)


def predict(model: CoupledBinaryModel, x, use=Boundary.TARGET) -> tuple[float, int]:
    score = float(model.decision(np.asarray(x, dtype=float).reshape(-1), use))
    return score, int(sign_label(score))


def _solve(problem: LiftedProblem, hyper: Hyperparams, layout: str):
    qp = BoxQp.from_problem(problem, layout)
    sol = solve_box_qp(qp, tol=hyper.tol, max_epochs=hyper.max_epochs, seed=hyper.seed)
    if not sol.converged:
        log.debug("dual coordinate descent stopped after %d epochs, KKT violation %.3g",
                    sol.iterations, sol.max_kkt_violation)
    pair = recover_boundaries(problem, sol.alphas)
    primal = primal_objective(problem, pair)
    dual = sol.dual_objective
    gap = primal - dual
    sv = sol.alphas > 0
    diag = Diagnostics(
        primal=primal,
        dual=dual,
        duality_gap=gap,
        kkt_violation=sol.max_kkt_violation,
        coupling_distance=pair.coupling_distance,
        n_support=int(sv.sum()),
        n_support_source=int((sv & (problem.domains == Domain.SOURCE)).sum()),
        n_support_target=int((sv & (problem.domains == Domain.TARGET)).sum()),
        iterations=sol.iterations,
        converged=sol.converged,
        layout=sol.layout,
        backend=sol.backend,
    )
    return pair, sol.alphas, diag


def fit_binary_arrays(X_s, y_s, X_t, y_t, hyper: Hyperparams, layout: str = "auto"):
    """Solve one coupled problem given ±1 labels; returns (pair, alphas, diagnostics)."""
    y_all = np.concatenate([np.asarray(y_s, float), np.asarray(y_t, float)])
    if y_all.size == 0:
        raise TrainingError("no training samples")
    if np.all(y_all > 0) or np.all(y_all < 0):
        raise TrainingError("single-class problem: all training labels have the same sign")
    problem = LiftedProblem.from_domains(X_s, y_s, X_t, y_t, hyper.c_source,
                                         hyper.c_target, hyper.lam)
    return _solve(problem, hyper, layout)


def _binary_labels(labels: np.ndarray, positive) -> np.ndarray:
    return np.where(labels == positive, 1.0, -1.0)


def train_coupled_binary(source: Dataset, target: Dataset, positive_class: int,
                         hyper: Hyperparams, allow_empty_target: bool = False,
                         layout: str = "auto") -> CoupledBinaryModel:
    """Jointly fit source and target boundaries for ``positive_class`` vs rest."""
    if len(source) == 0:
        raise TrainingError("source training set is empty")
    if len(target) == 0 and not allow_empty_target:
        raise TrainingError("target training set is empty (pass allow_empty_target=True)")
    if len(target) and source.dim != target.dim:
        raise DataError(f"dimension mismatch: source {source.dim}, target {target.dim}")
    pair, alphas, diag = fit_binary_arrays(
        source.X, _binary_labels(source.labels, positive_class),
        target.X, _binary_labels(target.labels, positive_class), hyper, layout)
    return CoupledBinaryModel(pair, hyper, diag, alphas, Mode.CSVM, Boundary.TARGET)


def train_baseline(mode, source: Dataset, target: Dataset, cost: float,
                   positive_class: int = 1, tol: float = DEFAULT_TOL,
                   max_epochs: int = DEFAULT_MAX_EPOCHS, seed: int = 0,
                   layout: str = "auto") -> CoupledBinaryModel:
    """Plain linear SVMs expressed through the coupled machinery.

    ``target_only`` / ``source_only`` drop the other domain and set the
    coupling to zero. ``union`` pools both domains into one single-domain
    problem with cost ``cost``; both boundary slots then hold the pooled
    boundary.
    """
    mode = Mode(mode)
    if mode is Mode.CSVM:
        raise ValueError("use train_coupled_binary for the coupled model")
    hyper = Hyperparams(0.0, cost, cost, tol, max_epochs, seed)

    def pos(d: Dataset) -> np.ndarray:
        return _binary_labels(d.labels, positive_class)

    empty = np.zeros((0, source.dim if len(source) else target.dim))
    if mode is Mode.TARGET_ONLY:
        if len(target) == 0:
            raise TrainingError("target training set is empty")
        pair, alphas, diag = fit_binary_arrays(empty, [], target.X, pos(target), hyper, layout)
        return CoupledBinaryModel(pair, hyper, diag, alphas, mode, Boundary.TARGET)
    if mode is Mode.SOURCE_ONLY:
        if len(source) == 0:
            raise TrainingError("source training set is empty")
        pair, alphas, diag = fit_binary_arrays(source.X, pos(source), empty, [], hyper, layout)
        return CoupledBinaryModel(pair, hyper, diag, alphas, mode, Boundary.SOURCE)
    pooled_X = np.concatenate([source.X.reshape(-1, empty.shape[1]), target.X.reshape(-1, empty.shape[1])])
    pooled_y = np.concatenate([pos(source), pos(target)])
    if len(pooled_y) == 0:
        raise TrainingError("no training samples")
    pair, alphas, diag = fit_binary_arrays(pooled_X, pooled_y, empty, [], hyper, layout)
    pooled = BoundaryPair(pair.w_s, pair.b_s, pair.w_s.copy(), pair.b_s)
    return CoupledBinaryModel(pooled, hyper, diag, alphas, mode, Boundary.TARGET)


# ---------------------------------------------------------------------------
# multiclass
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MulticlassModel:
    strategy: Strategy
    binaries: dict  # OVA: (k,) -> model; OVO: (i, j) with i < j -> model
    classes: np.ndarray  # raw label of each dense id
    hyper: Hyperparams
    mode: Mode = Mode.CSVM
    warnings: tuple = ()
    scaler: ScalerParams | None = None
    pca: PcaModel | None = None
    _stack: dict = field(default_factory=dict, repr=False)

    @property
    def class_count(self) -> int:
        return len(self.classes)

    @property
    def dim(self) -> int:
        if self.scaler is not None:
            return len(self.scaler.mean)
        if self.pca is not None:
            return len(self.pca.mean)
        return next(iter(self.binaries.values())).dim

    @property
    def default_boundary(self) -> Boundary:
        return next(iter(self.binaries.values())).default_boundary

    def keys(self) -> list:
        return sorted(self.binaries)

    def _weights(self, use: Boundary):
        if use not in self._stack:
            pairs = [self.binaries[k].boundaries.select(use.domain) for k in self.keys()]
            W = np.vstack([w for w, _ in pairs])
            b = np.array([b for _, b in pairs])
            self._stack[use] = (W, b)
        return self._stack[use]

    def preprocess(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.dim:
            raise DataError(f"model expects {self.dim} features, got {X.shape[1]}")
        if self.scaler is not None:
            from .data import standardize_array

            X = standardize_array(self.scaler, X)
        if self.pca is not None:
            X = self.pca.transform(X)
        return X

    def decision_function(self, X, use=None) -> np.ndarray:
        """Per-binary scores, columns ordered like ``keys()``."""
        use = Boundary.parse(use or self.default_boundary)
        W, b = self._weights(use)
        return self.preprocess(X) @ W.T + b

    def predict(self, X, use=None) -> np.ndarray:
        """Dense class ids."""
        scores = self.decision_function(X, use)
        if self.strategy is Strategy.OVA:
            return decode_ova(scores)
        return decode_ovo(scores, self.keys(), self.class_count)

    def predict_raw(self, X, use=None) -> np.ndarray:
        return self.classes[self.predict(X, use)]


def decode_ova(scores: np.ndarray) -> np.ndarray:
    """Argmax; np.argmax already resolves ties to the lowest class id."""
    return np.argmax(scores, axis=1)


def decode_ovo(scores: np.ndarray, pairs, k: int) -> np.ndarray:
    """Majority vote; ties go to the larger summed margin, then the lowest id."""
    n = scores.shape[0]
    votes = np.zeros((n, k))
    margin = np.zeros((n, k))
    for col, (i, j) in enumerate(pairs):
        s = scores[:, col]
        win_i = s >= 0
        votes[:, i] += win_i
        votes[:, j] += ~win_i
        margin[:, i] += s
        margin[:, j] -= s
    best = votes == votes.max(axis=1, keepdims=True)
    margin = np.where(best, margin, -np.inf)
    return np.argmax(margin, axis=1)


def _present(d: Dataset, k: int) -> np.ndarray:
    return np.bincount(d.labels, minlength=k) > 0


def train_multiclass(source: Dataset, target: Dataset, hyper: Hyperparams,
                     strategy="ova", mode="csvm", baseline_cost: float | None = None,
                     layout: str = "auto") -> MulticlassModel:
    """One-vs-all or one-vs-one reduction over the shared label space.

    For baseline modes the cost is ``baseline_cost`` (defaults to
    ``hyper.c_target``) and ``hyper.lam`` is ignored.
    """
    strategy, mode = Strategy(strategy), Mode(mode)
    if len(source) and len(target) and not np.array_equal(source.classes, target.classes):
        source, target = align_classes(source, target)
    ref = source if len(source) else target
    k = ref.class_count
    if k < 2:
        raise TrainingError(f"need at least 2 classes, got {k}")
    pool = {Mode.TARGET_ONLY: [target], Mode.SOURCE_ONLY: [source]}.get(mode, [source, target])
    present = np.zeros(k, bool)
    for d in pool:
        present |= _present(d, k)
    if mode is Mode.CSVM and not _present(source, k).all():
        missing = ref.classes[~_present(source, k)].tolist()
        raise TrainingError(f"classes {missing} absent from the source training data")
    if not present.all():
        missing = ref.classes[~present].tolist()
        raise TrainingError(f"classes {missing} have no training samples")
    notes = []
    if mode is Mode.CSVM and len(target):
        for c in np.flatnonzero(~_present(target, k)):
            notes.append(f"class {ref.classes[c].item()!r} absent from target training data; "
                         "its target boundary is anchored by the source only")
    cost = hyper.c_target if baseline_cost is None else baseline_cost

    def fit(s: Dataset, t: Dataset, positive: int) -> CoupledBinaryModel:
        if mode is Mode.CSVM:
            return train_coupled_binary(s, t, positive, hyper, allow_empty_target=True,
                                        layout=layout)
        return train_baseline(mode, s, t, cost, positive, hyper.tol, hyper.max_epochs,
                              hyper.seed, layout)

    binaries = {}
    if strategy is Strategy.OVA:
        for c in range(k):
            binaries[(c,)] = fit(source, target, c)
    else:
        for i, j in itertools.combinations(range(k), 2):
            s = source.subset((source.labels == i) | (source.labels == j))
            t = target.subset((target.labels == i) | (target.labels == j))
            binaries[(i, j)] = fit(s, t, i)
    for note in notes:
        log.info(note)
    return MulticlassModel(strategy, binaries, ref.classes, hyper, mode, tuple(notes))


def evaluate(model: MulticlassModel, test: Dataset, use=None) -> float:
    """Fraction of test samples whose decoded raw label matches."""
    if len(test) == 0:
        raise DataError("cannot evaluate on an empty test set")
    pred = model.predict_raw(test.X, use)
    return float(np.mean(pred == test.raw_labels()))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _raw_list(classes: np.ndarray) -> list:
    return [int(c) if classes.dtype.kind == "i" else float(c) for c in classes]


def model_to_dict(model: MulticlassModel, include_alphas: bool = False) -> dict:
    binaries = []
    for key in model.keys():
        m = model.binaries[key]
        entry = {
            "key": list(key),
            "w_s": m.boundaries.w_s.tolist(),
            "b_s": m.boundaries.b_s,
            "w_t": m.boundaries.w_t.tolist(),
            "b_t": m.boundaries.b_t,
            "default_boundary": m.default_boundary.value,
            "diagnostics": asdict(m.diagnostics) if m.diagnostics else None,
        }
        if include_alphas and m.alphas is not None:
            entry["alphas"] = m.alphas.tolist()
        binaries.append(entry)
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "strategy": model.strategy.value,
        "mode": model.mode.value,
        "hyperparams": model.hyper.to_dict(),
        "classes": _raw_list(model.classes),
        "warnings": list(model.warnings),
        "solver": {"algorithm": "dual coordinate descent", "backend": kernels.BACKEND},
        "preprocessing": {
            "scaler": model.scaler.to_dict() if model.scaler else None,
            "pca": None if model.pca is None else {
                "mean": model.pca.mean.tolist(),
                "components": model.pca.components.tolist(),
                "eigenvalues": model.pca.eigenvalues.tolist(),
            },
        },
        "binaries": binaries,
    }
    return doc


def model_from_dict(doc: dict) -> MulticlassModel:
    if doc.get("format") != MODEL_FORMAT:
        raise DataError("not a csvm model document")
    if doc.get("version") != MODEL_VERSION:
        raise DataError(f"unsupported model version {doc.get('version')}")
    hyper = Hyperparams.from_dict(doc["hyperparams"])
    mode = Mode(doc["mode"])
    binaries = {}
    for entry in doc["binaries"]:
        pair = BoundaryPair(np.asarray(entry["w_s"], float), float(entry["b_s"]),
                            np.asarray(entry["w_t"], float), float(entry["b_t"]))
        diag = Diagnostics(**entry["diagnostics"]) if entry.get("diagnostics") else None
        alphas = np.asarray(entry["alphas"], float) if "alphas" in entry else None
        binaries[tuple(entry["key"])] = CoupledBinaryModel(
            pair, hyper, diag, alphas, mode, Boundary(entry["default_boundary"]))
    pre = doc.get("preprocessing") or {}
    scaler = ScalerParams.from_dict(pre["scaler"]) if pre.get("scaler") else None
    pca = None
    if pre.get("pca"):
        p = pre["pca"]
        pca = PcaModel(np.asarray(p["mean"], float), np.asarray(p["components"], float),
                       np.asarray(p["eigenvalues"], float))
    classes = np.asarray(doc["classes"])
    return MulticlassModel(Strategy(doc["strategy"]), binaries, classes, hyper, mode,
                           tuple(doc.get("warnings", ())), scaler, pca)


def save_model(model: MulticlassModel, path, include_alphas: bool = False) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, include_alphas), indent=2) + "\n")


def load_model(path) -> MulticlassModel:
    return model_from_dict(json.loads(Path(path).read_text()))


def with_preprocessing(model: MulticlassModel, scaler=None, pca=None) -> MulticlassModel:
    return replace(model, scaler=scaler, pca=pca, _stack={})
