"""Repeated-split experiments and sample-count sweeps.

Every random draw flows from ``base_seed``: split ``k`` uses seed
``base_seed + k`` and synthetic data uses ``data.seed`` (default
``base_seed``). Reports contain no wall-clock values, so identical configs
give byte-identical report JSON; per-split runtimes go to the CSV only.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import kernels
from .classifier import Boundary, Hyperparams, Mode, evaluate, train_multiclass
from .data import (
    Dataset,
    DataError,
    Domain,
    SyntheticSpec,
    align_classes,
    apply_pca,
    apply_standardizer,
    concat,
    fit_pca,
    fit_standardizer,
    load_dataset,
    make_shifted_gaussians,
    sample_split,
)
from .model_selection import HyperGrid, default_grid, loo_cv

METHODS = {"SVM_T": Mode.TARGET_ONLY, "SVM_S": Mode.SOURCE_ONLY, "SVM_ST": Mode.UNION,
           "CSVM": Mode.CSVM}
SPLIT_COLUMNS = ("split", "seed", "method", "accuracy", "lambda", "c_source", "c_target",
                 "runtime_s")
SWEEP_COLUMNS = ("axis", "count", "method", "mean", "stderr")
SWEEP_AXES = ("source_count", "target_count", "both")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    data: dict
    n_source_per_class: int | dict = 20
    n_target_per_class: int = 3
    n_splits: int = 100
    methods: tuple = ("SVM_T", "SVM_S", "SVM_ST", "CSVM")
    grid: HyperGrid = field(default_factory=default_grid)
    base_seed: int = 0
    standardize: bool = True
    pca_dim: int | None = None
    strategy: str = "ova"
    baseline_cost: float = 1.0
    tol: float = 1e-6
    max_epochs: int = 1000
    base_dir: str = "."

    def __post_init__(self):
        if self.n_splits < 1:
            raise ConfigError("n_splits must be >= 1")
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {sorted(METHODS)}")
        if self.n_target_per_class < 1:
            raise ConfigError("n_target_per_class must be >= 1")
        if self.strategy not in ("ova", "ovo"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if "synthetic" not in self.data and not {"source", "target"} <= set(self.data):
            raise ConfigError("data needs either 'synthetic' or both 'source' and 'target'")
        if self.pca_dim is not None and self.pca_dim < 1:
            raise ConfigError("pca_dim must be >= 1")
        try:
            Hyperparams(0.0, self.baseline_cost, self.baseline_cost, self.tol, self.max_epochs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def source_name(self) -> str:
        if "synthetic" in self.data:
            return "synthetic"
        return self.data["source"].get("name", Path(self.data["source"]["path"]).stem)

    def source_count(self) -> int:
        """Per-class source count, honoring a per-domain override mapping."""
        n = self.n_source_per_class
        if isinstance(n, dict):
            n = n.get(self.source_name, n.get("default"))
            if n is None:
                raise ConfigError(f"no n_source_per_class for {self.source_name!r} and no default")
        return int(n)

    def base_hyper(self) -> Hyperparams:
        return Hyperparams(tol=self.tol, max_epochs=self.max_epochs, seed=self.base_seed)

    def to_dict(self) -> dict:
        return {
            "data": self.data,
            "n_source_per_class": self.n_source_per_class,
            "n_target_per_class": self.n_target_per_class,
            "n_splits": self.n_splits,
            "methods": list(self.methods),
            "grid": self.grid.to_dict(),
            "base_seed": self.base_seed,
            "standardize": self.standardize,
            "pca_dim": self.pca_dim,
            "strategy": self.strategy,
            "baseline_cost": self.baseline_cost,
            "solver": {"tol": self.tol, "max_epochs": self.max_epochs},
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "ExperimentConfig":
        d = dict(d)
        known = {"data", "n_source_per_class", "n_target_per_class", "n_splits", "methods",
                 "grid", "base_seed", "standardize", "pca_dim", "strategy", "baseline_cost",
                 "solver", "sweep"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "data" not in d:
            raise ConfigError("config needs a 'data' section")
        d.pop("sweep", None)
        solver = d.pop("solver", {}) or {}
        try:
            grid = HyperGrid.from_dict(d.pop("grid")) if "grid" in d else default_grid()
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"invalid grid: {exc}") from None
        if "methods" in d:
            d["methods"] = tuple(d["methods"])
        return cls(grid=grid, tol=solver.get("tol", 1e-6),
                   max_epochs=solver.get("max_epochs", 1000), base_dir=str(base_dir), **d)


def load_config(path) -> tuple[ExperimentConfig, dict]:
    """Parse a JSON config; relative data paths resolve against its directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return ExperimentConfig.from_dict(raw, base_dir=path.parent), raw.get("sweep", {})


def load_data(config: ExperimentConfig) -> Dataset:
    """Both domains as one dataset on a shared label space."""
    if "synthetic" in config.data:
        try:
            spec = SyntheticSpec.from_dict(config.data["synthetic"])
        except TypeError as exc:
            raise ConfigError(f"invalid synthetic spec: {exc}") from None
        return make_shifted_gaussians(spec, config.data.get("seed", config.base_seed))
    parts = []
    for dom in ("source", "target"):
        entry = config.data[dom]
        path = Path(config.base_dir) / entry["path"]
        parts.append(load_dataset(path, Domain.parse(dom), entry.get("format"),
                                  entry.get("label_column", 0), entry.get("header", False)))
    src, tgt = parts
    if src.dim != tgt.dim:
        width = max(src.dim, tgt.dim)
        src, tgt = (d.with_features(np.pad(d.X, ((0, 0), (0, width - d.dim)))) for d in (src, tgt))
    return concat(*align_classes(src, tgt))


def preprocess(config: ExperimentConfig, train: Dataset, test: Dataset):
    """Fit scaling and PCA on the training union, apply to both sides."""
    if config.standardize:
        sc = fit_standardizer(train)
        train, test = apply_standardizer(sc, train), apply_standardizer(sc, test)
    if config.pca_dim is not None:
        pca = fit_pca(train, config.pca_dim)
        train, test = apply_pca(pca, train), apply_pca(pca, test)
    return train, test


def run_split(data: Dataset, config: ExperimentConfig, k: int,
              n_source: int | None = None, n_target: int | None = None) -> list[dict]:
    """One repetition: draw, preprocess, tune C-SVM, train every method, score."""
    n_source = config.source_count() if n_source is None else n_source
    n_target = config.n_target_per_class if n_target is None else n_target
    seed = config.base_seed + k
    train, test = sample_split(data, n_source, n_target, seed)
    train, test = preprocess(config, train, test)
    src, tgt = train.domain(Domain.SOURCE), train.domain(Domain.TARGET)
    base = replace(config.base_hyper(), seed=seed)
    rows = []
    for name in config.methods:
        t0 = time.perf_counter()
        mode = METHODS[name]
        if mode is Mode.CSVM:
            hyper = loo_cv(src, tgt, config.grid, config.strategy, base).best
            model = train_multiclass(src, tgt, hyper, config.strategy)
            acc = evaluate(model, test, Boundary.TARGET)
            lam, cs, ct = hyper.lam, hyper.c_source, hyper.c_target
        else:
            model = train_multiclass(src, tgt, base, config.strategy, mode,
                                     baseline_cost=config.baseline_cost)
            acc = evaluate(model, test)
            lam = 0.0
            cs = ct = config.baseline_cost
        rows.append({"split": k, "seed": seed, "method": name, "accuracy": acc,
                     "lambda": lam, "c_source": cs, "c_target": ct,
                     "runtime_s": time.perf_counter() - t0})
    return rows


def _run_splits(data, config, threads, progress, n_source=None, n_target=None):
    ks = range(config.n_splits)
    if threads is None:
        threads = os.cpu_count() or 1
    results = []
    if threads <= 1 or config.n_splits == 1:
        for k in ks:
            results.append(run_split(data, config, k, n_source, n_target))
            if progress:
                progress(k + 1, config.n_splits)
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_split, data, config, k, n_source, n_target) for k in ks]
            for i, fut in enumerate(futures):
                results.append(fut.result())
                if progress:
                    progress(i + 1, config.n_splits)
    return [row for rows in results for row in rows]


def summarize(accuracies) -> dict:
    """Mean, sample standard deviation and standard error of the mean."""
    acc = np.asarray(accuracies, dtype=float)
    n = len(acc)
    mean = math.fsum(acc) / n
    std = float(np.sqrt(math.fsum((acc - mean) ** 2) / (n - 1))) if n > 1 else 0.0
    return {"mean": mean, "std": std, "stderr": std / math.sqrt(n), "n_splits": n}


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list
    n_source: int
    n_target: int

    def method_summary(self, method: str) -> dict:
        rows = [r for r in self.rows if r["method"] == method]
        out = summarize([r["accuracy"] for r in rows])
        out["accuracies"] = [r["accuracy"] for r in rows]
        out["hyperparams"] = [{"lambda": r["lambda"], "c_source": r["c_source"],
                               "c_target": r["c_target"]} for r in rows]
        return out

    @property
    def methods(self) -> dict:
        return {m: self.method_summary(m) for m in self.config.methods}

    def to_dict(self) -> dict:
        return {
            "format": "csvm-experiment-report",
            "version": 1,
            "uncertainty": "stderr is the standard error of the mean over splits",
            "backend": kernels.BACKEND,
            "config": self.config.to_dict(),
            "n_source_per_class": self.n_source,
            "n_target_per_class": self.n_target,
            "split_seeds": [self.config.base_seed + k for k in range(self.config.n_splits)],
            "methods": self.methods,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def write(self, out_dir) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report = out_dir / "report.json"
        report.write_text(self.to_json())
        splits = out_dir / "splits.csv"
        write_split_rows(self.rows, splits)
        return report, splits


def write_split_rows(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SPLIT_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def run_experiment(config: ExperimentConfig, threads: int | None = 1,
                   progress: Callable[[int, int], None] | None = None,
                   data: Dataset | None = None, n_source: int | None = None,
                   n_target: int | None = None) -> ExperimentReport:
    data = load_data(config) if data is None else data
    n_source = config.source_count() if n_source is None else n_source
    n_target = config.n_target_per_class if n_target is None else n_target
    rows = _run_splits(data, config, threads, progress, n_source, n_target)
    return ExperimentReport(config, rows, n_source, n_target)


@dataclass
class SweepResult:
    rows: list  # dicts with SWEEP_COLUMNS plus n_source / n_target
    warnings: list

    def curve(self, method: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r["method"] == method]
        return (np.array([r["count"] for r in rows]), np.array([r["mean"] for r in rows]),
                np.array([r["stderr"] for r in rows]))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SWEEP_COLUMNS)
            for r in self.rows:
                w.writerow([r["axis"], r["count"], r["method"], repr(r["mean"]), repr(r["stderr"])])


def sweep_counts(config: ExperimentConfig, axis: str, value: int,
                 source_per_target: float | None = None) -> tuple[int, int]:
    """(n_source, n_target) per class for one sweep point."""
    if axis == "source_count":
        return int(value), config.n_target_per_class
    if axis == "target_count":
        return config.source_count(), int(value)
    if axis == "both":
        ratio = source_per_target
        if ratio is None:
            ratio = config.source_count() / config.n_target_per_class
        return int(round(value * ratio)), int(value)
    raise ConfigError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


def run_sweep(config: ExperimentConfig, axis: str, values, threads: int | None = 1,
              source_per_target: float | None = None,
              progress: Callable[[str], None] | None = None,
              data: Dataset | None = None) -> SweepResult:
    """Mean accuracy per method as one per-class count varies.

    On the ``both`` axis each value is the target count and the source count
    is ``round(value * source_per_target)``. Points that need more samples
    than a class has are skipped and reported in ``warnings``.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    data = load_data(config) if data is None else data
    rows, notes = [], []
    for value in values:
        n_s, n_t = sweep_counts(config, axis, value, source_per_target)
        try:
            sample_split(data, n_s, n_t, config.base_seed)
        except DataError as exc:
            notes.append(f"{axis}={value} skipped: {exc}")
            continue
        if progress:
            progress(f"{axis}={value} (n_source={n_s}, n_target={n_t})")
        report = run_experiment(config, threads, data=data, n_source=n_s, n_target=n_t)
        for method, summary in report.methods.items():
            rows.append({"axis": axis, "count": int(value), "method": method,
                         "mean": summary["mean"], "stderr": summary["stderr"],
                         "n_source": n_s, "n_target": n_t})
    return SweepResult(rows, notes)
