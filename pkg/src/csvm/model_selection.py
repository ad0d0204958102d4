"""Leave-one-out selection of (lambda, C_s, C_t) over the target training set."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import classifier
from .classifier import Hyperparams
from .data import Dataset


@dataclass(frozen=True)
class HyperGrid:
    lambdas: tuple
    c_sources: tuple
    c_targets: tuple

    def __post_init__(self):
        for name in ("lambdas", "c_sources", "c_targets"):
            vals = tuple(sorted(float(v) for v in getattr(self, name)))
            if not vals:
                raise ValueError(f"grid axis {name} is empty")
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"grid axis {name} has non-finite values")
            low_ok = vals[0] >= 0 if name == "lambdas" else vals[0] > 0
            if not low_ok:
                raise ValueError(f"grid axis {name} has out-of-range values: {vals}")
            object.__setattr__(self, name, vals)

    @property
    def size(self) -> int:
        return len(self.lambdas) * len(self.c_sources) * len(self.c_targets)

    def points(self):
        """(lambda, c_source, c_target) triples; lambda varies slowest."""
        return itertools.product(self.lambdas, self.c_sources, self.c_targets)

    def to_dict(self) -> dict:
        return {"lambdas": list(self.lambdas), "c_sources": list(self.c_sources),
                "c_targets": list(self.c_targets)}

    @classmethod
    def from_dict(cls, d: dict) -> "HyperGrid":
        return cls(tuple(d["lambdas"]), tuple(d["c_sources"]), tuple(d["c_targets"]))


def default_grid() -> HyperGrid:
    costs = (0.01, 0.1, 1.0, 10.0, 100.0)
    return HyperGrid((0.0, 0.01, 0.1, 1.0, 10.0, 100.0), costs, costs)


@dataclass(frozen=True)
class CvResult:
    best: Hyperparams
    table: tuple  # rows (lambda, c_source, c_target, loo_accuracy) in grid order
    fold_count: int

    @property
    def best_accuracy(self) -> float:
        return max(row[3] for row in self.table)

    def to_dict(self) -> dict:
        return {
            "best": self.best.to_dict(),
            "best_accuracy": self.best_accuracy,
            "fold_count": self.fold_count,
            "table": [dict(zip(TABLE_COLUMNS, row)) for row in self.table],
        }


TABLE_COLUMNS = ("lambda", "c_source", "c_target", "loo_accuracy")


def write_cv_table(result: CvResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_COLUMNS)
        for row in result.table:
            w.writerow([repr(float(v)) for v in row])


def loo_cv(source_train: Dataset, target_train: Dataset, grid: HyperGrid,
           strategy="ova", base: Hyperparams | None = None,
           progress: Callable[[int, int], None] | None = None) -> CvResult:
    """Hold out each target training sample in turn; the source is always kept whole.

    Ties on accuracy go to the smaller lambda, then smaller C_t, then smaller C_s.
    """
    n_t = len(target_train)
    if n_t < 2:
        raise ValueError(f"leave-one-out needs at least 2 target samples, got {n_t}")
    base = base or Hyperparams()
    keep = np.ones(n_t, bool)
    table = []
    for gi, (lam, cs, ct) in enumerate(grid.points()):
        hyper = replace(base, lam=lam, c_source=cs, c_target=ct)
        hits = 0
        for i in range(n_t):
            keep[i] = False
            fold = target_train.subset(keep)
            keep[i] = True
            model = classifier.train_multiclass(source_train, fold, hyper, strategy)
            pred = model.predict_raw(target_train.X[i], classifier.Boundary.TARGET)[0]
            hits += int(pred == target_train.raw_labels()[i])
        table.append((lam, cs, ct, hits / n_t))
        if progress is not None:
            progress(gi + 1, grid.size)
    order = sorted(range(len(table)),
                   key=lambda r: (-table[r][3], table[r][0], table[r][2], table[r][1], r))
    lam, cs, ct, _ = table[order[0]]
    best = replace(base, lam=lam, c_source=cs, c_target=ct)
    return CvResult(best, tuple(table), n_t)
