"""Box-constrained dual QP ``min 1/2 a^T Q a - 1^T a, 0 <= a <= c``.

The coupled formulation keeps the bias inside the weight vector, so the dual
has no equality constraint and single-coordinate exact minimization applies.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .coupling import (
    LiftedProblem,
    boundaries_from_sums,
    build_gram,
    domain_sums,
    hinge_slacks,
)

DENSE_GRAM_LIMIT = 4096
DEFAULT_TOL = 1e-6
DEFAULT_MAX_EPOCHS = 1000


@dataclass(frozen=True, eq=False)
class BoxQp:
    """Either a dense Gram matrix or a coupled linear problem, plus bounds.

    With ``lifted`` set, Gram entries are never formed; the solver keeps the
    per-domain weighted sums instead.
    """

    upper_bounds: np.ndarray
    gram: np.ndarray | None = None
    lifted: LiftedProblem | None = None

    def __post_init__(self):
        c = np.ascontiguousarray(self.upper_bounds, dtype=np.float64)
        if not np.all(c > 0):
            raise ValueError("upper bounds must be > 0")
        object.__setattr__(self, "upper_bounds", c)
        if (self.gram is None) == (self.lifted is None):
            raise ValueError("give exactly one of gram= or lifted=")
        if self.gram is not None:
            Q = np.ascontiguousarray(self.gram, dtype=np.float64)
            if Q.shape != (len(c), len(c)):
                raise ValueError(f"gram shape {Q.shape} does not match {len(c)} bounds")
            if np.isnan(Q).any():
                raise ValueError("gram matrix contains NaN")
            object.__setattr__(self, "gram", Q)
        elif self.lifted.n != len(c):
            raise ValueError("lifted problem size does not match bounds")

    @property
    def n(self) -> int:
        return len(self.upper_bounds)

    @property
    def layout(self) -> str:
        return "dense" if self.gram is not None else "lifted"

    @classmethod
    def from_problem(cls, problem: LiftedProblem, layout: str = "auto") -> "BoxQp":
        """Choose the Gram handling for a coupled problem.

        ``auto`` materializes Q only when it is small and cheaper per update
        than the O(d) lifted step, i.e. ``n <= 4096`` and ``n <= 2(d+1)``.
        """
        if layout == "auto":
            small = problem.n <= DENSE_GRAM_LIMIT
            layout = "dense" if small and problem.n <= 2 * (problem.dim + 1) else "lifted"
        if layout == "dense":
            return cls(problem.costs, gram=build_gram(problem))
        if layout == "lifted":
            return cls(problem.costs, lifted=problem)
        raise ValueError(f"unknown layout {layout!r}")

    def gradient(self, alphas) -> np.ndarray:
        alphas = np.asarray(alphas, dtype=float)
        if self.gram is not None:
            return self.gram @ alphas - 1.0
        p = self.lifted
        pair = boundaries_from_sums(domain_sums(p, alphas), p.coeff)
        W = pair.stacked()
        return p.y * np.einsum("ij,ij->i", p.augmented(), W[p.domains]) - 1.0

    def dual_objective(self, alphas) -> float:
        """``1^T a - 1/2 a^T Q a`` (the quantity the dual maximizes)."""
        alphas = np.asarray(alphas, dtype=float)
        if self.gram is not None:
            return float(alphas.sum() - 0.5 * alphas @ self.gram @ alphas)
        p = self.lifted
        v = domain_sums(p, alphas)
        a, b = p.coeff.a, p.coeff.b
        quad = a * (v[0] @ v[0] + v[1] @ v[1]) + 2.0 * b * (v[0] @ v[1])
        return float(alphas.sum() - 0.5 * quad)


@dataclass(frozen=True, eq=False)
class QpSolution:
    alphas: np.ndarray
    dual_objective: float
    iterations: int
    max_kkt_violation: float
    converged: bool
    history: np.ndarray = field(repr=False)
    layout: str = "dense"
    backend: str = kernels.BACKEND


def solve_box_qp(problem: BoxQp, tol: float = DEFAULT_TOL,
                 max_epochs: int = DEFAULT_MAX_EPOCHS, seed: int = 0) -> QpSolution:
    """Dual coordinate descent with a seeded random sweep order per epoch.

    Stops once the largest projected-gradient entry is at most ``tol``.
    ``history[k]`` is the dual objective after ``k`` epochs.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    if max_epochs < 1:
        raise ValueError("max_epochs must be >= 1")
    n = problem.n
    c = problem.upper_bounds
    alpha = np.zeros(n)
    g = np.full(n, -1.0)
    history = np.full(max_epochs + 1, np.nan)
    state = kernels.seed_state(seed)
    if problem.gram is not None:
        epochs, viol, conv = kernels.cd_dense(problem.gram, c, alpha, g, float(tol),
                                              int(max_epochs), state, history)
    else:
        p = problem.lifted
        xa = p.augmented()
        qdiag = p.coeff.a * np.einsum("ij,ij->i", xa, xa)
        v = np.zeros((2, xa.shape[1]))
        epochs, viol, conv = kernels.cd_lifted(xa, p.y, p.domains, c, p.coeff.a, p.coeff.b,
                                               alpha, v, qdiag, g, float(tol),
                                               int(max_epochs), state, history)
    # the kernels clip exactly; this guards against -0.0 and keeps the box exact
    np.clip(alpha, 0.0, c, out=alpha)
    return QpSolution(
        alphas=alpha,
        dual_objective=problem.dual_objective(alpha),
        iterations=int(epochs),
        max_kkt_violation=float(viol),
        converged=bool(conv),
        history=history[: int(epochs) + 1].copy(),
        layout=problem.layout,
    )


def kkt_violation(problem: BoxQp, alphas) -> float:
    """Largest projected-gradient entry; zero exactly at a box-QP optimum."""
    alphas = np.asarray(alphas, dtype=float)
    return kernels.box_violation_np(alphas, problem.gradient(alphas), problem.upper_bounds)


def primal_objective(problem: LiftedProblem, pair) -> float:
    """Coupled primal: coupling term, both regularizers, cost-weighted hinge slacks."""
    W = pair.stacked()
    diff = W[0] - W[1]
    reg = 0.5 * problem.lam * (diff @ diff) + 0.5 * (W[0] @ W[0]) + 0.5 * (W[1] @ W[1])
    return float(reg + problem.costs @ hinge_slacks(problem, pair))


def duality_gap(problem: LiftedProblem, alphas) -> tuple[float, float, float]:
    """``(primal, dual, primal - dual)`` at the boundaries recovered from ``alphas``."""
    alphas = np.asarray(alphas, dtype=float)
    pair = boundaries_from_sums(domain_sums(problem, alphas), problem.coeff)
    primal = primal_objective(problem, pair)
    dual = BoxQp(problem.costs, lifted=problem).dual_objective(alphas)
    return primal, dual, primal - dual
