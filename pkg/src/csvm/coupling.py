"""Algebra of the coupled source/target formulation.

Each sample is conceptually lifted to ``2(d+1)`` coordinates: its augmented
features ``[x; 1]`` sit in its own domain's block, zeros in the other. With
the coupling matrix ``D = (I + lam * Ist^T Ist)^-1`` the dual Gram entries are
``y_i y_j [x_i;1]^T D [x_j;1]`` restricted to the blocks. ``D`` has the block
form ``[[a I, b I], [b I, a I]]``, so the fast path only needs the scalars
``a`` and ``b``. The dense path below builds every matrix explicitly and is
kept as a test oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Domain

DENSE_DIM_LIMIT = 512


@dataclass(frozen=True)
class CouplingCoefficients:
    lam: float
    a: float  # same-domain entry of D
    b: float  # cross-domain entry of D


def coupling_coefficients(lam: float) -> CouplingCoefficients:
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0:
        raise ValueError(f"coupling weight must be finite and >= 0, got {lam}")
    denom = 1.0 + 2.0 * lam
    return CouplingCoefficients(lam, (1.0 + lam) / denom, lam / denom)


def coupled_inner_product(x_i, x_j, dom_i, dom_j, coeff: CouplingCoefficients) -> float:
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    if x_i.shape != x_j.shape:
        raise ValueError(f"length mismatch: {x_i.shape} vs {x_j.shape}")
    s = coeff.a if Domain.parse(dom_i) == Domain.parse(dom_j) else coeff.b
    return s * (float(x_i @ x_j) + 1.0)


def _as_rows(X, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        return X
    return X.reshape(n, -1) if n else X.reshape(0, 0)


@dataclass(frozen=True, eq=False)
class LiftedProblem:
    """Binary coupled problem in raw coordinates.

    ``X`` holds raw features (n x d), ``y`` entries are +1/-1, ``domains`` are
    ``Domain`` codes and ``costs`` the per-sample box bounds (C_s for source
    rows, C_t for target rows).
    """

    X: np.ndarray
    y: np.ndarray
    domains: np.ndarray
    costs: np.ndarray
    lam: float

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        dom = np.ascontiguousarray(self.domains, dtype=np.int64)
        costs = np.ascontiguousarray(self.costs, dtype=np.float64)
        n = X.shape[0]
        if X.ndim != 2 or not (len(y) == len(dom) == len(costs) == n):
            raise ValueError("X, y, domains and costs must agree in length")
        if not np.all(np.abs(y) == 1.0):
            raise ValueError("binary labels must be +1 or -1")
        if not np.all(costs > 0):
            raise ValueError("per-sample costs must be > 0")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "domains", dom)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "coeff", coupling_coefficients(self.lam))

    @classmethod
    def from_domains(cls, X_s, y_s, X_t, y_t, c_source, c_target, lam) -> "LiftedProblem":
        X_s, X_t = _as_rows(X_s, len(y_s)), _as_rows(X_t, len(y_t))
        if X_s.shape[1] != X_t.shape[1]:
            if len(y_s) and len(y_t):
                raise ValueError(f"dimension mismatch: {X_s.shape[1]} vs {X_t.shape[1]}")
            X_s = X_s.reshape(-1, X_t.shape[1]) if not len(y_s) else X_s
            X_t = X_t.reshape(-1, X_s.shape[1]) if not len(y_t) else X_t
        X = np.concatenate([X_s, X_t])
        y = np.concatenate([y_s, y_t])
        dom = np.concatenate([np.zeros(len(y_s), int), np.ones(len(y_t), int)])
        costs = np.where(dom == Domain.SOURCE, float(c_source), float(c_target))
        return cls(X, y, dom, costs, lam)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def augmented(self) -> np.ndarray:
        """Rows ``[x_i, 1]`` (bias folded into the weight vector)."""
        return np.hstack([self.X, np.ones((self.n, 1))])


@dataclass(frozen=True, eq=False)
class BoundaryPair:
    w_s: np.ndarray
    b_s: float
    w_t: np.ndarray
    b_t: float

    @property
    def coupling_distance(self) -> float:
        """Distance between the augmented source and target boundaries."""
        ds = np.append(self.w_s - self.w_t, self.b_s - self.b_t)
        return float(np.linalg.norm(ds))

    def select(self, domain) -> tuple[np.ndarray, float]:
        if Domain.parse(domain) == Domain.SOURCE:
            return self.w_s, self.b_s
        return self.w_t, self.b_t

    def stacked(self) -> np.ndarray:
        """2 x (d+1) array with rows [w_s, b_s] and [w_t, b_t]."""
        return np.vstack([np.append(self.w_s, self.b_s), np.append(self.w_t, self.b_t)])


def domain_scale(problem: LiftedProblem) -> np.ndarray:
    """n x n matrix holding ``a`` on same-domain pairs and ``b`` across domains."""
    same = problem.domains[:, None] == problem.domains[None, :]
    return np.where(same, problem.coeff.a, problem.coeff.b)


def build_gram(problem: LiftedProblem) -> np.ndarray:
    """Dual Gram matrix ``Q_ij = y_i y_j s_ij (<x_i, x_j> + 1)``."""
    K = problem.X @ problem.X.T + 1.0
    Q = (problem.y[:, None] * problem.y[None, :]) * domain_scale(problem) * K
    # symmetrize bitwise: BLAS may round the two triangles differently
    return np.triu(Q) + np.triu(Q, 1).T


def selection_matrices(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Binary matrices picking the source and target blocks out of ``[w_s; w_t]``."""
    m = d + 1
    I_s = np.hstack([np.eye(m), np.zeros((m, m))])
    I_t = np.hstack([np.zeros((m, m)), np.eye(m)])
    return I_s, I_t


def dense_coupling_matrix(lam: float, d: int) -> np.ndarray:
    """``(I + lam * Ist^T Ist)^-1`` by explicit dense inversion."""
    I_s, I_t = selection_matrices(d)
    I_st = I_s - I_t
    M = np.eye(2 * (d + 1)) + float(lam) * I_st.T @ I_st
    return np.linalg.inv(M)


def lift(problem: LiftedProblem) -> np.ndarray:
    """Explicit n x 2(d+1) lifted sample matrix."""
    m = problem.dim + 1
    Z = np.zeros((problem.n, 2 * m))
    xa = problem.augmented()
    src = problem.domains == Domain.SOURCE
    Z[src, :m] = xa[src]
    Z[~src, m:] = xa[~src]
    return Z


def symmetric_sqrt(M: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(M)
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T


def _check_dense_guard(d: int) -> None:
    if d > DENSE_DIM_LIMIT:
        raise ValueError(f"dense reference path limited to d <= {DENSE_DIM_LIMIT}, got {d}")


def dense_reference_gram(problem: LiftedProblem) -> np.ndarray:
    """Gram of ``y_i D^{1/2} z_i`` built from materialized lifted vectors."""
    _check_dense_guard(problem.dim)
    D = dense_coupling_matrix(problem.lam, problem.dim)
    Zt = lift(problem) @ symmetric_sqrt(D)
    Yz = problem.y[:, None] * Zt
    return Yz @ Yz.T


def dense_reference_boundaries(problem: LiftedProblem, alphas) -> BoundaryPair:
    """``w = D sum_i alpha_i y_i z_i`` on lifted vectors, split by I_s and I_t."""
    _check_dense_guard(problem.dim)
    d = problem.dim
    D = dense_coupling_matrix(problem.lam, d)
    w = D @ (lift(problem).T @ (np.asarray(alphas, dtype=float) * problem.y))
    I_s, I_t = selection_matrices(d)
    ws, wt = I_s @ w, I_t @ w
    return BoundaryPair(ws[:d], float(ws[d]), wt[:d], float(wt[d]))


def domain_sums(problem: LiftedProblem, alphas) -> np.ndarray:
    """2 x (d+1): per-domain ``sum alpha_i y_i [x_i; 1]``."""
    alphas = np.asarray(alphas, dtype=float)
    if alphas.shape != (problem.n,):
        raise ValueError(f"expected {problem.n} alphas, got shape {alphas.shape}")
    xa = problem.augmented()
    ay = alphas * problem.y
    src = problem.domains == Domain.SOURCE
    return np.vstack([ay[src] @ xa[src], ay[~src] @ xa[~src]])


def boundaries_from_sums(v: np.ndarray, coeff: CouplingCoefficients) -> BoundaryPair:
    a, b = coeff.a, coeff.b
    ws = a * v[0] + b * v[1]
    wt = b * v[0] + a * v[1]
    return BoundaryPair(ws[:-1].copy(), float(ws[-1]), wt[:-1].copy(), float(wt[-1]))


def recover_boundaries(problem: LiftedProblem, alphas) -> BoundaryPair:
    return boundaries_from_sums(domain_sums(problem, alphas), problem.coeff)


def decision_values(problem: LiftedProblem, pair: BoundaryPair) -> np.ndarray:
    """``f_dom(i)(x_i)`` for every sample, using its own domain's boundary."""
    W = pair.stacked()
    return np.einsum("ij,ij->i", problem.augmented(), W[problem.domains])


def hinge_slacks(problem: LiftedProblem, pair: BoundaryPair) -> np.ndarray:
    return np.maximum(0.0, 1.0 - problem.y * decision_values(problem, pair))
