"""Independent reference computations used only by the tests.

Nothing here imports the package's solver or coupling algebra.
"""
import numpy as np


def selection_pair(d):
    m = d + 1
    I_s = np.zeros((m, 2 * m))
    I_t = np.zeros((m, 2 * m))
    I_s[np.arange(m), np.arange(m)] = 1.0
    I_t[np.arange(m), m + np.arange(m)] = 1.0
    return I_s, I_t


def dense_D(lam, d):
    I_s, I_t = selection_pair(d)
    Ist = I_s - I_t
    return np.linalg.inv(np.eye(2 * (d + 1)) + lam * Ist.T @ Ist)


def lifted_rows(X, domains):
    n, d = X.shape
    Z = np.zeros((n, 2 * (d + 1)))
    for i in range(n):
        xa = np.append(X[i], 1.0)
        if domains[i] == 0:
            Z[i, : d + 1] = xa
        else:
            Z[i, d + 1:] = xa
    return Z


def lifted_gram(X, y, domains, lam):
    Z = lifted_rows(X, domains)
    D = dense_D(lam, X.shape[1])
    return (y[:, None] * y[None, :]) * (Z @ D @ Z.T)


def lifted_boundaries(X, y, domains, lam, alphas):
    d = X.shape[1]
    Z = lifted_rows(X, domains)
    w = dense_D(lam, d) @ (Z.T @ (alphas * y))
    return w[: d + 1], w[d + 1:]


def projected_gradient_qp(Q, c, tol=1e-12, max_iter=500_000):
    """Accelerated projected gradient with adaptive restart on the box [0, c].

    Returns the iterate with the best dual objective seen.
    """
    n = len(c)
    L = max(np.linalg.eigvalsh(Q).max(), 1e-12)
    step = 1.0 / L
    x = np.zeros(n)
    z = x.copy()
    t = 1.0
    f = lambda a: 0.5 * a @ Q @ a - a.sum()  # noqa: E731
    best, fbest = x.copy(), f(x)
    for _ in range(max_iter):
        g = Q @ z - 1.0
        x_new = np.clip(z - step * g, 0.0, c)
        fx = f(x_new)
        if fx < fbest:
            best, fbest = x_new.copy(), fx
        if (x_new - x) @ (z - x_new) > 0:  # restart momentum when it points uphill
            t = 1.0
            z = x_new
        else:
            t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            z = x_new + (t - 1) / t_new * (x_new - x)
            t = t_new
        x = x_new
        gx = Q @ x - 1.0
        pg = np.where(x <= 0, np.minimum(gx, 0), np.where(x >= c, np.maximum(gx, 0), gx))
        if np.abs(pg).max() <= tol:
            return x
    return best


def qp_objective(Q, alphas):
    """Dual objective in maximization form: 1^T a - 1/2 a^T Q a."""
    return alphas.sum() - 0.5 * alphas @ Q @ alphas


def plain_svm_dual(X, y, cost):
    """Standard linear SVM with the bias folded into w: returns (w, b) via the oracle QP."""
    Xa = np.hstack([X, np.ones((len(X), 1))])
    Q = (y[:, None] * y[None, :]) * (Xa @ Xa.T)
    alphas = projected_gradient_qp(Q, np.full(len(y), float(cost)))
    w = Xa.T @ (alphas * y)
    return w[:-1], w[-1]
