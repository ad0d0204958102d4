"""Dual coordinate descent kernels for the box-constrained SVM dual.

Two problem layouts are supported:

* dense: the Gram matrix ``Q`` is materialized and the gradient
  ``g = Q @ alpha - 1`` is updated by one column per coordinate step;
* lifted: the coupled linear structure is exploited by maintaining the two
  per-domain sums ``v[k] = sum_{dom(i)=k} alpha_i y_i [x_i; 1]`` so every step
  costs O(d) instead of O(n).

Each layout has a loop kernel compiled with numba and a numpy kernel that does
the same arithmetic with vector operations. ``BACKEND`` names the pair that
``cd_dense`` / ``cd_lifted`` dispatch to. Both kernels draw coordinate orders
from the same seeded Lehmer generator, so the visiting order is identical
across backends.
"""
import numpy as np

from ._accel import BACKEND, NUMBA_OK, njit

_LEHMER_A = 48271
_LEHMER_M = 2147483647
BOUND_TOL = 1e-12


def seed_state(seed):
    """Map an integer seed onto a valid Lehmer state in [1, M-1]."""
    return int(seed) % (_LEHMER_M - 1) + 1


def _shuffle_py(perm, state):
    # Fisher-Yates driven by the Lehmer (MINSTD) generator; fits in int64.
    n = perm.shape[0]
    for k in range(n - 1, 0, -1):
        state = (state * _LEHMER_A) % _LEHMER_M
        j = state % (k + 1)
        tmp = perm[k]
        perm[k] = perm[j]
        perm[j] = tmp
    return state


def _projected_py(ai, gi, ci):
    # projected-gradient magnitude of one coordinate over [0, ci]
    lo = ai <= BOUND_TOL
    hi = ai >= ci - BOUND_TOL
    if lo and hi:
        return 0.0
    if lo:
        return -gi if gi < 0.0 else 0.0
    if hi:
        return gi if gi > 0.0 else 0.0
    return abs(gi)


def _box_violation_py(alpha, g, c):
    viol = 0.0
    for i in range(alpha.shape[0]):
        v = _projected(alpha[i], g[i], c[i])
        if v > viol:
            viol = v
    return viol


def box_violation_np(alpha, g, c):
    """Largest projected-gradient magnitude over the box ``[0, c]``."""
    lo = alpha <= BOUND_TOL
    hi = alpha >= c - BOUND_TOL
    pg = np.abs(g)
    pg = np.where(lo & ~hi, np.maximum(0.0, -g), pg)
    pg = np.where(hi & ~lo, np.maximum(0.0, g), pg)
    pg = np.where(lo & hi, 0.0, pg)
    return float(pg.max()) if pg.size else 0.0


def _coordinate_step(ai, gi, qii, ci):
    if qii > 0.0:
        new = ai - gi / qii
        if new < 0.0:
            new = 0.0
        elif new > ci:
            new = ci
        return new
    # Q_ii = 0 on a PSD matrix means the objective is linear in alpha_i.
    if gi < 0.0:
        return ci
    if gi > 0.0:
        return 0.0
    return ai


# --------------------------------------------------------------------------
# dense layout
# --------------------------------------------------------------------------


def _cd_dense_loop(Q, c, alpha, g, tol, max_epochs, state, history):
    n = Q.shape[0]
    perm = np.arange(n)
    s = 0.0
    for i in range(n):
        s += alpha[i] * (1.0 - g[i])
    history[0] = 0.5 * s
    viol = _box_violation(alpha, g, c)
    if viol <= tol:
        return 0, viol, True
    for ep in range(max_epochs):
        state = _shuffle(perm, state)
        for k in range(n):
            i = perm[k]
            ai = alpha[i]
            new = _step(ai, g[i], Q[i, i], c[i])
            delta = new - ai
            if delta != 0.0:
                alpha[i] = new
                for j in range(n):
                    g[j] += delta * Q[i, j]
        s = 0.0
        for i in range(n):
            s += alpha[i] * (1.0 - g[i])
        history[ep + 1] = 0.5 * s
        viol = _box_violation(alpha, g, c)
        if viol <= tol:
            # refresh the incrementally maintained gradient before accepting
            for i in range(n):
                acc = -1.0
                for j in range(n):
                    acc += Q[i, j] * alpha[j]
                g[i] = acc
            viol = _box_violation(alpha, g, c)
            if viol <= tol:
                return ep + 1, viol, True
    return max_epochs, viol, False


def cd_dense_numpy(Q, c, alpha, g, tol, max_epochs, state, history):
    """Vectorized counterpart of the compiled dense kernel."""
    n = Q.shape[0]
    perm = np.arange(n)
    history[0] = 0.5 * float(alpha @ (1.0 - g))
    viol = box_violation_np(alpha, g, c)
    if viol <= tol:
        return 0, viol, True
    for ep in range(max_epochs):
        state = _shuffle_py(perm, state)
        for i in perm:
            ai = alpha[i]
            new = _coordinate_step(ai, g[i], Q[i, i], c[i])
            delta = new - ai
            if delta != 0.0:
                alpha[i] = new
                g += delta * Q[i]
        history[ep + 1] = 0.5 * float(alpha @ (1.0 - g))
        viol = box_violation_np(alpha, g, c)
        if viol <= tol:
            g[:] = Q @ alpha - 1.0
            viol = box_violation_np(alpha, g, c)
            if viol <= tol:
                return ep + 1, viol, True
    return max_epochs, viol, False


# --------------------------------------------------------------------------
# lifted layout
# --------------------------------------------------------------------------


def _cd_lifted_loop(Xa, y, dom, c, a, b, alpha, v, qdiag, g, tol, max_epochs,
                    state, history):
    n, m = Xa.shape
    perm = np.arange(n)
    w = np.empty((2, m))
    _lifted_gradient(Xa, y, dom, a, b, v, g)
    history[0] = _lifted_dual(alpha, v, a, b)
    viol = _box_violation(alpha, g, c)
    if viol <= tol:
        return 0, viol, True
    _lifted_combine(v, a, b, w)
    for ep in range(max_epochs):
        state = _shuffle(perm, state)
        sweep = 0.0
        for k in range(n):
            i = perm[k]
            own = dom[i]
            acc = 0.0
            for j in range(m):
                acc += w[own, j] * Xa[i, j]
            gi = y[i] * acc - 1.0
            ai = alpha[i]
            pg = _projected(ai, gi, c[i])
            if pg > sweep:
                sweep = pg
            new = _step(ai, gi, qdiag[i], c[i])
            delta = new - ai
            if delta != 0.0:
                alpha[i] = new
                dy = delta * y[i]
                for j in range(m):
                    step = dy * Xa[i, j]
                    v[own, j] += step
                    w[own, j] += a * step
                    w[1 - own, j] += b * step
        history[ep + 1] = _lifted_dual(alpha, v, a, b)
        if sweep <= tol:
            # the sweep saw only small steps; confirm with a fresh full gradient
            _lifted_resum(Xa, y, dom, alpha, v)
            _lifted_gradient(Xa, y, dom, a, b, v, g)
            viol = _box_violation(alpha, g, c)
            if viol <= tol:
                return ep + 1, viol, True
            _lifted_combine(v, a, b, w)
    _lifted_gradient(Xa, y, dom, a, b, v, g)
    return max_epochs, _box_violation(alpha, g, c), False


def _lifted_combine_py(v, a, b, w):
    for j in range(v.shape[1]):
        w[0, j] = a * v[0, j] + b * v[1, j]
        w[1, j] = b * v[0, j] + a * v[1, j]


def _lifted_gradient_py(Xa, y, dom, a, b, v, g):
    n, m = Xa.shape
    for i in range(n):
        own = dom[i]
        other = 1 - own
        acc = 0.0
        for j in range(m):
            acc += (a * v[own, j] + b * v[other, j]) * Xa[i, j]
        g[i] = y[i] * acc - 1.0


def _lifted_dual_py(alpha, v, a, b):
    m = v.shape[1]
    ss = 0.0
    st = 0.0
    for j in range(m):
        ss += v[0, j] * v[0, j] + v[1, j] * v[1, j]
        st += v[0, j] * v[1, j]
    s = 0.0
    for i in range(alpha.shape[0]):
        s += alpha[i]
    return s - 0.5 * (a * ss + 2.0 * b * st)


def _lifted_resum_py(Xa, y, dom, alpha, v):
    n, m = Xa.shape
    for j in range(m):
        v[0, j] = 0.0
        v[1, j] = 0.0
    for i in range(n):
        ay = alpha[i] * y[i]
        if ay != 0.0:
            for j in range(m):
                v[dom[i], j] += ay * Xa[i, j]


def lifted_sums_np(Xa, y, dom, alpha):
    """Per-domain sums ``v[k] = sum_{dom(i)=k} alpha_i y_i xa_i``."""
    v = np.zeros((2, Xa.shape[1]))
    ay = alpha * y
    src = dom == 0
    v[0] = ay[src] @ Xa[src]
    v[1] = ay[~src] @ Xa[~src]
    return v


def _lifted_gradient_np(Xa, y, dom, a, b, v):
    w = np.stack([a * v[0] + b * v[1], b * v[0] + a * v[1]])
    return y * np.einsum("ij,ij->i", Xa, w[dom]) - 1.0


def _lifted_dual_np(alpha, v, a, b):
    quad = a * (v[0] @ v[0] + v[1] @ v[1]) + 2.0 * b * (v[0] @ v[1])
    return float(alpha.sum() - 0.5 * quad)


def cd_lifted_numpy(Xa, y, dom, c, a, b, alpha, v, qdiag, g, tol, max_epochs,
                    state, history):
    """Vectorized counterpart of the compiled lifted kernel."""
    n = Xa.shape[0]
    perm = np.arange(n)
    w = np.stack([a * v[0] + b * v[1], b * v[0] + a * v[1]])
    g[:] = _lifted_gradient_np(Xa, y, dom, a, b, v)
    history[0] = _lifted_dual_np(alpha, v, a, b)
    viol = box_violation_np(alpha, g, c)
    if viol <= tol:
        return 0, viol, True
    for ep in range(max_epochs):
        state = _shuffle_py(perm, state)
        sweep = 0.0
        for i in perm:
            own = dom[i]
            gi = y[i] * float(w[own] @ Xa[i]) - 1.0
            ai = alpha[i]
            sweep = max(sweep, _projected_py(ai, gi, c[i]))
            new = _coordinate_step(ai, gi, qdiag[i], c[i])
            delta = new - ai
            if delta != 0.0:
                alpha[i] = new
                step = (delta * y[i]) * Xa[i]
                v[own] += step
                # w_own moves by a*step, the other boundary by b*step
                w[own] += a * step
                w[1 - own] += b * step
        history[ep + 1] = _lifted_dual_np(alpha, v, a, b)
        if sweep <= tol:
            v[:] = lifted_sums_np(Xa, y, dom, alpha)
            g[:] = _lifted_gradient_np(Xa, y, dom, a, b, v)
            viol = box_violation_np(alpha, g, c)
            if viol <= tol:
                return ep + 1, viol, True
            w = np.stack([a * v[0] + b * v[1], b * v[0] + a * v[1]])
    g[:] = _lifted_gradient_np(Xa, y, dom, a, b, v)
    return max_epochs, box_violation_np(alpha, g, c), False


if NUMBA_OK:
    _shuffle = njit(cache=True)(_shuffle_py)
    _projected = njit(cache=True)(_projected_py)
    _box_violation = njit(cache=True)(_box_violation_py)
    _step = njit(cache=True)(_coordinate_step)
    _lifted_gradient = njit(cache=True)(_lifted_gradient_py)
    _lifted_dual = njit(cache=True)(_lifted_dual_py)
    _lifted_resum = njit(cache=True)(_lifted_resum_py)
    _lifted_combine = njit(cache=True)(_lifted_combine_py)
    cd_dense_numba = njit(cache=True, nogil=True)(_cd_dense_loop)
    cd_lifted_numba = njit(cache=True, nogil=True)(_cd_lifted_loop)
    cd_dense = cd_dense_numba
    cd_lifted = cd_lifted_numba
else:
    cd_dense_numba = None
    cd_lifted_numba = None
    cd_dense = cd_dense_numpy
    cd_lifted = cd_lifted_numpy

__all__ = [
    "BACKEND",
    "BOUND_TOL",
    "box_violation_np",
    "cd_dense",
    "cd_dense_numba",
    "cd_dense_numpy",
    "cd_lifted",
    "cd_lifted_numba",
    "cd_lifted_numpy",
    "lifted_sums_np",
    "seed_state",
]
