"""Time the coordinate-descent kernels: numba-compiled vs pure numpy.

    python3 benchmarks/bench_solver.py [--n 400] [--dim 20] [--repeat 3]

Both backends run the same sweep order, so the duals they return should
agree to rounding; the script checks that before printing timings.
"""
import argparse
import time

import numpy as np

from csvm import kernels
from csvm.coupling import LiftedProblem, build_gram


def make_problem(n, dim, lam, seed):
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    X = rng.normal(size=(n, dim)) + 0.7 * y[:, None]
    n_s = (3 * n) // 4
    return LiftedProblem.from_domains(X[:n_s], y[:n_s], X[n_s:], y[n_s:], 1.0, 10.0, lam)


def run_dense(fn, Q, c, tol, epochs):
    alpha, g = np.zeros(len(c)), np.full(len(c), -1.0)
    hist = np.full(epochs + 1, np.nan)
    fn(Q, c, alpha, g, tol, epochs, kernels.seed_state(0), hist)
    return alpha


def run_lifted(fn, p, tol, epochs):
    xa = p.augmented()
    co = p.coeff
    alpha, g = np.zeros(p.n), np.full(p.n, -1.0)
    v = np.zeros((2, xa.shape[1]))
    qdiag = co.a * np.einsum("ij,ij->i", xa, xa)
    hist = np.full(epochs + 1, np.nan)
    fn(xa, p.y, p.domains, p.costs, co.a, co.b, alpha, v, qdiag, g, tol, epochs,
       kernels.seed_state(0), hist)
    return alpha


def best_of(repeat, fn, *args):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--dim", type=int, default=20)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not kernels.NUMBA_OK:
        raise SystemExit("numba unavailable (or CSVM_DISABLE_NUMBA set); nothing to compare")

    p = make_problem(args.n, args.dim, args.lam, seed=0)
    Q = build_gram(p)
    tol = 1e-12  # effectively a fixed epoch budget
    # compile outside the timed region
    run_dense(kernels.cd_dense_numba, Q[:4, :4].copy(), p.costs[:4].copy(), tol, 1)
    run_lifted(kernels.cd_lifted_numba, p, tol, 1)

    print(f"n={args.n} dim={args.dim} lambda={args.lam} epochs={args.epochs}")
    for name, numba_fn, numpy_fn, call in (
        ("dense", kernels.cd_dense_numba, kernels.cd_dense_numpy,
         lambda fn: run_dense(fn, Q, p.costs, tol, args.epochs)),
        ("lifted", kernels.cd_lifted_numba, kernels.cd_lifted_numpy,
         lambda fn: run_lifted(fn, p, tol, args.epochs)),
    ):
        t_jit, a_jit = best_of(args.repeat, call, numba_fn)
        t_np, a_np = best_of(args.repeat, call, numpy_fn)
        diff = float(np.abs(a_jit - a_np).max())
        print(f"{name:>7}: numba {t_jit * 1e3:9.2f} ms  numpy {t_np * 1e3:9.2f} ms  "
              f"speedup {t_np / t_jit:7.1f}x  max|alpha diff| {diff:.1e}")


if __name__ == "__main__":
    main()
