"""Timings of the numba and pure-numpy kernels, and of the dense and fast Krein solvers.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]

Both kernel flavours are called directly, so the DIRACINV_PURE_NUMPY switch
does not affect this script. Prints CSV: kernel, size, numba_s, numpy_s,
speedup, max_abs_diff.
"""
import argparse
import csv
import sys
import time

import numpy as np

from diracinv import _kernels, krein
from diracinv.accelerant import Accelerant
from diracinv.core import Potential, bc_row, symmetric_grid, unit_grid
from diracinv.direct import _Steps


def best_of(fn, repeat):
    out, best = None, np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def smooth_potential(r, n, seed=0):
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal((2, r, r)) + 1j * rng.standard_normal((2, r, r))
    return Potential.from_function(lambda x: coef[0] * np.cos(np.pi * x) + coef[1] * np.sin(2 * np.pi * x), r, n)


def psd_lags(r, n, seed=0):
    rng = np.random.default_rng(seed)
    x = np.arange(-n, n + 1) / n
    out = np.zeros((2 * n + 1, r, r), dtype=complex)
    for _ in range(4):
        v = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
        out += 0.1 * np.exp(1j * rng.uniform(-8, 8) * x)[:, None, None] * (v @ v.conj().T / r)
    return out


def bench_propagation(w, steps_list, repeat, r=2, n_lam=64):
    lams = np.linspace(-60, 60, n_lam).astype(complex)
    for steps in steps_list:
        st = _Steps(smooth_potential(r, 256), 1.0, steps)
        args = (lams, bc_row(r).astype(complex), st.us, st.sigs, st.vs, st.qs, st.h)
        _kernels.propagate_rows_numba(*args)  # compile outside the timing
        tn, a = best_of(lambda: _kernels.propagate_rows_numba(*args), repeat)
        tp, b = best_of(lambda: _kernels.propagate_rows_numpy(*args), repeat)
        w.writerow(["propagate_rows", steps, f"{tn:.4g}", f"{tp:.4g}", f"{tp / tn:.2f}", f"{np.abs(a - b).max():.2e}"])


def bench_levinson(w, sizes, repeat, r=2):
    for n in sizes:
        h = 1.0 / n
        tau = h * psd_lags(r, n)
        tau[n] += np.eye(r)
        _kernels.levinson_krein_numba(tau, h, 1e6)
        tn, (a, _) = best_of(lambda: _kernels.levinson_krein_numba(tau, h, 1e6), repeat)
        tp, (b, _) = best_of(lambda: _kernels.levinson_krein_numpy(tau, h, 1e6), max(1, repeat // 2))
        w.writerow(["levinson_krein", n, f"{tn:.4g}", f"{tp:.4g}", f"{tp / tn:.2f}", f"{np.abs(a - b).max():.2e}"])


def bench_solvers(w, sizes, repeat, r=1):
    w.writerow([])
    w.writerow(["solver_grid", "dense_s", "fast_s", "dense_over_fast", "max_abs_diff"])
    for n in sizes:
        acc = Accelerant(r, symmetric_grid(2 * n), psd_lags(r, n, 1))
        krein.krein_solve_fast(acc, unit_grid(16))
        tf, a = best_of(lambda: krein.krein_solve_fast(acc, unit_grid(n)), repeat)
        td, b = best_of(lambda: krein.krein_solve_dense(acc, unit_grid(n)), 1)
        w.writerow([n, f"{td:.4g}", f"{tf:.4g}", f"{td / tf:.2f}", f"{np.abs(a.R.samples - b.R.samples).max():.2e}"])


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--quick", action="store_true", help="small sizes only")
    args = p.parse_args(argv)
    steps = [256, 1024] if args.quick else [512, 2048, 8192]
    sizes = [64, 128] if args.quick else [128, 256, 512]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["kernel", "size", "numba_s", "numpy_s", "speedup", "max_abs_diff"])
    bench_propagation(w, steps, args.repeat)
    bench_levinson(w, sizes, args.repeat)
    bench_solvers(w, sizes, args.repeat)
    return 0


if __name__ == "__main__":
    sys.exit(main())
