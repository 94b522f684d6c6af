"""Compare the compiled and numpy kernels, and time a full 2D fit with each.

    python benchmarks/bench_kernels.py [--n 20000] [--repeat 50]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from planck2d import _pykernels

try:
    from planck2d import _ckernels
except ImportError:
    _ckernels = None

A = 0.13197918451757107

FIT_SNIPPET = """
import time
from planck2d.physics import CalibrationParams
from planck2d.simulate import NoiseConfig, plan_sweep, simulate_dataset
from planck2d.calibrate import fit_2d
import planck2d.kernels as k
truth = CalibrationParams.from_loss_db(1.15, 6.83, 2.79)
plan = plan_sweep()
sets = [simulate_dataset(truth, plan, noise=NoiseConfig(rng_seed=s)) for s in range({n})]
t0 = time.perf_counter()
for ds in sets:
    fit_2d(ds)
print(k.BACKEND, (time.perf_counter() - t0) / {n})
"""


def kernel_times(n, repeat):
    rng = np.random.default_rng(0)
    T_att = rng.uniform(0, 2, n)
    T_mc = rng.uniform(0, 0.4, n)
    P = rng.uniform(0.1, 0.3, n)
    w = np.ones(n)
    out = {}
    for name, mod in (("python", _pykernels), ("cython", _ckernels)):
        if mod is None:
            continue
        f = lambda m=mod: m.residual_and_jacobian(1.15, 6.83, 0.526, T_att, T_mc, P, w, A, 0.02)  # noqa: E731
        out[name] = min(timeit.repeat(f, number=1, repeat=repeat))
    return out


def fit_time(pure, n):
    env = dict(os.environ)
    if pure:
        env["PLANCK2D_PURE_PYTHON"] = "1"
    res = subprocess.run([sys.executable, "-c", FIT_SNIPPET.format(n=n)], env=env,
                         capture_output=True, text=True, check=True)
    backend, t = res.stdout.split()
    return backend, float(t)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=20000, help="points per kernel call")
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--fits", type=int, default=200)
    args = ap.parse_args()

    t = kernel_times(args.n, args.repeat)
    print(f"residual_and_jacobian, {args.n} points:")
    for name, v in t.items():
        print(f"  {name:7s} {v * 1e3:8.3f} ms")
    if len(t) == 2:
        print(f"  speedup {t['python'] / t['cython']:.2f}x")
    else:
        print("  compiled kernels not built; only the fallback was timed")

    print(f"fit_2d on 120-point datasets, mean of {args.fits}:")
    for pure in (True, False):
        backend, v = fit_time(pure, args.fits)
        print(f"  {backend:7s} {v * 1e3:8.3f} ms")


if __name__ == "__main__":
    main()
