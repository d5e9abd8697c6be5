"""Compare the compiled RK4 kernel against the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``; prints steps per second for both
backends on the GKLS field of a random model and a cubic bracket field.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from geoflow import _kernels
from geoflow._kernels import _pykernels
from geoflow.algebra import KrausSet, build_gellmann_basis, random_hermitian, structure_constants
from geoflow.fields import GKLSModel, bracket, gkls_field, gradient_field


def _fields(n: int, seed: int):
    rng = np.random.default_rng(seed)
    basis = build_gellmann_basis(n)
    sc = structure_constants(basis)
    ops = [rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) for _ in range(2)]
    gamma = gkls_field(GKLSModel(random_hermitian(n, rng), KrausSet(ops)), basis, sc)
    a, b = random_hermitian(n, rng), random_hermitian(n, rng)
    a -= np.trace(a).real / n * np.eye(n)
    b -= np.trace(b).real / n * np.eye(n)
    yy = bracket(gradient_field(a, basis, sc), gradient_field(b, basis, sc))
    return {"gamma (affine)": gamma, "[Y_a, Y_b]": yy, "Y_a (quadratic)": gradient_field(a, basis, sc)}


def _time(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _kernels.BACKEND != "cython":
        print("compiled kernel unavailable; only the numpy fallback will run")
    print(f"{'n':>2} {'field':<18} {'cython steps/s':>15} {'numpy steps/s':>15} {'speedup':>8} {'max diff':>10}")
    for n in (2, 3, 4):
        for name, f in _fields(n, args.seed).items():
            x0 = np.zeros(f.m)
            x0[0] = 0.1
            kargs = f.kernel_args()
            dt = 1e-4
            t_py = _time(lambda: _pykernels.rk4(*kargs, x0, dt, args.steps, args.steps), args.repeat)
            ref = _pykernels.rk4(*kargs, x0, dt, args.steps, args.steps)
            if _kernels.BACKEND == "cython":
                t_c = _time(lambda: _kernels.rk4(*kargs, x0, dt, args.steps, args.steps), args.repeat)
                diff = float(np.abs(_kernels.rk4(*kargs, x0, dt, args.steps, args.steps) - ref).max())
                print(f"{n:>2} {name:<18} {args.steps / t_c:>15.0f} {args.steps / t_py:>15.0f} "
                      f"{t_py / t_c:>7.1f}x {diff:>10.1e}")
            else:
                print(f"{n:>2} {name:<18} {'-':>15} {args.steps / t_py:>15.0f} {'-':>8} {'-':>10}")


if __name__ == "__main__":
    main()
