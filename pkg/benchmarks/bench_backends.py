#!/usr/bin/env python3
"""Compare the numba kernels against the pure-numpy fallback on the two
hot paths: batch condition checking and RK4 integration.

Run:  python3 benchmarks/bench_backends.py [--samples N] [--repeat R]
"""

import argparse
import os
import time

import numpy as np

import bisimcert as bc
from bisimcert.backend import run_batch
from bisimcert.program import compile_expr


def time_best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_batch(samples, repeat):
    n = 2
    v = bc.parse(
        "3.5*abs(x[0]-xp[0]) + 1.0*abs(x[1]-xp[1]) "
        "+ 0.1*sqrt((x[0]-xp[0])^2 + (x[1]-xp[1])^2 + 1)",
        {"x": n, "xp": n},
    )
    prog = compile_expr(v, {"x": n, "xp": n})
    rng = np.random.default_rng(0)
    X = rng.uniform(-10, 10, (samples, 2 * n))

    results = {}
    for be in ("numpy", "numba"):
        run_batch(prog, X[:10], seed_slot=0, backend=be)  # warm up / jit
        results[be] = time_best(
            lambda be=be: [run_batch(prog, X, seed_slot=j, backend=be) for j in range(2 * n)],
            repeat,
        )
    a = run_batch(prog, X, seed_slot=1, backend="numpy")
    b = run_batch(prog, X, seed_slot=1, backend="numba")
    assert np.allclose(a[0], b[0], rtol=1e-12) and np.allclose(a[1], b[1], rtol=1e-12)
    return results


def bench_rk4(repeat):
    system = bc.System(
        "osc", 2, 1,
        (bc.parse("x[1]", {"x": 2, "u": 1}),
         bc.parse("-x[0] - 0.1*x[1] + u[0]", {"x": 2, "u": 1})),
    )
    sig = bc.InputSignal.parse(["0.3*sin(t)"])
    results = {}
    for be in ("numpy", "numba"):
        os.environ["BISIMCERT_BACKEND"] = be
        bc.integrate(system, [1.0, 0.0], sig, 1e-3, 0.01)  # warm up / jit
        results[be] = time_best(
            lambda: bc.integrate(system, [1.0, 0.0], sig, 1e-3, 50.0), repeat
        )
    os.environ.pop("BISIMCERT_BACKEND", None)
    return results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    print(f"batch cond-check evaluation ({args.samples} samples, value + 4 gradients):")
    for be, t in bench_batch(args.samples, args.repeat).items():
        print(f"  {be:6s} {t * 1e3:10.2f} ms")

    print("RK4 integration (2-state oscillator, h=1e-3, T=50):")
    for be, t in bench_rk4(args.repeat).items():
        print(f"  {be:6s} {t * 1e3:10.2f} ms")


if __name__ == "__main__":
    main()
