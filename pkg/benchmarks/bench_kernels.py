#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Runs the two hot kernels at experiment-like sizes under both backends,
checks that outputs agree, and prints a timing table.

Usage:
    python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from localsgd import kernels, problems


def _time(fn, *args, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, np.asarray(out)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller sizes")
    args = parser.parse_args()

    scale = 0.1 if args.quick else 1.0
    backends = ["numpy"]
    try:
        kernels.load_backend("cython")
        backends.append("cython")
    except ImportError:
        print("compiled extension not available; benchmarking numpy only")

    rows = []

    B = max(8, int(256 * scale))
    seeds = np.arange(B, dtype=np.uint64)
    for name, cfg in [
        ("hinge local  K=512 R=4 M=256", dict(K=512, R=4, M=256, minibatch=False)),
        ("hinge batch  K=512 R=4 M=256", dict(K=512, R=4, M=256, minibatch=True)),
        ("hinge local  K=2 R=64 M=256", dict(K=2, R=64, M=256, minibatch=False)),
    ]:
        outs = {}
        for b in backends:
            impl = kernels.load_backend(b)
            t, outs[b] = _time(impl.hinge_run, 0.25, 0.577, 1.0, 0.05,
                               cfg["K"], cfg["R"], cfg["M"], seeds, 0.0,
                               cfg["minibatch"])
            draws = B * cfg["M"] * cfg["K"] * cfg["R"]
            rows.append((name, b, t, draws / t / 1e6))
        if len(backends) == 2:
            assert (outs["numpy"] == outs["cython"]).all(), f"{name}: backend mismatch"

    ds = problems.generate_figure1_dataset(max(500, int(5000 * scale)), 25, seed=0)
    y = ds.labels.astype(np.float64) * 2 - 1
    B = max(8, int(32 * scale * 10))
    seeds = np.arange(B, dtype=np.uint64)
    for name, cfg in [
        ("logistic local K=200 R=16 M=10", dict(K=200, R=16, M=10, minibatch=False)),
        ("logistic batch K=200 R=16 M=10", dict(K=200, R=16, M=10, minibatch=True)),
    ]:
        outs = {}
        for b in backends:
            impl = kernels.load_backend(b)
            t, outs[b] = _time(impl.logistic_run, ds.features, y, 0.05,
                               cfg["K"], cfg["R"], cfg["M"], seeds,
                               np.zeros(26), cfg["minibatch"], repeat=2)
            draws = B * cfg["M"] * cfg["K"] * cfg["R"]
            rows.append((name, b, t, draws / t / 1e6))
        if len(backends) == 2:
            np.testing.assert_allclose(outs["numpy"], outs["cython"], rtol=0, atol=1e-12)

    print(f"\n{'kernel':35s} {'backend':8s} {'seconds':>9s} {'Mdraw/s':>9s}")
    for name, b, t, rate in rows:
        print(f"{name:35s} {b:8s} {t:9.3f} {rate:9.1f}")
    if len(backends) == 2:
        print("\nbackend outputs agree (hinge bit-exact, logistic <= 1e-12).")


if __name__ == "__main__":
    main()
