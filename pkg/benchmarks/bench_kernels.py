"""Time the compiled kernels against the numpy fallback and confirm they agree.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import math
import time

import numpy as np

from srk import _kernels
from srk import rng


def _best(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cases():
    g = np.random.default_rng(0)
    K, P, m = 20000, 12, 4
    X, Y = g.normal(size=(K, P, m)), g.normal(size=(K, P, m))
    dW = g.normal(size=(K, m))
    fine_dW = g.normal(size=(200, 1024, m)) * 0.01
    fine_I = g.normal(size=(200, 1024, m, m)) * 1e-4
    paths = np.arange(256, dtype=np.uint64)
    tag = rng.make_tag(rng.LEVY, 4096)
    return {
        "philox_blocks (256 paths x 8192 blocks)":
            lambda k: k.philox_blocks(1234, 0, paths, tag, 0, 8192),
        "fourier_area (K=20000, P=12, m=4)":
            lambda k: k.fourier_area(X, Y, dW, 1.7),
        "chen_aggregate (200 paths, 1024 -> 16 steps, m=4)":
            lambda k: k.chen_aggregate(fine_dW, fine_I, 64),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _kernels.compiled_available():
        print("compiled extension not built; only the fallback can be timed")
    py = _kernels.get_backend("python")
    cy = _kernels.get_backend("cython") if _kernels.compiled_available() else None
    print(f"{'kernel':<52} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8}  identical")
    for name, fn in _cases().items():
        tp, op = _best(lambda: fn(py), args.repeat)
        if cy is None:
            print(f"{name:<52} {tp:11.4f} {'-':>11} {'-':>8}  -")
            continue
        tc, oc = _best(lambda: fn(cy), args.repeat)
        op, oc = (op, oc) if isinstance(op, tuple) else ((op,), (oc,))
        same = all(np.array_equal(a, b) for a, b in zip(op, oc))
        print(f"{name:<52} {tp:11.4f} {tc:11.4f} {tp / tc:8.1f}  {same}")


if __name__ == "__main__":
    main()
