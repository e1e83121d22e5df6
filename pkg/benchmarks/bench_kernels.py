"""Benchmark the numba kernels against the pure-numpy fallback on the
convolution and pooling shapes the image architecture actually runs.

Usage: python benchmarks/bench_kernels.py [--batch 256] [--repeat 5]
"""

import argparse
import time

import numpy as np

from deepbass.kernels import numpy_backend

try:
    from deepbass.kernels import numba_backend
except ImportError:
    numba_backend = None

CONV_SHAPES = [
    ("conv 28x28x1->16", 28, 28, 1, 16),
    ("conv 28x28x16->16", 28, 28, 16, 16),
    ("conv 14x14x16->16", 14, 14, 16, 16),
]
POOL_SHAPES = [("pool 28x28x16", 28, 28, 16), ("pool 14x14x16", 14, 14, 16)]


def best_of(fn, repeat):
    fn()  # warmup (and JIT compile for the numba path)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_conv(backend, batch, repeat, rng):
    rows = []
    for name, h, w, ci, co in CONV_SHAPES:
        x = rng.standard_normal((batch, h, w, ci)).astype(np.float32)
        k = (rng.standard_normal((3, 3, ci, co)) * 0.2).astype(np.float32)
        b = np.zeros(co, dtype=np.float32)
        g = rng.standard_normal((batch, h, w, co)).astype(np.float32)
        flops = 2 * batch * h * w * 9 * ci * co
        rows.append((f"{name} fwd", best_of(lambda: backend.conv2d_forward(x, k, b), repeat), flops))
        rows.append((f"{name} bwd-in", best_of(lambda: backend.conv2d_backward_input(g, k), repeat), flops))
        rows.append((f"{name} bwd-k", best_of(lambda: backend.conv2d_backward_kernels(x, g), repeat), flops))
    for name, h, w, c in POOL_SHAPES:
        x = rng.standard_normal((batch, h, w, c)).astype(np.float32)
        rows.append((f"{name} fwd", best_of(lambda: backend.maxpool2x2_forward(x), repeat), None))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=256)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    results = {"numpy": bench_conv(numpy_backend, args.batch, args.repeat, rng)}
    if numba_backend is not None:
        results["numba"] = bench_conv(numba_backend, args.batch, args.repeat, rng)
    else:
        print("numba not importable; benchmarking the numpy path only")

    print(f"\nbatch={args.batch}, best of {args.repeat}\n")
    header = f"{'kernel':26s} " + "".join(f"{name:>14s}" for name in results)
    if len(results) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    print("-" * len(header))
    for i, (name, t_np, flops) in enumerate(results["numpy"]):
        cells = []
        times = []
        for backend_rows in results.values():
            t = backend_rows[i][1]
            times.append(t)
            if flops:
                cells.append(f"{t * 1e3:7.2f}ms({flops / t / 1e9:4.1f}G)")
            else:
                cells.append(f"{t * 1e3:10.2f}ms")
        line = f"{name:26s} " + "".join(f"{c:>14s}" for c in cells)
        if len(times) == 2:
            line += f"{times[0] / times[1]:9.2f}x"
        print(line)


if __name__ == "__main__":
    main()
