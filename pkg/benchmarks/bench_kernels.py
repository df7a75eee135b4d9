"""Timing comparison of the numba and pure-numpy convolution backends.

Run as a script: python3 benchmarks/bench_kernels.py

Both backends are imported directly so a single process can time them against
each other regardless of the KNOTRATE_NUMBA setting.
"""

import time

import numpy as np

from knotrate import _kernels

SHAPES = [
    # (batch, length, in_channels, hidden, dilation) roughly matching training
    (32, 31, 32, 64, 1),
    (32, 27, 64, 64, 2),
    (32, 19, 64, 64, 4),
    (256, 31, 32, 64, 1),
]
KERNEL_SIZE = 3
REPEATS = 50


def backends():
    yield "numpy", _kernels._conv1d_forward_np, _kernels._conv1d_backward_np
    if _kernels.USE_NUMBA:
        yield "numba", _kernels._conv1d_forward_nb, _kernels._conv1d_backward_nb
    else:
        print("numba backend unavailable (import failed or KNOTRATE_NUMBA=0)")


def bench_one(fwd, bwd, shape):
    b, t, cin, h, d = shape
    rng = np.random.default_rng(0)
    x = rng.standard_normal((b, t, cin))
    w = rng.standard_normal((h, cin, KERNEL_SIZE))
    bias = rng.standard_normal(h)
    y = fwd(x, w, bias, d)  # warm-up / JIT compile
    dy = rng.standard_normal(y.shape)
    bwd(x, w, dy, d)
    t0 = time.perf_counter()
    for _ in range(REPEATS):
        fwd(x, w, bias, d)
    t_fwd = (time.perf_counter() - t0) / REPEATS
    t0 = time.perf_counter()
    for _ in range(REPEATS):
        bwd(x, w, dy, d)
    t_bwd = (time.perf_counter() - t0) / REPEATS
    return t_fwd, t_bwd


def main():
    results = {}
    for name, fwd, bwd in backends():
        for shape in SHAPES:
            results[name, shape] = bench_one(fwd, bwd, shape)
    print(f"{'shape (B,T,Cin,H,d)':28s} {'backend':8s} {'fwd ms':>9s} {'bwd ms':>9s}")
    for shape in SHAPES:
        for name in ("numpy", "numba"):
            if (name, shape) not in results:
                continue
            t_fwd, t_bwd = results[name, shape]
            print(
                f"{str(shape):28s} {name:8s} {t_fwd * 1e3:9.3f} {t_bwd * 1e3:9.3f}"
            )
        if ("numba", shape) in results:
            nf, nb = results["numba", shape]
            pf, pb = results["numpy", shape]
            print(f"{'':28s} {'speedup':8s} {pf / nf:8.2f}x {pb / nb:8.2f}x")


if __name__ == "__main__":
    main()
