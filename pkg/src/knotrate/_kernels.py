"""Dilated 1-D convolution kernels, the hot loops of training and inference.

Two interchangeable backends:

* numba ``@njit`` kernels built on BLAS ``np.dot`` (default when numba
  imports cleanly), and
* a pure-numpy tap-sum formulation.

Set ``KNOTRATE_NUMBA=0`` in the environment to force the numpy path; see
``benchmarks/bench_kernels.py`` for a timing comparison.  Both backends are
deterministic; results may differ in the last float bits between backends, so
bit-level determinism guarantees hold per backend.

Convolutions are "valid" and centered: an input of length T with kernel size
k and dilation d yields T - (k-1)*d outputs, output t reading input taps
t, t+d, ..., t+(k-1)*d.

Shapes: x (B, T, Cin), w (H, Cin, k), b (H,), y/dy (B, T_out, H).
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("KNOTRATE_NUMBA", "1") != "0"

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:
        USE_NUMBA = False


def _conv1d_forward_np(x, w, b, dilation):
    k = w.shape[2]
    t_out = x.shape[1] - (k - 1) * dilation
    y = np.broadcast_to(b, (x.shape[0], t_out, b.shape[0])).copy()
    for i in range(k):
        seg = np.ascontiguousarray(x[:, i * dilation : i * dilation + t_out, :])
        y += (seg.reshape(-1, x.shape[2]) @ w[:, :, i].T).reshape(y.shape)
    return y


def _conv1d_backward_np(x, w, dy, dilation):
    k = w.shape[2]
    t_out = dy.shape[1]
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    dy2 = np.ascontiguousarray(dy).reshape(-1, dy.shape[2])
    for i in range(k):
        sl = slice(i * dilation, i * dilation + t_out)
        dx[:, sl, :] += (dy2 @ w[:, :, i]).reshape(dy.shape[0], t_out, -1)
        seg = np.ascontiguousarray(x[:, sl, :]).reshape(-1, x.shape[2])
        dw[:, :, i] = dy2.T @ seg
    db = dy.sum(axis=(0, 1))
    return dx, dw, db


if USE_NUMBA:

    @njit(cache=True)
    def _gather_taps(x, dilation, t_out, i):
        # rows (n, t) flattened: x[n, t + i*dilation, :]
        B, T, Cin = x.shape
        seg = np.empty((B * t_out, Cin), dtype=x.dtype)
        for n in range(B):
            lo = i * dilation
            for t in range(t_out):
                seg[n * t_out + t] = x[n, lo + t]
        return seg

    @njit(cache=True)
    def _conv1d_forward_nb(x, w, b, dilation):
        B, T, Cin = x.shape
        H, _, k = w.shape
        t_out = T - (k - 1) * dilation
        acc = np.zeros((B * t_out, H), dtype=x.dtype)
        for i in range(k):
            seg = _gather_taps(x, dilation, t_out, i)
            acc += np.dot(seg, w[:, :, i].T.copy())
        y = np.empty((B, t_out, H), dtype=x.dtype)
        for n in range(B):
            for t in range(t_out):
                y[n, t] = acc[n * t_out + t] + b
        return y

    @njit(cache=True)
    def _conv1d_backward_nb(x, w, dy, dilation):
        B, T, Cin = x.shape
        H, _, k = w.shape
        t_out = dy.shape[1]
        dx = np.zeros_like(x)
        dw = np.zeros_like(w)
        db = np.zeros(H, dtype=w.dtype)
        dy_flat = np.empty((B * t_out, H), dtype=dy.dtype)
        for n in range(B):
            for t in range(t_out):
                dy_flat[n * t_out + t] = dy[n, t]
                for h in range(H):
                    db[h] += dy[n, t, h]
        dy_flatT = dy_flat.T.copy()
        for i in range(k):
            lo = i * dilation
            prod = np.dot(dy_flat, w[:, :, i].copy())  # (B*t_out, Cin)
            for n in range(B):
                for t in range(t_out):
                    dx[n, lo + t] += prod[n * t_out + t]
            seg = _gather_taps(x, dilation, t_out, i)
            dw[:, :, i] = np.dot(dy_flatT, seg)
        return dx, dw, db

    conv1d_forward = _conv1d_forward_nb
    conv1d_backward = _conv1d_backward_nb
else:
    conv1d_forward = _conv1d_forward_np
    conv1d_backward = _conv1d_backward_np


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
