"""Numba-compiled kernels mirroring numpy_backend, parallelized over cheap axes.

Every output element is written by exactly one thread, so results are
deterministic for a fixed build regardless of thread count.
"""

import numpy as np
from numba import njit, prange


@njit(parallel=True, fastmath=True, cache=True)
def conv2d_forward(x, kernels, bias):
    b, h, w, ci = x.shape
    co = kernels.shape[3]
    xp = np.zeros((b, h + 2, w + 2, ci), dtype=x.dtype)
    for bi in prange(b):
        xp[bi, 1 : h + 1, 1 : w + 1, :] = x[bi]
    out = np.empty((b, h, w, co), dtype=x.dtype)
    for bi in prange(b):
        acc = np.empty(co, dtype=x.dtype)
        for y in range(h):
            for xx in range(w):
                for c in range(co):
                    acc[c] = bias[c]
                for u in range(3):
                    for v in range(3):
                        for c_in in range(ci):
                            xv = xp[bi, y + u, xx + v, c_in]
                            for c in range(co):
                                acc[c] += xv * kernels[u, v, c_in, c]
                out[bi, y, xx] = acc
    return out


@njit(parallel=True, fastmath=True, cache=True)
def conv2d_backward_input(grad_out, kernels):
    b, h, w, co = grad_out.shape
    ci = kernels.shape[2]
    dx = np.zeros((b, h, w, ci), dtype=grad_out.dtype)
    for bi in prange(b):
        dxp = np.zeros((h + 2, w + 2, ci), dtype=grad_out.dtype)
        for y in range(h):
            for xx in range(w):
                for u in range(3):
                    for v in range(3):
                        for c_in in range(ci):
                            acc = grad_out[bi, y, xx, 0] * kernels[u, v, c_in, 0]
                            for c in range(1, co):
                                acc += grad_out[bi, y, xx, c] * kernels[u, v, c_in, c]
                            dxp[y + u, xx + v, c_in] += acc
        dx[bi] = dxp[1 : h + 1, 1 : w + 1, :]
    return dx


@njit(parallel=True, fastmath=True, cache=True)
def conv2d_backward_kernels(x, grad_out):
    b, h, w, ci = x.shape
    co = grad_out.shape[3]
    dk = np.zeros((3, 3, ci, co), dtype=grad_out.dtype)
    # one task per (tap, output channel): no cross-thread accumulation
    for task in prange(9 * co):
        u = task // (3 * co)
        rem = task % (3 * co)
        v = rem // co
        c = rem % co
        du = u - 1
        dv = v - 1
        y0 = max(0, -du)
        y1 = h - max(0, du)
        x0 = max(0, -dv)
        x1 = w - max(0, dv)
        acc = np.zeros(ci, dtype=grad_out.dtype)
        for bi in range(b):
            for y in range(y0, y1):
                for xx in range(x0, x1):
                    gv = grad_out[bi, y, xx, c]
                    for c_in in range(ci):
                        acc[c_in] += x[bi, y + du, xx + dv, c_in] * gv
        dk[u, v, :, c] = acc
    return dk


@njit(parallel=True, fastmath=True, cache=True)
def maxpool2x2_forward(x):
    b, h, w, c = x.shape
    ho = (h + 1) // 2
    wo = (w + 1) // 2
    out = np.empty((b, ho, wo, c), dtype=x.dtype)
    idx = np.empty((b, ho, wo, c), dtype=np.uint8)
    for bi in prange(b):
        for oy in range(ho):
            for ox in range(wo):
                for ch in range(c):
                    best = -np.inf
                    arg = np.uint8(0)
                    for u in range(2):
                        y = 2 * oy + u
                        if y >= h:
                            continue
                        for v in range(2):
                            xx = 2 * ox + v
                            if xx >= w:
                                continue
                            val = x[bi, y, xx, ch]
                            if val > best:
                                best = val
                                arg = np.uint8(2 * u + v)
                    out[bi, oy, ox, ch] = best
                    idx[bi, oy, ox, ch] = arg
    return out, idx


@njit(parallel=True, fastmath=True, cache=True)
def maxpool2x2_backward(idx, grad_out, h, w):
    b, ho, wo, c = grad_out.shape
    dx = np.zeros((b, h, w, c), dtype=grad_out.dtype)
    for bi in prange(b):
        for oy in range(ho):
            for ox in range(wo):
                for ch in range(c):
                    a = idx[bi, oy, ox, ch]
                    dx[bi, 2 * oy + a // 2, 2 * ox + a % 2, ch] += grad_out[
                        bi, oy, ox, ch
                    ]
    return dx
