"""Pure-numpy kernels for 3x3 same-padding convolution and 2x2 max pooling.

Wide-channel convolutions are evaluated as 9 shifted GEMMs (one per kernel
tap), which keeps the heavy lifting inside BLAS without materializing
im2col buffers; narrow inputs (ci <= 4) use a single im2col GEMM instead,
where the 9 strided accumulations would dominate.
"""

import numpy as np

_IM2COL_MAX_CIN = 4


def _shift_slices(du, dv, h, w):
    """Destination/source slice pairs for a tap offset (du, dv) in {-1,0,1}."""
    ys = slice(max(0, -du), h - max(0, du))
    xs = slice(max(0, -dv), w - max(0, dv))
    yr = slice(max(0, du), h - max(0, -du))
    xr = slice(max(0, dv), w - max(0, -dv))
    return ys, xs, yr, xr


def conv2d_forward(x, kernels, bias):
    """Cross-correlate x (B,H,W,Ci) with kernels (3,3,Ci,Co); zero 'same' padding."""
    b, h, w, ci = x.shape
    co = kernels.shape[3]
    if ci <= _IM2COL_MAX_CIN:
        xp = np.zeros((b, h + 2, w + 2, ci), dtype=x.dtype)
        xp[:, 1:-1, 1:-1, :] = x
        win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(1, 2))
        cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(b * h * w, 9 * ci)
        out = cols @ kernels.reshape(9 * ci, co)
        out += bias
        return out.reshape(b, h, w, co)
    out = np.empty((b, h, w, co), dtype=x.dtype)
    out[:] = bias
    for u in range(3):
        for v in range(3):
            ys, xs, yr, xr = _shift_slices(u - 1, v - 1, h, w)
            out[:, ys, xs, :] += x[:, yr, xr, :] @ kernels[u, v]
    return out


def conv2d_backward_input(grad_out, kernels):
    """Gradient w.r.t. the convolution input."""
    b, h, w, _ = grad_out.shape
    dx = np.zeros((b, h, w, kernels.shape[2]), dtype=grad_out.dtype)
    for u in range(3):
        for v in range(3):
            ys, xs, yr, xr = _shift_slices(u - 1, v - 1, h, w)
            dx[:, yr, xr, :] += grad_out[:, ys, xs, :] @ kernels[u, v].T
    return dx


def conv2d_backward_kernels(x, grad_out):
    """Gradient w.r.t. the kernel bank; shape (3,3,Ci,Co)."""
    _, h, w, ci = x.shape
    co = grad_out.shape[3]
    dk = np.empty((3, 3, ci, co), dtype=grad_out.dtype)
    for u in range(3):
        for v in range(3):
            ys, xs, yr, xr = _shift_slices(u - 1, v - 1, h, w)
            dk[u, v] = np.tensordot(
                x[:, yr, xr, :], grad_out[:, ys, xs, :], axes=([0, 1, 2], [0, 1, 2])
            )
    return dk


def maxpool2x2_forward(x):
    """2x2 max pooling with ceil semantics; odd edges padded with -inf.

    Returns (pooled, argmax) where argmax holds the in-window flat index
    (row-major u*2+v) of the first maximum, used for gradient routing.
    """
    b, h, w, c = x.shape
    ho, wo = (h + 1) // 2, (w + 1) // 2
    if h % 2 or w % 2:
        xe = np.full((b, 2 * ho, 2 * wo, c), -np.inf, dtype=x.dtype)
        xe[:, :h, :w, :] = x
    else:
        xe = x
    q00 = xe[:, 0::2, 0::2, :]
    q01 = xe[:, 0::2, 1::2, :]
    q10 = xe[:, 1::2, 0::2, :]
    q11 = xe[:, 1::2, 1::2, :]
    top = np.maximum(q00, q01)
    bottom = np.maximum(q10, q11)
    out = np.maximum(top, bottom)
    # >= comparisons keep the first maximum in row-major window order
    idx = np.where(
        top >= bottom,
        np.where(q00 >= q01, np.uint8(0), np.uint8(1)),
        np.where(q10 >= q11, np.uint8(2), np.uint8(3)),
    )
    return out, idx


def maxpool2x2_backward(idx, grad_out, h, w):
    """Route pooled gradients back to the argmax positions of an (h, w) input."""
    b, ho, wo, c = grad_out.shape
    scat = np.zeros((b, ho, wo, 4, c), dtype=grad_out.dtype)
    np.put_along_axis(scat, idx[:, :, :, None, :], grad_out[:, :, :, None, :], axis=3)
    dx = scat.reshape(b, ho, wo, 2, 2, c).transpose(0, 1, 3, 2, 4, 5)
    dx = dx.reshape(b, 2 * ho, 2 * wo, c)
    return np.ascontiguousarray(dx[:, :h, :w, :])
