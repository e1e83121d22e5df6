"""Reverse-mode automatic differentiation over dense numpy arrays.

Covers exactly the operations needed to train the two reference
architectures: matmul, broadcasting add, 3x3 same-padding convolution,
2x2 max pooling, LeakyReLU, inverted dropout, a fused softmax
cross-entropy, an L2 penalty, and Adam.

Gradients are recorded on an explicit :class:`Tape`: every op appends a
backward rule, and replaying the rules in reverse recording order
accumulates gradients into the participating tensors. Training runs in
float32 by default; gradient-check tests build float64 tensors.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .errors import DimensionError, ParameterError

DEFAULT_DTYPE = np.float32


class Tensor:
    """Dense n-dimensional value array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        name = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{flag}{name})"


class Tape:
    """Ordered record of operations; backward replays it in reverse."""

    def __init__(self):
        self._entries = []

    def record(self, backward_fn):
        self._entries.append(backward_fn)

    def __len__(self):
        return len(self._entries)

    def backward(self, loss: Tensor):
        if loss.data.size != 1:
            raise DimensionError(
                f"backward expects a scalar loss, got shape {loss.shape}"
            )
        loss.grad = np.ones_like(loss.data)
        for fn in reversed(self._entries):
            fn()


def _accum(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _result(data, *inputs, tape=None):
    out = Tensor(data)
    out.requires_grad = tape is not None and any(t.requires_grad for t in inputs)
    return out


def matmul(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    """Matrix product a[m,k] @ b[k,n]."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul: incompatible shapes {a.shape} and {b.shape}"
        )
    out = _result(a.data @ b.data, a, b, tape=tape)
    if out.requires_grad:

        def backward():
            g = out.grad
            if a.requires_grad:
                _accum(a, g @ b.data.T)
            if b.requires_grad:
                _accum(b, a.data.T @ g)

        tape.record(backward)
    return out


def add(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    """Elementwise sum with numpy broadcasting (used for biases)."""
    out = _result(a.data + b.data, a, b, tape=tape)
    if out.requires_grad:

        def backward():
            g = out.grad
            if a.requires_grad:
                _accum(a, _unbroadcast(g, a.shape))
            if b.requires_grad:
                _accum(b, _unbroadcast(g, b.shape))

        tape.record(backward)
    return out


def reshape(x: Tensor, shape, tape: Tape | None = None) -> Tensor:
    out = _result(x.data.reshape(shape), x, tape=tape)
    if out.requires_grad:

        def backward():
            _accum(x, out.grad.reshape(x.shape))

        tape.record(backward)
    return out


def leaky_relu(x: Tensor, tape: Tape | None = None) -> Tensor:
    """x if x > 0 else 0.1*x; at x == 0 the negative-branch slope applies."""
    d = x.data
    out = _result(np.where(d > 0, d, d * d.dtype.type(0.1)), x, tape=tape)
    if out.requires_grad:

        def backward():
            slope = np.where(d > 0, d.dtype.type(1.0), d.dtype.type(0.1))
            _accum(x, out.grad * slope)

        tape.record(backward)
    return out


def dropout(
    x: Tensor,
    rate: float,
    rng: np.random.Generator | None = None,
    enabled: bool = True,
    tape: Tape | None = None,
) -> Tensor:
    """Inverted dropout: zero with probability `rate`, scale survivors by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
    if not enabled or rate == 0.0:
        return x
    if rng is None:
        raise ParameterError("dropout with rate > 0 needs a random generator")
    keep = 1.0 - rate
    mask = (rng.random(x.shape) >= rate).astype(x.data.dtype)
    mask /= x.data.dtype.type(keep)
    out = _result(x.data * mask, x, tape=tape)
    if out.requires_grad:

        def backward():
            _accum(x, out.grad * mask)

        tape.record(backward)
    return out


def _as_batched_image(x: Tensor):
    if x.data.ndim == 3:
        return x.data[None], True
    if x.data.ndim == 4:
        return x.data, False
    raise DimensionError(
        f"expected a (h,w,c) or (n,h,w,c) tensor, got shape {x.shape}"
    )


def conv2d(
    x: Tensor, kernel: Tensor, bias: Tensor, tape: Tape | None = None
) -> Tensor:
    """3x3 cross-correlation with 'same' zero padding plus per-channel bias."""
    xd, single = _as_batched_image(x)
    if kernel.data.ndim != 4 or kernel.shape[:2] != (3, 3):
        raise DimensionError(f"conv2d kernels must be (3,3,cin,cout), got {kernel.shape}")
    if xd.shape[3] != kernel.shape[2]:
        raise DimensionError(
            f"conv2d: input has {xd.shape[3]} channels, kernels expect {kernel.shape[2]}"
        )
    if bias.shape != (kernel.shape[3],):
        raise DimensionError(
            f"conv2d: bias shape {bias.shape} does not match {kernel.shape[3]} output channels"
        )
    xd = np.ascontiguousarray(xd)
    out_d = kernels.conv2d_forward(xd, kernel.data, bias.data)
    out = _result(out_d[0] if single else out_d, x, kernel, bias, tape=tape)
    if out.requires_grad:

        def backward():
            g = np.ascontiguousarray(out.grad[None] if single else out.grad)
            if x.requires_grad:
                dx = kernels.conv2d_backward_input(g, kernel.data)
                _accum(x, dx[0] if single else dx)
            if kernel.requires_grad:
                _accum(kernel, kernels.conv2d_backward_kernels(xd, g))
            if bias.requires_grad:
                _accum(bias, g.sum(axis=(0, 1, 2)))

        tape.record(backward)
    return out


def maxpool2x2(x: Tensor, tape: Tape | None = None) -> Tensor:
    """2x2 max pooling; odd spatial edges are padded with -inf (ceil output)."""
    xd, single = _as_batched_image(x)
    h, w = xd.shape[1], xd.shape[2]
    xd = np.ascontiguousarray(xd)
    out_d, idx = kernels.maxpool2x2_forward(xd)
    out = _result(out_d[0] if single else out_d, x, tape=tape)
    if out.requires_grad:

        def backward():
            g = np.ascontiguousarray(out.grad[None] if single else out.grad)
            dx = kernels.maxpool2x2_backward(idx, g, h, w)
            _accum(x, dx[0] if single else dx)

        tape.record(backward)
    return out


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stabilized softmax on a plain array."""
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_cross_entropy(
    logits: Tensor, target_class, tape: Tape | None = None
) -> Tensor:
    """Mean of -log(softmax(logits)[target]) over the batch.

    `target_class` uses 1-based class indices (a scalar for a single
    (C,) logits vector, or an int array for (n,C) logits).
    """
    ld = logits.data
    if ld.ndim == 1:
        ld = ld[None]
    elif ld.ndim != 2:
        raise DimensionError(f"logits must be (C,) or (n,C), got {logits.shape}")
    targets = np.atleast_1d(np.asarray(target_class, dtype=np.int64))
    if targets.shape != (ld.shape[0],):
        raise DimensionError(
            f"got {targets.shape[0]} targets for {ld.shape[0]} logit rows"
        )
    n, c = ld.shape
    if targets.min() < 1 or targets.max() > c:
        raise ParameterError(
            f"target classes must lie in 1..{c}, got range "
            f"[{targets.min()}, {targets.max()}]"
        )
    idx = targets - 1
    shifted = ld - ld.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    losses = log_z - shifted[np.arange(n), idx]
    out = _result(np.asarray(losses.mean(), dtype=ld.dtype), logits, tape=tape)
    if out.requires_grad:

        def backward():
            p = softmax(ld, axis=1)
            p[np.arange(n), idx] -= 1.0
            g = p * (out.grad / n)
            _accum(logits, g.reshape(logits.shape))

        tape.record(backward)
    return out


def l2_penalty(params, lam: float, tape: Tape | None = None) -> Tensor:
    """lam * sum of squared entries over `params`; gradient is 2*lam*w."""
    if lam < 0:
        raise ParameterError(f"l2 weight must be >= 0, got {lam}")
    params = list(params)
    total = 0.0
    for p in params:
        total += float(np.square(p.data, dtype=np.float64).sum())
    dtype = params[0].dtype if params else DEFAULT_DTYPE
    out = _result(np.asarray(lam * total, dtype=dtype), *params, tape=tape)
    if lam > 0 and out.requires_grad:

        def backward():
            scale = 2.0 * lam * float(out.grad)
            for p in params:
                if p.requires_grad:
                    _accum(p, p.data * p.data.dtype.type(scale))

        tape.record(backward)
    return out


class Adam:
    """Adam with bias correction (lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad if p.grad is not None else 0.0
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            m_hat = m / bc1
            v_hat = v / bc2
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(
                p.data.dtype, copy=False
            )


def glorot_uniform(shape, fan_in, fan_out, rng, dtype=DEFAULT_DTYPE):
    """Uniform Glorot initialization on [-limit, limit]."""
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)
