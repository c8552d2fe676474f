"""Layer primitives used by the detector: conv, batchnorm, pooling, dense, ReLU, softmax, loss.

All functions take and return :class:`Tensor` and record themselves on the
active tape. Arrays are NCHW.
"""

import threading
from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import UsageError
from .tensor import Tensor, record

BN_EPS = 1e-5
BN_MOMENTUM = 0.1

_trace = threading.local()


@contextmanager
def branch_trace():
    """Collect the piecewise branch taken by every ReLU and max-pool call.

    Two forward passes that yield equal traces lie on the same smooth piece
    of the network function; the gradient checker uses this to skip samples
    whose finite-difference step would straddle a kink.
    """
    log = []
    prev = getattr(_trace, "log", None)
    _trace.log = log
    try:
        yield log
    finally:
        _trace.log = prev


def _note(arr):
    log = getattr(_trace, "log", None)
    if log is not None:
        log.append(np.packbits(arr.reshape(-1)) if arr.dtype == bool else arr.copy())


def _check_ndim(x, ndim, op):
    if x.ndim != ndim:
        raise UsageError(f"{op}: expected a {ndim}-d tensor, got shape {list(x.shape)}")


def conv2d(x, weight, bias=None, stride=1, padding=1):
    """2-D cross-correlation of ``x[N,C,H,W]`` with ``weight[O,C,kh,kw]``.

    Output spatial size is ``(H + 2*padding - kh) / stride + 1`` and must be
    integral.
    """
    _check_ndim(x, 4, "conv2d")
    _check_ndim(weight, 4, "conv2d weight")
    n, c, h, w = x.shape
    o, wc, kh, kw = weight.shape
    if wc != c:
        raise UsageError(f"conv2d: input has {c} channels but weight expects {wc}")
    if bias is not None and bias.shape != (o,):
        raise UsageError(f"conv2d: bias shape {list(bias.shape)} does not match {o} output channels")
    if stride < 1 or padding < 0:
        raise UsageError(f"conv2d: stride must be >= 1 and padding >= 0 (got {stride}, {padding})")
    hp, wp = h + 2 * padding, w + 2 * padding
    if kh > hp or kw > wp:
        raise UsageError(f"conv2d: kernel {kh}x{kw} does not fit padded input {hp}x{wp}")
    if (hp - kh) % stride or (wp - kw) % stride:
        raise UsageError(
            f"conv2d: non-integer output size for input {h}x{w}, kernel {kh}x{kw}, "
            f"stride {stride}, padding {padding}"
        )
    ho, wo = (hp - kh) // stride + 1, (wp - kw) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    # rows: (n, ho, wo); cols: (c, kh, kw)
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, c * kh * kw)
    wmat = weight.data.reshape(o, -1)
    out = cols @ wmat.T
    if bias is not None:
        out += bias.data
    out = np.ascontiguousarray(out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2))

    def bw(g):
        g2 = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(-1, o)
        gw = (g2.T @ cols).reshape(weight.shape) if weight.requires_grad else None
        gb = g2.sum(axis=0) if bias is not None and bias.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (g2 @ wmat).reshape(n, ho, wo, c, kh, kw)
            gxp = np.zeros(xp.shape, dtype=x.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                        gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            gx = gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    if bias is None:
        return record("conv2d", inputs, out, lambda g: bw(g)[:2])
    return record("conv2d", inputs, out, bw)


def batchnorm2d(x, gamma, beta, running_mean, running_var, training, momentum=BN_MOMENTUM, eps=BN_EPS):
    """Per-channel batch normalization.

    Training mode normalizes with the biased batch variance and updates the
    running statistics in place (running variance uses the unbiased
    estimate). Inference mode uses the running statistics.
    """
    _check_ndim(x, 4, "batchnorm2d")
    n, c, h, w = x.shape
    for name, t in (("gamma", gamma), ("beta", beta), ("running_mean", running_mean), ("running_var", running_var)):
        if t.shape != (c,):
            raise UsageError(f"batchnorm2d: {name} shape {list(t.shape)} does not match {c} channels")
    dt = x.dtype
    bshape = (1, c, 1, 1)
    if training:
        count = n * h * w
        if count < 2:
            raise UsageError("batchnorm2d: training mode needs N*H*W >= 2 values per channel")
        mu = x.data.mean(axis=(0, 2, 3), dtype=dt)
        centered = x.data - mu.reshape(bshape)
        var = (centered * centered).mean(axis=(0, 2, 3), dtype=dt)
        invstd = (1.0 / np.sqrt(var + dt.type(eps))).astype(dt)
        xhat = centered * invstd.reshape(bshape)
        m = dt.type(momentum)
        running_mean.data = ((1 - m) * running_mean.data + m * mu).astype(running_mean.dtype)
        unbiased = var * dt.type(count / (count - 1))
        running_var.data = ((1 - m) * running_var.data + m * unbiased).astype(running_var.dtype)
    else:
        invstd = (1.0 / np.sqrt(running_var.data.astype(dt) + dt.type(eps))).astype(dt)
        xhat = (x.data - running_mean.data.astype(dt).reshape(bshape)) * invstd.reshape(bshape)
        count = None
    out = gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape)

    def bw(g):
        ggamma = (g * xhat).sum(axis=(0, 2, 3)) if gamma.requires_grad else None
        gbeta = g.sum(axis=(0, 2, 3)) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            gxhat = g * gamma.data.reshape(bshape)
            if training:
                s1 = gxhat.sum(axis=(0, 2, 3)).reshape(bshape)
                s2 = (gxhat * xhat).sum(axis=(0, 2, 3)).reshape(bshape)
                gx = (invstd.reshape(bshape) / dt.type(count)) * (dt.type(count) * gxhat - s1 - xhat * s2)
            else:
                gx = gxhat * invstd.reshape(bshape)
        return gx, ggamma, gbeta

    return record("batchnorm2d", (x, gamma, beta), out.astype(dt), bw)


def maxpool2d(x, size=2, stride=2):
    """Non-overlapping max pooling; the gradient goes to the first maximum in scan order."""
    _check_ndim(x, 4, "maxpool2d")
    if size != stride:
        raise UsageError(f"maxpool2d: only size == stride is supported (got {size}, {stride})")
    n, c, h, w = x.shape
    if h % size or w % size:
        raise UsageError(f"maxpool2d: spatial dims {h}x{w} not divisible by pool size {size}")
    ho, wo = h // size, w // size
    win = x.data.reshape(n, c, ho, size, wo, size).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, size * size)
    idx = win.argmax(axis=-1)
    _note(idx)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def bw(g):
        gwin = np.zeros(win.shape, dtype=x.dtype)
        np.put_along_axis(gwin, idx[..., None], g[..., None], axis=-1)
        gx = gwin.reshape(n, c, ho, wo, size, size).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
        return (gx,)

    return record("maxpool2d", (x,), np.ascontiguousarray(out), bw)


def linear(x, weight, bias=None):
    """``x @ weight.T + bias`` for ``x[N,in]``, ``weight[out,in]``."""
    _check_ndim(x, 2, "linear")
    _check_ndim(weight, 2, "linear weight")
    if x.shape[1] != weight.shape[1]:
        raise UsageError(f"linear: input has {x.shape[1]} features but weight expects {weight.shape[1]}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise UsageError(f"linear: bias shape {list(bias.shape)} does not match {weight.shape[0]} outputs")
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data

    def bw(g):
        gx = g @ weight.data if x.requires_grad else None
        gw = g.T @ x.data if weight.requires_grad else None
        gb = g.sum(axis=0) if bias is not None and bias.requires_grad else None
        return gx, gw, gb

    if bias is None:
        return record("linear", (x, weight), out, lambda g: bw(g)[:2])
    return record("linear", (x, weight, bias), out, bw)


def relu(x):
    mask = x.data > 0
    _note(mask)
    return record("relu", (x,), np.where(mask, x.data, x.dtype.type(0)), lambda g: (g * mask,))


def flatten(x):
    out = x.data.reshape(x.shape[0], -1)
    return record("flatten", (x,), out, lambda g: (g.reshape(x.shape),))


def _softmax(z):
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax(logits):
    """Row-wise softmax over the last axis, computed after subtracting the row max."""
    _check_ndim(logits, 2, "softmax")
    s = _softmax(logits.data)

    def bw(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return record("softmax", (logits,), s, bw)


def cross_entropy_loss(logits, labels):
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    _check_ndim(logits, 2, "cross_entropy_loss")
    n, k = logits.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != n:
        raise UsageError(f"cross_entropy_loss: {labels.shape[0]} labels for a batch of {n}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise UsageError(f"cross_entropy_loss: labels must lie in [0, {k}), got {labels.tolist()}")
    z = logits.data
    shifted = z - z.max(axis=-1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=-1))
    rows = np.arange(n)
    nll = logsumexp - shifted[rows, labels]
    loss = np.asarray(nll.mean(), dtype=logits.dtype)

    def bw(g):
        grad = _softmax(z)
        grad[rows, labels] -= 1
        return (grad * (g / logits.dtype.type(n)),)

    return record("cross_entropy", (logits,), loss, bw)
