"""Differentiable primitives recorded on a :class:`~grin.autodiff.Tape`.

Each function takes ``Var`` inputs, computes its value with numpy and
records the matching vector-Jacobian product. Plain-array helpers
(``pad2d``, ``conv2d_forward`` ...) are shared with the untaped code paths.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError


# -- numpy kernels ---------------------------------------------------------

def pad_index(size, pad, mode="reflect"):
    """Source index for every padded position along one axis."""
    return np.pad(np.arange(size), pad, mode=mode)


def pad2d(x, pad, mode="reflect"):
    if pad == 0:
        return x
    ih = pad_index(x.shape[2], pad, mode)
    iw = pad_index(x.shape[3], pad, mode)
    return x[:, :, ih][:, :, :, iw]


def pad2d_adjoint(g, size_hw, pad, mode="reflect"):
    if pad == 0:
        return g
    h, w = size_hw
    sh = np.eye(h)[pad_index(h, pad, mode)]
    sw = np.eye(w)[pad_index(w, pad, mode)]
    # sum_p sum_q sh[p, i] g[..., p, q] sw[q, j]
    return np.einsum("pi,ncpq,qj->ncij", sh, g, sw)


def conv2d_forward(x, w, b, pad_mode="reflect"):
    """Stride-1 'same' cross-correlation with an odd k x k kernel."""
    k = w.shape[-1]
    xp = pad2d(x, k // 2, pad_mode)
    cols = sliding_window_view(xp, (k, k), axis=(2, 3))  # n c h w i j
    out = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))  # n h w o
    return out.transpose(0, 3, 1, 2) + b[None, :, None, None]


def conv2d_backward(g, x, w, pad_mode="reflect"):
    k = w.shape[-1]
    p = k // 2
    n, c, hh, ww = x.shape
    xp = pad2d(x, p, pad_mode)
    cols = sliding_window_view(xp, (k, k), axis=(2, 3))
    gw = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))  # o c i j
    gb = g.sum(axis=(0, 2, 3))
    gxp = np.zeros(xp.shape)
    for i in range(k):
        for j in range(k):
            contrib = np.tensordot(g, w[:, :, i, j], axes=([1], [0]))  # n h w c
            gxp[:, :, i:i + hh, j:j + ww] += contrib.transpose(0, 3, 1, 2)
    gx = pad2d_adjoint(gxp, (hh, ww), p, pad_mode)
    return gx, gw, gb


def avgpool2_forward(x):
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avgpool2 needs even spatial size, got {h}x{w}")
    return x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def upsample2_forward(x):
    return x.repeat(2, axis=2).repeat(2, axis=3)


def upsample2_adjoint(g):
    n, c, h, w = g.shape
    return g.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


# -- taped primitives ------------------------------------------------------

def _tape(*vs):
    return vs[0].tape


def conv2d(x, w, b, pad_mode="reflect"):
    if x.value.shape[1] != w.value.shape[1]:
        raise ShapeError(f"conv2d: input has {x.value.shape[1]} channels, kernel expects {w.value.shape[1]}")
    out = conv2d_forward(x.value, w.value, b.value, pad_mode)
    xv, wv = x.value, w.value

    def vjp(g):
        return conv2d_backward(g, xv, wv, pad_mode)
    return _tape(x).record("conv", (x, w, b), out, vjp)


def relu(x):
    mask = x.value > 0
    return _tape(x).record("relu", (x,), np.where(mask, x.value, 0.0), lambda g: (g * mask,))


def avgpool2(x):
    return _tape(x).record("avgpool", (x,), avgpool2_forward(x.value),
                           lambda g: (upsample2_forward(g) * 0.25,))


def upsample2(x):
    return _tape(x).record("upsample", (x,), upsample2_forward(x.value),
                           lambda g: (upsample2_adjoint(g),))


def channel_mean(x):
    hw = x.value.shape[2] * x.value.shape[3]
    shape = x.value.shape

    def vjp(g):
        return (np.broadcast_to(g[:, :, None, None] / hw, shape).copy(),)
    return _tape(x).record("mean", (x,), x.value.mean(axis=(2, 3)), vjp)


def channel_std(x, eps):
    """sqrt(population variance + eps) per (n, c)."""
    hw = x.value.shape[2] * x.value.shape[3]
    d = x.value - x.value.mean(axis=(2, 3), keepdims=True)
    s = np.sqrt((d * d).mean(axis=(2, 3)) + eps)

    def vjp(g):
        return ((g / s)[:, :, None, None] * d / hw,)
    return _tape(x).record("std", (x,), s, vjp)


def whiten(x, eps):
    d = x.value - x.value.mean(axis=(2, 3), keepdims=True)
    s = np.sqrt((d * d).mean(axis=(2, 3)) + eps)[:, :, None, None]
    z = d / s

    def vjp(g):
        gm = g.mean(axis=(2, 3), keepdims=True)
        gzm = (g * z).mean(axis=(2, 3), keepdims=True)
        return ((g - gm - z * gzm) / s,)
    return _tape(x).record("whiten", (x,), z, vjp)


def channel_affine(z, scale, bias):
    """z * scale + bias with N x C scale and bias broadcast over space."""
    zv = z.value
    sv = scale.value[:, :, None, None]
    out = zv * sv + bias.value[:, :, None, None]

    def vjp(g):
        return g * sv, (g * zv).sum(axis=(2, 3)), g.sum(axis=(2, 3))
    return _tape(z, scale, bias).record("affine", (z, scale, bias), out, vjp)


def propagate(p, x):
    """Left-multiply by the constant propagation matrix ``p``."""
    return _tape(x).record("propagate", (x,), p @ x.value, lambda g: (p.T @ g,))


def matmul(a, b):
    av, bv = a.value, b.value
    if av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul: {av.shape} @ {bv.shape}")
    return _tape(a, b).record("matmul", (a, b), av @ bv, lambda g: (g @ bv.T, av.T @ g))


def diag_part(a):
    return _tape(a).record("diag", (a,), np.diag(np.diag(a.value)), lambda g: (np.diag(np.diag(g)),))


def add(a, b):
    return _tape(a, b).record("add", (a, b), a.value + b.value, lambda g: (g, g))


def sub(a, b):
    return _tape(a, b).record("sub", (a, b), a.value - b.value, lambda g: (g, -g))


def scale(a, c):
    c = float(c)
    return _tape(a).record("scale", (a,), a.value * c, lambda g: (g * c,))


def sum_squares(a):
    av = a.value
    return _tape(a).record("sumsq", (a,), np.asarray((av * av).sum()), lambda g: (2.0 * g * av,))


def mean_squares(a):
    av = a.value
    n = av.size
    return _tape(a).record("meansq", (a,), np.asarray((av * av).mean()), lambda g: (2.0 * g * av / n,))
