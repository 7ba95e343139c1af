"""Per-instance, per-channel feature statistics and whitening."""
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .tensor import as_tensor4

DEFAULT_EPS = 1e-5


@dataclass(frozen=True)
class ChannelStats:
    """Mean and eps-guarded standard deviation, both N x C.

    ``std`` already includes the guard: std = sqrt(var + eps).
    """

    mean: np.ndarray
    std: np.ndarray
    eps: float

    @property
    def shape(self):
        return self.mean.shape


def channel_mean(x):
    return x.mean(axis=(2, 3))


def channel_var(x):
    """Population variance over the spatial plane (divides by H*W)."""
    d = x - x.mean(axis=(2, 3), keepdims=True)
    return (d * d).mean(axis=(2, 3))


def compute_stats(x, eps=DEFAULT_EPS):
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x = as_tensor4(x)
    return ChannelStats(channel_mean(x), np.sqrt(channel_var(x) + eps), float(eps))


def whiten(x, stats):
    x = as_tensor4(x)
    if stats.mean.shape != x.shape[:2]:
        raise ShapeError(f"stats shape {stats.mean.shape} does not match (N, C) = {x.shape[:2]}")
    return (x - stats.mean[:, :, None, None]) / stats.std[:, :, None, None]
