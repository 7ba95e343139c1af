"""AdaIN and its graph-smoothed variant GrIN."""
from dataclasses import dataclass
from typing import Optional


from .errors import ModeError, ShapeError
from .graph import GraphStack, build_adjacency, smooth_means
from .stats import DEFAULT_EPS, compute_stats, whiten
from .tensor import as_tensor4


@dataclass
class GrinConfig:
    eps: float = DEFAULT_EPS
    mode: str = "train"
    adjacency_variant: str = "gram"
    stack: Optional[GraphStack] = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.mode not in ("train", "infer"):
            raise ValueError(f"unknown mode {self.mode!r}")


def _check_pair(x, y):
    x = as_tensor4(x, "x")
    y = as_tensor4(y, "y")
    if x.shape[:2] != y.shape[:2]:
        raise ShapeError(f"content {x.shape} and style {y.shape} differ in batch or channels")
    return x, y


def _recolor(x, y, eps, bias):
    sx = compute_stats(x, eps)
    sy = compute_stats(y, eps)
    if bias is None:
        bias = sy.mean
    return sy.std[:, :, None, None] * whiten(x, sx) + bias[:, :, None, None]


def adain(x, y, eps=DEFAULT_EPS):
    """sigma(y) * (x - mu(x)) / sigma(x) + mu(y), statistics per (n, c)."""
    x, y = _check_pair(x, y)
    return _recolor(x, y, eps, None)


def smoothed_style_means(y, cfg):
    if cfg.stack is None:
        raise ModeError("train-mode GrIN needs a GraphStack")
    mu = compute_stats(y, cfg.eps).mean
    adj = build_adjacency(y, cfg.adjacency_variant)
    return smooth_means(mu, adj, cfg.stack)


def grin(x, y, cfg):
    """Graph instance normalization.

    In train mode the style means are smoothed across the batch before they
    are used as the bias; the scale stays sigma(y). In infer mode the graph
    layers are dropped and the result is exactly ``adain(x, y, cfg.eps)``.
    """
    x, y = _check_pair(x, y)
    if cfg.mode == "infer":
        return _recolor(x, y, cfg.eps, None)
    return _recolor(x, y, cfg.eps, smoothed_style_means(y, cfg))
