"""Content loss, multi-layer style loss and their weighted sum."""
from dataclasses import dataclass


from .errors import ShapeError
from .stats import DEFAULT_EPS, compute_stats
from .tensor import as_tensor4

PAPER_LAMBDA = 10.0


@dataclass(frozen=True)
class LossWeights:
    lam: float = PAPER_LAMBDA
    style_layers: tuple = (0, 1, 2, 3)
    reduction: str = "sum"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if len(self.style_layers) < 1:
            raise ValueError("at least one style layer is required")
        if self.reduction not in ("sum", "mean"):
            raise ValueError(f"unknown reduction {self.reduction!r}")


@dataclass(frozen=True)
class LossReport:
    content: float
    style: float
    total: float
    per_layer_style: tuple = ()


def _reduce(sq, reduction):
    return float(sq.sum()) if reduction == "sum" else float(sq.mean())


def content_loss(reencoded_t, t, reduction="sum"):
    a = as_tensor4(reencoded_t, "reencoded_t")
    b = as_tensor4(t, "t")
    if a.shape != b.shape:
        raise ShapeError(f"content_loss: {a.shape} vs {b.shape}")
    d = a - b
    return _reduce(d * d, reduction)


def style_loss(output_feats, style_feats, eps=DEFAULT_EPS, reduction="sum"):
    """Returns (total, per-layer list) of squared mean and std differences."""
    if len(output_feats) != len(style_feats):
        raise ShapeError(f"style_loss: {len(output_feats)} output layers vs {len(style_feats)} style layers")
    per_layer = []
    for o, s in zip(output_feats, style_feats):
        so = compute_stats(o, eps)
        ss = compute_stats(s, eps)
        if so.shape != ss.shape:
            raise ShapeError(f"style_loss: layer stats {so.shape} vs {ss.shape}")
        dm = so.mean - ss.mean
        ds = so.std - ss.std
        per_layer.append(_reduce(dm * dm, reduction) + _reduce(ds * ds, reduction))
    return float(sum(per_layer)), per_layer


def total_loss(content, style, w=LossWeights()):
    if content < 0 or style < 0:
        raise ValueError("loss components must be nonnegative")
    return content + w.lam * style


def make_report(content, style, w, per_layer=()):
    return LossReport(content, style, total_loss(content, style, w), tuple(per_layer))
