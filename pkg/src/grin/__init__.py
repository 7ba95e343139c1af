"""Graph instance normalization (GrIN) for arbitrary style transfer."""
from .errors import FormatError, ModeError, ShapeError, StateError, TrainingError
from .graph import AdjacencyMatrix, GraphStack, build_adjacency, gcn_layer, smooth_means
from .losses import LossReport, LossWeights, content_loss, style_loss, total_loss
from .normalize import GrinConfig, adain, grin
from .stats import ChannelStats, compute_stats, whiten
from .tensor import Rng, elementwise, flatten_batch, matmul, unflatten_batch

__version__ = "0.1.0"

__all__ = [
    "AdjacencyMatrix", "ChannelStats", "FormatError", "GraphStack", "GrinConfig", "LossReport",
    "LossWeights", "ModeError", "Rng", "ShapeError", "StateError", "TrainingError", "adain",
    "build_adjacency", "compute_stats", "content_loss", "elementwise", "flatten_batch",
    "gcn_layer", "grin", "matmul", "smooth_means", "style_loss", "total_loss",
    "unflatten_batch", "whiten",
]
