"""Style-similarity graph over a mini-batch and graph-convolutional smoothing.

Each style instance is one node. The adjacency is the Gram matrix of the
flattened encoder features; nodes are smoothed with the symmetric
propagation matrix P = D^-1/2 A D^-1/2.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ModeError, ShapeError
from .tensor import as_matrix, flatten_batch

EPS_DEGREE = 1e-8


@dataclass(frozen=True)
class AdjacencyMatrix:
    a_tilde: np.ndarray
    degree: np.ndarray
    propagation: np.ndarray

    @property
    def n(self):
        return self.a_tilde.shape[0]


def build_adjacency(y, variant="gram", eps_degree=EPS_DEGREE):
    """Adjacency of the batch ``y`` (N, C, H, W).

    ``gram`` uses X' X'^T of the flattened features directly; its diagonal
    plays the role of the self-loop, so no identity is added. ``cosine``
    unit-normalizes the rows first.
    """
    feats = flatten_batch(y)
    if variant == "cosine":
        norms = np.sqrt((feats * feats).sum(axis=1, keepdims=True))
        feats = feats / np.maximum(norms, np.sqrt(eps_degree))
    elif variant != "gram":
        raise ValueError(f"unknown adjacency variant {variant!r}")
    a = feats @ feats.T
    a = 0.5 * (a + a.T)
    return adjacency_from_matrix(a, eps_degree)


def adjacency_from_matrix(a, eps_degree=EPS_DEGREE):
    a = as_matrix(a, "a_tilde")
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"adjacency must be square, got {a.shape}")
    degree = np.maximum(a.sum(axis=1), eps_degree)
    inv_sqrt = 1.0 / np.sqrt(degree)
    p = inv_sqrt[:, None] * a * inv_sqrt[None, :]
    return AdjacencyMatrix(a, degree, 0.5 * (p + p.T))


@dataclass
class GraphStack:
    """Learnable graph-layer weights.

    With ``diagonal=True`` each theta acts as one scalar per channel (only
    its diagonal is used and updated).
    """

    layers: list
    activation: str = "none"
    mode: str = "train"
    diagonal: bool = False

    def __post_init__(self):
        self.layers = [as_matrix(t, "theta") for t in self.layers]
        for t in self.layers:
            if t.shape[0] != t.shape[1]:
                raise ShapeError(f"theta must be square, got {t.shape}")
            if not np.all(np.isfinite(t)):
                raise ValueError("theta contains non-finite values")
        if self.activation not in ("none", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.mode not in ("train", "infer"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def num_layers(self):
        return len(self.layers)

    @property
    def channels(self):
        return self.layers[0].shape[0]

    def effective(self, i):
        t = self.layers[i]
        return np.diag(np.diag(t)) if self.diagonal else t

    @classmethod
    def identity(cls, channels, num_layers=2, **kwargs):
        return cls([np.eye(channels) for _ in range(num_layers)], **kwargs)

    @classmethod
    def init(cls, channels, rng, num_layers=2, noise=1e-2, **kwargs):
        """Identity plus zero-mean Gaussian noise, so training starts near AdaIN."""
        layers = [np.eye(channels) + rng.normal((channels, channels), scale=noise)
                  for _ in range(num_layers)]
        return cls(layers, **kwargs)


def gcn_layer(nodes, adj, theta):
    """One first-order graph convolution, P @ nodes @ theta."""
    nodes = as_matrix(nodes, "nodes")
    theta = as_matrix(theta, "theta")
    if nodes.shape[0] != adj.n:
        raise ShapeError(f"{nodes.shape[0]} nodes but adjacency is {adj.n} x {adj.n}")
    if theta.shape[0] != nodes.shape[1]:
        raise ShapeError(f"theta {theta.shape} incompatible with nodes {nodes.shape}")
    return adj.propagation @ nodes @ theta


def smooth_means(mu_y, adj, stack):
    """Pass the N x C style means through every layer of ``stack``."""
    if stack.mode != "train":
        raise ModeError("smooth_means is only used in train mode; inference uses the raw means")
    h = as_matrix(mu_y, "mu_y")
    for i in range(stack.num_layers):
        h = gcn_layer(h, adj, stack.effective(i))
        if stack.activation == "relu" and i < stack.num_layers - 1:
            h = np.maximum(h, 0.0)
    return h
