"""Procedural content/style image pairs.

Content images are a few flat-colored rectangles and discs on a flat
background. Style images come from a small number of texture families
(clusters); instances of one cluster share palette and texture type and
differ only by jitter, so a mini-batch has genuine style neighbours.
"""
from dataclasses import dataclass

import numpy as np


# palette A, palette B, texture kind, base frequency (cycles per image), angle
STYLE_CLUSTERS = (
    ((0.90, 0.25, 0.10), (1.00, 0.85, 0.20), "stripes", 3.0, 0.0),
    ((0.05, 0.20, 0.70), (0.40, 0.90, 0.95), "stripes", 7.0, np.pi / 4),
    ((0.05, 0.30, 0.05), (0.55, 0.85, 0.30), "checker", 4.0, 0.0),
    ((0.35, 0.05, 0.45), (0.95, 0.90, 0.95), "rings", 5.0, 0.0),
)


@dataclass(frozen=True)
class SyntheticPair:
    content: np.ndarray  # (3, H, W) in [0, 1]
    style: np.ndarray
    cluster: int


def _grid(size):
    c = (np.arange(size) + 0.5) / size
    return np.meshgrid(c, c, indexing="ij")


def make_content(rng, size):
    img = np.empty((3, size, size))
    img[:] = rng.uniform(3)[:, None, None]
    yy, xx = _grid(size)
    for _ in range(2 + rng.integers(3)):
        color = rng.uniform(3)
        cy, cx = rng.uniform(2, 0.15, 0.85)
        r = rng.uniform((), 0.08, 0.3)
        if rng.uniform() < 0.5:
            mask = (np.abs(yy - cy) < r) & (np.abs(xx - cx) < r * rng.uniform((), 0.5, 1.5))
        else:
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 < r * r
        img[:, mask] = color[:, None]
    return img


def make_style(rng, size, cluster):
    pa, pb, kind, freq, angle = STYLE_CLUSTERS[cluster]
    pa = np.asarray(pa) + rng.uniform(3, -0.08, 0.08)
    pb = np.asarray(pb) + rng.uniform(3, -0.08, 0.08)
    f = 2.0 * np.pi * freq * rng.uniform((), 0.9, 1.1)
    angle = angle + rng.uniform((), -0.2, 0.2)
    phase = rng.uniform((), 0.0, 2.0 * np.pi)
    yy, xx = _grid(size)
    if kind == "stripes":
        s = np.sin(f * (xx * np.cos(angle) + yy * np.sin(angle)) + phase)
    elif kind == "checker":
        s = np.sin(f * xx + phase) * np.sin(f * yy + phase)
    else:
        s = np.sin(f * np.hypot(xx - 0.5, yy - 0.5) + phase)
    m = 0.5 + 0.5 * s
    img = pa[:, None, None] * (1.0 - m) + pb[:, None, None] * m
    img = img + rng.normal((3, size, size), scale=0.03)
    return np.clip(img, 0.0, 1.0)


def generate_pair(rng, size, cluster=None):
    if cluster is None:
        cluster = rng.integers(len(STYLE_CLUSTERS))
    return SyntheticPair(make_content(rng, size), make_style(rng, size, cluster), int(cluster))


def generate_batch(rng, batch, size, clusters=None):
    """Stacked (content, style, cluster ids) for ``batch`` pairs."""
    if clusters is None:
        clusters = [None] * batch
    pairs = [generate_pair(rng, size, c) for c in clusters]
    return (np.stack([p.content for p in pairs]), np.stack([p.style for p in pairs]),
            [p.cluster for p in pairs])
