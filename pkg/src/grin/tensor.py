"""Dense float64 containers and the deterministic RNG.

Feature maps are plain ``numpy`` arrays in (batch, channel, height, width)
layout; matrices are 2-D arrays. The helpers here validate and coerce them.
"""
import numpy as np

from .errors import ShapeError

Tensor4 = np.ndarray
Matrix = np.ndarray


def as_tensor4(x, name="x"):
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 4:
        raise ShapeError(f"{name}: expected rank-4 (N, C, H, W), got shape {a.shape}")
    if min(a.shape) < 1:
        raise ShapeError(f"{name}: all dimensions must be >= 1, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name}: contains non-finite values")
    return a


def as_matrix(m, name="m"):
    a = np.ascontiguousarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name}: expected a matrix, got shape {a.shape}")
    return a


def flatten_batch(x):
    """(N, C, H, W) -> (N, C*H*W), each row the row-major flattening of one instance."""
    x = as_tensor4(x)
    return x.reshape(x.shape[0], -1)


def unflatten_batch(m, shape):
    m = as_matrix(m)
    n, c, h, w = shape
    if m.shape != (n, c * h * w):
        raise ShapeError(f"cannot reshape {m.shape} into {tuple(shape)}")
    return m.reshape(n, c, h, w)


def matmul(a, b):
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    return a @ b


def _same_shape(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def elementwise(op, a, b=None):
    """Pointwise tensor arithmetic.

    ``op`` is one of ``add``, ``sub``, ``mul`` (two tensors of equal shape),
    ``scale`` (``b`` a scalar) or ``channel_mul`` / ``channel_add`` (``b`` an
    N x C matrix applied to every spatial position of its (n, c) plane).
    """
    a = as_tensor4(a, "a")
    if op == "scale":
        return a * float(b)
    if op in ("channel_mul", "channel_add"):
        m = as_matrix(b, "b")
        if m.shape != a.shape[:2]:
            raise ShapeError(f"{op}: operand {m.shape} does not match (N, C) = {a.shape[:2]}")
        m = m[:, :, None, None]
        return a * m if op == "channel_mul" else a + m
    b = as_tensor4(b, "b")
    _same_shape(a, b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown elementwise op {op!r}")


_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class Rng:
    """SplitMix64 generator.

    state_k = seed + k * 0x9E3779B97F4A7C15 (mod 2**64), output = mix(state_k)
    with the standard Stafford variant-13 finalizer. Because each draw is a
    pure function of its counter, blocks are generated vectorized and the
    integer stream is identical on every platform.
    """

    def __init__(self, seed=0):
        self.seed = int(seed) & _MASK
        self.state = self.seed

    def next_u64(self, size):
        size = int(size)
        k = np.arange(1, size + 1, dtype=np.uint64)
        z = np.uint64(self.state) + k * np.uint64(_GAMMA)
        self.state = (self.state + size * _GAMMA) & _MASK
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    def uniform(self, shape=(), low=0.0, high=1.0):
        shape = tuple(np.atleast_1d(shape)) if shape != () else ()
        n = int(np.prod(shape)) if shape else 1
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        u = low + (high - low) * u
        return u.reshape(shape) if shape else float(u[0])

    def normal(self, shape=(), scale=1.0):
        """Box-Muller transform of two uniform blocks."""
        shape = tuple(np.atleast_1d(shape)) if shape != () else ()
        n = int(np.prod(shape)) if shape else 1
        u1 = self.uniform(n)
        u2 = self.uniform(n)
        z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
        z = scale * z
        return z.reshape(shape) if shape else float(z[0])

    def integers(self, high, size=None):
        """Uniform integers in [0, high) as floor(u * high) of a 53-bit uniform."""
        n = 1 if size is None else int(size)
        u = self.uniform(n)
        out = np.minimum((u * high).astype(np.int64), high - 1)
        return int(out[0]) if size is None else out

    def choice(self, n, k):
        """k distinct indices from range(n) (partial Fisher-Yates)."""
        idx = list(range(n))
        for i in range(k):
            j = i + self.integers(n - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k]

    def spawn(self):
        return Rng(int(self.next_u64(1)[0]))
