"""A small reverse-mode gradient tape.

Every differentiable primitive records one node holding its inputs, its
output and a vector-Jacobian product. ``Tape.backward`` replays the nodes
in reverse recording order, which is a reverse topological order because
inputs always exist before the node that consumes them.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import StateError


class Var:
    __slots__ = ("value", "tape", "index", "requires_grad")

    def __init__(self, value, tape, index, requires_grad):
        self.value = value
        self.tape = tape
        self.index = index
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape}, requires_grad={self.requires_grad})"


@dataclass
class Node:
    kind: str
    inputs: tuple
    out: Var
    vjp: Callable


class Tape:
    def __init__(self):
        self.nodes = []
        self.params = {}
        self.visited = []
        self._count = 0

    def _new(self, value, requires_grad):
        v = Var(np.asarray(value, dtype=np.float64), self, self._count, requires_grad)
        self._count += 1
        return v

    def param(self, name, value):
        if name in self.params:
            raise KeyError(f"parameter {name!r} registered twice")
        v = self._new(value, True)
        self.params[name] = v
        return v

    def const(self, value):
        if isinstance(value, Var):
            return value
        return self._new(value, False)

    def record(self, kind, inputs, value, vjp):
        requires = any(i.requires_grad for i in inputs)
        out = self._new(value, requires)
        if requires:
            self.nodes.append(Node(kind, tuple(inputs), out, vjp))
        return out

    def clear(self):
        self.nodes = []

    def backward(self, loss, seed=1.0):
        """Gradients of ``seed * loss`` for every registered parameter.

        Parameters the loss does not reach get a zero gradient. The tape is
        cleared afterwards.
        """
        if not self.nodes or loss.tape is not self:
            raise StateError("backward() needs a completed forward pass on this tape")
        grads = {loss.index: np.full(loss.value.shape, float(seed))}
        self.visited = []
        for node in reversed(self.nodes):
            g = grads.pop(node.out.index, None)
            if g is None:
                continue
            self.visited.append(node.out.index)
            for inp, gi in zip(node.inputs, node.vjp(g)):
                if gi is None or not inp.requires_grad:
                    continue
                if inp.index in grads:
                    grads[inp.index] = grads[inp.index] + gi
                else:
                    grads[inp.index] = gi
        out = {}
        for name, v in self.params.items():
            g = grads.get(v.index)
            out[name] = np.zeros_like(v.value) if g is None else np.asarray(g, dtype=np.float64).reshape(v.value.shape)
        self.clear()
        return out


def finite_diff_grad(f, params, h=1e-5, coords=None):
    """Central differences (f(p + h) - f(p - h)) / 2h per coordinate.

    ``params`` maps names to arrays and is left unchanged. ``coords`` may map
    a name to a sequence of flat indices to restrict the sweep; unlisted
    coordinates come back as NaN.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    work = {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}
    grads = {}
    for name, arr in work.items():
        flat = arr.reshape(-1)
        if coords is None or name not in coords:
            idx = range(flat.size) if coords is None else ()
        else:
            idx = coords[name]
        g = np.full(flat.size, np.nan) if coords is not None else np.zeros(flat.size)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = f(work)
            flat[i] = orig - h
            fm = f(work)
            flat[i] = orig
            g[i] = (fp - fm) / (2.0 * h)
        grads[name] = g.reshape(arr.shape)
    return grads


def directional_fd(f, params, direction, h=1e-5):
    """Central difference of f along ``direction`` (a dict like ``params``)."""
    plus = {k: params[k] + h * direction.get(k, 0.0) for k in params}
    minus = {k: params[k] - h * direction.get(k, 0.0) for k in params}
    return (f(plus) - f(minus)) / (2.0 * h)
