"""Adam, the training loop and the loss trace."""
import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape
from .checkpoint import save_checkpoint
from .data import generate_batch
from .errors import TrainingError
from .graph import GraphStack
from .losses import LossWeights
from .net import Batch, DecoderParams, default_encoder, forward_loss
from .normalize import GrinConfig
from .tensor import Rng

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def to_entries(self):
        out = {"adam.lr": np.float64(self.lr), "adam.beta1": np.float64(self.beta1),
               "adam.beta2": np.float64(self.beta2), "adam.eps": np.float64(self.eps_opt),
               "adam.t": np.float64(self.t)}
        for k in self.m:
            out[f"adam.m/{k}"] = self.m[k]
            out[f"adam.v/{k}"] = self.v[k]
        return out

    @classmethod
    def from_entries(cls, e):
        if not e:
            return cls()
        s = cls(float(e["adam.lr"]), float(e["adam.beta1"]), float(e["adam.beta2"]),
                float(e["adam.eps"]), int(e["adam.t"]))
        for k, arr in e.items():
            if k.startswith("adam.m/"):
                s.m[k[7:]] = arr.copy()
            elif k.startswith("adam.v/"):
                s.v[k[7:]] = arr.copy()
        return s


def adam_step(params, grads, state):
    """One bias-corrected Adam update of ``params`` (a name -> array dict) in place."""
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {k!r}", path=k)
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for k, p in params.items():
        g = grads.get(k)
        if g is None:
            continue
        if g.shape != p.shape:
            raise ValueError(f"gradient for {k!r} has shape {g.shape}, parameter {p.shape}")
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * (g * g)
        mhat = state.m[k] / bc1
        vhat = state.v[k] / bc2
        p -= state.lr * mhat / (np.sqrt(vhat) + state.eps_opt)
    return params, state


@dataclass
class TrainConfig:
    batch_size: int = 8
    image_size: int = 32
    steps: int = 500
    lam: float = 10.0
    lr: float = 1e-4
    seed: int = 0
    mode: str = "train"
    adjacency_variant: str = "gram"
    activation: str = "none"
    diagonal_theta: bool = False
    num_graph_layers: int = 2
    eps: float = 1e-5
    reduction: str = "sum"
    detach_target: bool = False
    checkpoint_path: str = None
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.image_size < 8 or self.image_size % 8:
            raise ValueError("image_size must be a positive multiple of 8")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")


@dataclass
class TrainResult:
    params: dict
    state: AdamState
    trace: list


def init_params(cfg):
    """Decoder and graph weights drawn from the run seed."""
    rng = Rng(cfg.seed)
    params = dict(DecoderParams.init(rng).named())
    c = default_encoder().out_channels
    stack = GraphStack.init(c, rng, num_layers=cfg.num_graph_layers)
    for i, th in enumerate(stack.layers):
        params[f"graph.theta.{i}"] = th
    return params


def graph_stack_from(params, cfg):
    layers = []
    while f"graph.theta.{len(layers)}" in params:
        layers.append(params[f"graph.theta.{len(layers)}"])
    if not layers:
        return None
    return GraphStack(layers, activation=cfg.activation, diagonal=cfg.diagonal_theta)


def train(cfg, params=None, state=None):
    params = {k: v.copy() for k, v in (params or init_params(cfg)).items()}
    state = state or AdamState(lr=cfg.lr)
    weights = LossWeights(lam=cfg.lam, reduction=cfg.reduction)
    data_rng = Rng(cfg.seed ^ 0xDA7A)
    trace = []
    for step in range(1, cfg.steps + 1):
        content, style, _ = generate_batch(data_rng, cfg.batch_size, cfg.image_size)
        batch = Batch.encode(content, style)
        gcfg = GrinConfig(cfg.eps, cfg.mode, cfg.adjacency_variant, graph_stack_from(params, cfg))
        tape = Tape()
        loss, report = forward_loss(tape, DecoderParams.from_named(params), batch, gcfg,
                                    weights, detach_target=cfg.detach_target)
        if not np.isfinite(report.total):
            raise TrainingError(f"non-finite loss at step {step}", step=step)
        grads = tape.backward(loss)
        try:
            adam_step(params, grads, state)
        except TrainingError as e:
            raise TrainingError(f"step {step}: {e}", step=step, path=e.path) from None
        trace.append((step, report))
        if step % 10 == 0 or step == 1:
            log.info("step %d content %.4g style %.4g total %.4g", step,
                     report.content, report.style, report.total)
        if cfg.checkpoint_path and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            save_checkpoint(params, state.to_entries(), cfg.checkpoint_path)
    if cfg.checkpoint_path:
        save_checkpoint(params, state.to_entries(), cfg.checkpoint_path)
    return TrainResult(params, state, trace)


def trace_csv(trace):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "content", "style", "total"])
    for step, r in trace:
        w.writerow([step, repr(r.content), repr(r.style), repr(r.total)])
    return buf.getvalue()


def moving_average(values, window=10):
    v = np.asarray(values, dtype=np.float64)
    c = np.convolve(v, np.ones(window) / window, mode="valid")
    return c
