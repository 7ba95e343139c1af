"""Fixed random encoder, trainable decoder and the taped training objective.

The encoder stands in for a pretrained perceptual network: four blocks of
3x3 conv + ReLU with channels 8, 16, 32, 64 and 2x average pooling between
blocks. Its weights come from a fixed seed and are never trained, but the
tape still differentiates through it so losses measured on re-encoded
decoder outputs reach the decoder.
"""
from dataclasses import dataclass

import numpy as np

from . import ops
from .autodiff import Tape, Var
from .errors import ShapeError
from .graph import build_adjacency
from .losses import LossReport, LossWeights, total_loss
from .normalize import GrinConfig
from .stats import compute_stats
from .tensor import Rng, as_tensor4

ENCODER_SEED = 0x6752494E  # b"gRIN"
ENCODER_CHANNELS = (8, 16, 32, 64)
PAD_MODE = "reflect"


@dataclass(frozen=True)
class ConvSpec:
    c_in: int
    c_out: int
    k: int = 3
    relu: bool = True
    upsample: bool = False


DECODER_SPEC = (
    ConvSpec(64, 32, upsample=True),
    ConvSpec(32, 16, upsample=True),
    ConvSpec(16, 8, upsample=True),
    ConvSpec(8, 3, relu=False),
)


def he_normal(rng, c_out, c_in, k):
    return rng.normal((c_out, c_in, k, k), scale=np.sqrt(2.0 / (c_in * k * k)))


@dataclass(frozen=True)
class Encoder:
    weights: tuple
    biases: tuple

    @classmethod
    def from_seed(cls, seed=ENCODER_SEED, channels=ENCODER_CHANNELS, in_channels=3):
        rng = Rng(seed)
        ws, bs = [], []
        c_in = in_channels
        for c in channels:
            ws.append(he_normal(rng, c, c_in, 3))
            bs.append(rng.normal(c, scale=0.05))
            c_in = c
        return cls(tuple(ws), tuple(bs))

    @property
    def out_channels(self):
        return self.weights[-1].shape[0]


@dataclass(frozen=True)
class EncoderFeatures:
    taps: tuple

    @property
    def deepest(self):
        return self.taps[-1]

    def values(self):
        return [t.value if isinstance(t, Var) else t for t in self.taps]


_default_encoder = None


def default_encoder():
    global _default_encoder
    if _default_encoder is None:
        _default_encoder = Encoder.from_seed()
    return _default_encoder


def encoder_forward(img, encoder=None, tape=None):
    """Run the frozen encoder, returning its four ReLU taps.

    With ``img`` a plain array the taps are arrays. With ``img`` a ``Var``
    the ops are recorded on its tape (the encoder weights enter as
    constants, never as parameters) and the taps are ``Var``s.
    """
    enc = encoder or default_encoder()
    taped = isinstance(img, Var)
    if taped:
        tape = img.tape
        x = img
        shape = img.value.shape
    else:
        arr = as_tensor4(img, "img")
        shape = arr.shape
        tape = Tape()
        x = tape.const(arr)
    if shape[1] != enc.weights[0].shape[1]:
        raise ShapeError(f"encoder expects {enc.weights[0].shape[1]} channels, got {shape[1]}")
    factor = 2 ** (len(enc.weights) - 1)
    if shape[2] % factor or shape[3] % factor:
        raise ShapeError(f"image size {shape[2]}x{shape[3]} must be divisible by {factor}")
    taps = []
    for i, (w, b) in enumerate(zip(enc.weights, enc.biases)):
        if i:
            x = ops.avgpool2(x)
        x = ops.relu(ops.conv2d(x, tape.const(w), tape.const(b), PAD_MODE))
        taps.append(x)
    if not taped:
        taps = [t.value for t in taps]
    return EncoderFeatures(tuple(taps))


@dataclass
class DecoderParams:
    spec: tuple
    weights: list
    biases: list

    def __post_init__(self):
        for s, w, b in zip(self.spec, self.weights, self.biases):
            if w.shape != (s.c_out, s.c_in, s.k, s.k) or b.shape != (s.c_out,):
                raise ShapeError(f"decoder layer {s} has weight {w.shape}, bias {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("decoder parameters must be finite")

    @classmethod
    def init(cls, rng, spec=DECODER_SPEC):
        ws = [he_normal(rng, s.c_out, s.c_in, s.k) for s in spec]
        bs = [np.zeros(s.c_out) for s in spec]
        return cls(tuple(spec), ws, bs)

    @classmethod
    def zeros(cls, spec=DECODER_SPEC):
        return cls(tuple(spec), [np.zeros((s.c_out, s.c_in, s.k, s.k)) for s in spec],
                   [np.zeros(s.c_out) for s in spec])

    def named(self):
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"decoder.{i}.weight"] = w
            out[f"decoder.{i}.bias"] = b
        return out

    @classmethod
    def from_named(cls, named, spec=DECODER_SPEC):
        try:
            ws = [np.asarray(named[f"decoder.{i}.weight"]) for i in range(len(spec))]
            bs = [np.asarray(named[f"decoder.{i}.bias"]) for i in range(len(spec))]
        except KeyError as e:
            raise KeyError(f"missing decoder parameter {e.args[0]}") from None
        return cls(tuple(spec), ws, bs)


def decoder_forward(t, params, tape=None):
    """Decode features back to an image.

    ``t`` may be a ``Var`` or an array; when ``tape`` is given the decoder
    weights are registered on it as parameters (unless already registered).
    """
    if tape is None:
        tape = t.tape if isinstance(t, Var) else Tape()
    x = t if isinstance(t, Var) else tape.const(as_tensor4(t, "t"))
    if x.value.shape[1] != params.spec[0].c_in:
        raise ShapeError(f"decoder expects {params.spec[0].c_in} channels, got {x.value.shape[1]}")
    for i, (s, w, b) in enumerate(zip(params.spec, params.weights, params.biases)):
        wv = _param(tape, f"decoder.{i}.weight", w)
        bv = _param(tape, f"decoder.{i}.bias", b)
        x = ops.conv2d(x, wv, bv, PAD_MODE)
        if s.relu:
            x = ops.relu(x)
        if s.upsample:
            x = ops.upsample2(x)
    return x


def _param(tape, name, value):
    if name in tape.params:
        return tape.params[name]
    return tape.param(name, value)


def grin_taped(x, y, cfg, tape, thetas=None):
    """GrIN on the tape: whitened content recolored with sigma(y) and the
    (smoothed in train mode) style means. ``x``, ``y`` are constants;
    ``thetas`` are the graph-layer ``Var``s used in train mode.
    """
    z = ops.whiten(tape.const(x), cfg.eps)
    sy = compute_stats(y, cfg.eps)
    bias = tape.const(sy.mean)
    if cfg.mode == "train":
        stack = cfg.stack
        if thetas is None:
            thetas = [tape.const(t) for t in stack.layers]
        adj = build_adjacency(y, cfg.adjacency_variant)
        for i, th in enumerate(thetas):
            if stack.diagonal:
                th = ops.diag_part(th)
            bias = ops.matmul(ops.propagate(adj.propagation, bias), th)
            if stack.activation == "relu" and i < len(thetas) - 1:
                bias = ops.relu(bias)
    return ops.channel_affine(z, tape.const(sy.std), bias)


def taped_style_loss(out_taps, style_taps, eps, reduction="sum"):
    sq = ops.sum_squares if reduction == "sum" else ops.mean_squares
    tape = out_taps[0].tape
    terms, per_layer = [], []
    for o, s in zip(out_taps, style_taps):
        ss = compute_stats(s, eps)
        dm = sq(ops.sub(ops.channel_mean(o), tape.const(ss.mean)))
        ds = sq(ops.sub(ops.channel_std(o, eps), tape.const(ss.std)))
        term = ops.add(dm, ds)
        terms.append(term)
        per_layer.append(float(term.value))
    total = terms[0]
    for term in terms[1:]:
        total = ops.add(total, term)
    return total, per_layer


@dataclass
class Batch:
    """Encoder features for one mini-batch, computed once per step."""

    content: np.ndarray
    style: np.ndarray
    content_feats: EncoderFeatures
    style_feats: EncoderFeatures

    @classmethod
    def encode(cls, content, style, encoder=None):
        return cls(content, style, encoder_forward(content, encoder), encoder_forward(style, encoder))


def forward_loss(tape, decoder, batch, cfg, weights=LossWeights(), encoder=None,
                 detach_target=False):
    """Record the full objective on ``tape`` and return (loss Var, LossReport).

    encode -> GrIN -> decode -> re-encode -> content + lambda * style.
    In train mode the graph weights are registered as ``graph.theta.{i}``.
    With ``detach_target`` the GrIN output enters the content loss as a
    constant target; it still reaches the decoder as a differentiable input.
    """
    x = batch.content_feats.deepest
    y = batch.style_feats.deepest
    thetas = None
    if cfg.mode == "train":
        thetas = [_param(tape, f"graph.theta.{i}", th) for i, th in enumerate(cfg.stack.layers)]
    t = grin_taped(x, y, cfg, tape, thetas)
    out = decoder_forward(t, decoder, tape)
    feats = encoder_forward(out, encoder).taps
    target = tape.const(t.value.copy()) if detach_target else t
    sq = ops.sum_squares if weights.reduction == "sum" else ops.mean_squares
    lc = sq(ops.sub(feats[-1], target))
    ls, per_layer = taped_style_loss([feats[i] for i in weights.style_layers],
                                     [batch.style_feats.taps[i] for i in weights.style_layers],
                                     cfg.eps, weights.reduction)
    loss = ops.add(lc, ops.scale(ls, weights.lam))
    c, s = float(lc.value), float(ls.value)
    report = LossReport(c, s, total_loss(c, s, weights), tuple(per_layer))
    return loss, report


def stylize(content, style, decoder, eps=1e-5, encoder=None):
    """Inference path: encode, AdaIN-recolor, decode. No graph weights needed.

    ``content`` and ``style`` are (3, H, W) images; returns the decoded (3, H, W)
    array (not clipped).
    """
    from .normalize import grin

    x = encoder_forward(content[None], encoder).deepest
    y = encoder_forward(style[None], encoder).deepest
    t = grin(x, y, GrinConfig(eps=eps, mode="infer"))
    return decoder_forward(t, decoder).value[0]
