"""Finite-difference certification of the tape.

Two layers of checks:

* every primitive in :mod:`grin.ops` on small random inputs, all
  coordinates, with the scalar probe ``sum(out * R)`` for a fixed random R;
* the end-to-end training loss (batch 2, 16x16) for every parameter group,
  on a sample of coordinates (always including the largest analytic
  entries) plus random directional derivatives.

The error of one check is ``|a - n| / max(|a|, |n|, floor)`` where the floor
is ``1e-8`` times the largest analytic magnitude in the group, so exact zeros
(dead ReLUs) are compared on the group's scale rather than divided by zero.
"""
from dataclasses import dataclass

import numpy as np

from . import ops
from .autodiff import Tape, directional_fd, finite_diff_grad
from .data import generate_batch
from .graph import GraphStack
from .losses import LossWeights
from .net import Batch, DecoderParams, forward_loss
from .normalize import GrinConfig
from .tensor import Rng

H = 1e-5
FLOOR = 1e-8


@dataclass
class GroupResult:
    name: str
    max_rel_error: float
    checks: int


def rel_errors(analytic, numeric, scale=None):
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    if scale is None:
        scale = np.abs(a).max(initial=0.0)
    den = np.maximum(np.maximum(np.abs(a), np.abs(n)), FLOOR * max(scale, 1e-300))
    return np.abs(a - n) / den


def _away_from_zero(rng, shape):
    z = rng.normal(shape)
    return np.sign(z) * (0.1 + np.abs(z))


def _primitive_cases(rng):
    """(name, builder, inputs) with builder(tape, vars) -> output Var."""
    p = rng.normal((3, 3))
    p = p + p.T
    eps = 1e-5
    return [
        ("conv3x3", lambda t, v: ops.conv2d(v[0], v[1], v[2]),
         [rng.normal((2, 3, 4, 5)), rng.normal((4, 3, 3, 3)), rng.normal(4)]),
        ("conv3x3_2x2", lambda t, v: ops.conv2d(v[0], v[1], v[2]),
         [rng.normal((1, 2, 2, 2)), rng.normal((2, 2, 3, 3)), rng.normal(2)]),
        ("conv1x1", lambda t, v: ops.conv2d(v[0], v[1], v[2]),
         [rng.normal((2, 3, 3, 3)), rng.normal((2, 3, 1, 1)), rng.normal(2)]),
        ("relu", lambda t, v: ops.relu(v[0]), [_away_from_zero(rng, (2, 3, 4, 4))]),
        ("avgpool", lambda t, v: ops.avgpool2(v[0]), [rng.normal((2, 3, 4, 6))]),
        ("upsample", lambda t, v: ops.upsample2(v[0]), [rng.normal((2, 3, 2, 3))]),
        ("mean", lambda t, v: ops.channel_mean(v[0]), [rng.normal((2, 3, 4, 4))]),
        ("std", lambda t, v: ops.channel_std(v[0], eps), [rng.normal((2, 3, 4, 4))]),
        ("whiten", lambda t, v: ops.whiten(v[0], eps), [rng.normal((2, 3, 4, 4))]),
        ("affine", lambda t, v: ops.channel_affine(v[0], v[1], v[2]),
         [rng.normal((2, 3, 4, 4)), rng.normal((2, 3)), rng.normal((2, 3))]),
        ("propagate", lambda t, v: ops.propagate(p, v[0]), [rng.normal((3, 4))]),
        ("matmul", lambda t, v: ops.matmul(v[0], v[1]), [rng.normal((3, 4)), rng.normal((4, 5))]),
        ("diag", lambda t, v: ops.diag_part(v[0]), [rng.normal((4, 4))]),
        ("add", lambda t, v: ops.add(v[0], v[1]), [rng.normal((2, 3)), rng.normal((2, 3))]),
        ("sub", lambda t, v: ops.sub(v[0], v[1]), [rng.normal((2, 3)), rng.normal((2, 3))]),
        ("scale", lambda t, v: ops.scale(v[0], 2.5), [rng.normal((2, 3))]),
        ("sum_squares", lambda t, v: ops.sum_squares(v[0]), [rng.normal((2, 3, 2, 2))]),
        ("mean_squares", lambda t, v: ops.mean_squares(v[0]), [rng.normal((2, 3, 2, 2))]),
    ]


def check_primitives(seed=0):
    rng = Rng(seed)
    results = []
    for name, build, inputs in _primitive_cases(rng):
        tape = Tape()
        vs = [tape.param(f"in{i}", a) for i, a in enumerate(inputs)]
        out = build(tape, vs)
        probe = rng.normal(out.value.shape) if out.value.ndim else np.asarray(1.0)

        def f(p, build=build, probe=probe):
            t = Tape()
            o = build(t, [t.param(k, p[k]) for k in sorted(p)])
            return float((o.value * probe).sum())

        grads = _probe_backward(tape, out, probe)
        named = {f"in{i}": a for i, a in enumerate(inputs)}
        numeric = finite_diff_grad(f, named, H)
        for k in named:
            err = rel_errors(grads[k], numeric[k])
            results.append(GroupResult(f"primitive/{name}.{k}", float(err.max()), err.size))
    return results


def _probe_backward(tape, out, probe):
    """Backward of sum(out * probe) using ``probe`` as the output seed."""
    def vjp(g):
        return (g * probe,)
    loss = tape.record("probe", (out,), np.asarray((out.value * probe).sum()), vjp)
    return tape.backward(loss)


def _e2e_setup(seed, batch=2, size=16):
    rng = Rng(seed)
    content, style, _ = generate_batch(rng, batch, size)
    data = Batch.encode(content, style)
    dec = DecoderParams.init(rng)
    stack = GraphStack.init(dec.spec[0].c_in, rng)
    params = dict(dec.named())
    params.update({f"graph.theta.{i}": th for i, th in enumerate(stack.layers)})
    return rng, data, params


def e2e_loss_fn(data, weights, detach_target=False, target=None, mode="train"):
    """Scalar loss as a function of a parameter dict, for finite differences.

    With ``detach_target`` the content target is frozen to ``target``.
    """
    def f(p):
        n = 0
        layers = []
        while f"graph.theta.{n}" in p:
            layers.append(p[f"graph.theta.{n}"])
            n += 1
        cfg = GrinConfig(mode=mode, stack=GraphStack(layers) if layers else None)
        tape = Tape()
        if detach_target:
            loss = _loss_with_target(tape, DecoderParams.from_named(p), data, cfg, weights, target)
        else:
            loss, _ = forward_loss(tape, DecoderParams.from_named(p), data, cfg, weights)
        return float(loss.value)
    return f


def _loss_with_target(tape, dec, data, cfg, weights, target):
    from .net import decoder_forward, encoder_forward, grin_taped, taped_style_loss
    thetas = [tape.param(f"graph.theta.{i}", th) for i, th in enumerate(cfg.stack.layers)]
    t = grin_taped(data.content_feats.deepest, data.style_feats.deepest, cfg, tape, thetas)
    out = decoder_forward(t, dec, tape)
    feats = encoder_forward(out).taps
    lc = ops.sum_squares(ops.sub(feats[-1], tape.const(target)))
    ls, _ = taped_style_loss([feats[i] for i in weights.style_layers],
                             [data.style_feats.taps[i] for i in weights.style_layers], cfg.eps)
    return ops.add(lc, ops.scale(ls, weights.lam))


def check_end_to_end(seed=0, coords_per_group=24, directions=2, detach_target=False):
    rng, data, params = _e2e_setup(seed)
    weights = LossWeights()
    cfg = GrinConfig(stack=GraphStack([params[f"graph.theta.{i}"] for i in range(2)]))
    tape = Tape()
    loss, _ = forward_loss(tape, DecoderParams.from_named(params), data, cfg, weights,
                           detach_target=detach_target)
    target = None
    if detach_target:
        from .net import grin_taped
        target = grin_taped(data.content_feats.deepest, data.style_feats.deepest, cfg, Tape()).value
    analytic = tape.backward(loss)
    f = e2e_loss_fn(data, weights, detach_target, target)
    tag = "e2e-detached" if detach_target else "e2e"
    results = []
    for name, arr in params.items():
        a = analytic[name].ravel()
        scale = np.abs(a).max(initial=0.0)
        k = min(arr.size, coords_per_group)
        top = list(np.argsort(-np.abs(a), kind="stable")[: max(1, k // 3)])
        rest = [i for i in rng.choice(arr.size, min(arr.size, k)) if i not in top]
        idx = (top + rest)[:k]
        numeric = finite_diff_grad(f, params, H, {name: idx})[name].ravel()[idx]
        errs = list(rel_errors(a[idx], numeric, scale))
        for _ in range(directions):
            d = rng.normal(arr.shape)
            num = directional_fd(f, params, {name: d}, H)
            ana = float((analytic[name] * d).sum())
            errs.append(float(rel_errors([ana], [num], abs(ana))[0]))
        results.append(GroupResult(f"{tag}/{name}", float(max(errs)), len(errs)))
    return results


def run_suite(seed=0, detached=True):
    results = check_primitives(seed)
    results += check_end_to_end(seed)
    if detached:
        results += check_end_to_end(seed, detach_target=True)
    return results
