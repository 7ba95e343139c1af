"""Command-line entry point: ``grin train|stylize|gradcheck|inspect-graph``.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 runtime or divergence error. ``GRIN_LOG`` sets verbosity.
"""
import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint
from .errors import FormatError, GrinError, TrainingError

log = logging.getLogger("grin")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _to_bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {s!r}")


def read_config(path):
    """Parse ``key = value`` lines (``#`` starts a comment) into a str -> str dict."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def apply_config(subparser, config):
    """Install config values as the subparser's defaults so flags still win.

    Unknown keys are rejected by name.
    """
    actions = {}
    for a in subparser._actions:
        for opt in a.option_strings:
            if opt.startswith("--") and a.dest not in ("help", "config"):
                actions[opt[2:].replace("-", "_")] = a
    defaults = {}
    for key, value in config.items():
        if key not in actions:
            raise UsageError(f"unknown config key {key!r} for '{subparser.prog}'")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[action.dest] = _to_bool(value)
        else:
            defaults[action.dest] = value  # argparse runs string defaults through type=
    subparser.set_defaults(**defaults)


def build_parser():
    p = _Parser(prog="grin", description="Graph instance normalization for style transfer.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train the decoder and graph layers on synthetic pairs")
    t.add_argument("--config")
    t.add_argument("--steps", type=int, default=500)
    t.add_argument("--batch", type=int, default=8)
    t.add_argument("--image-size", type=int, default=32)
    t.add_argument("--lambda", dest="lam", type=float, default=10.0)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--adjacency", choices=("gram", "cosine"), default="gram")
    t.add_argument("--activation", choices=("none", "relu"), default="none")
    t.add_argument("--diagonal-theta", action="store_true")
    t.add_argument("--graph-layers", type=int, default=2)
    t.add_argument("--eps", type=float, default=1e-5)
    t.add_argument("--reduction", choices=("sum", "mean"), default="sum")
    t.add_argument("--detach-target", action="store_true")
    t.add_argument("--checkpoint-every", type=int, default=0)
    t.add_argument("--out", default="grin.ckpt", help="checkpoint path")
    t.add_argument("--trace", help="loss CSV path (default: checkpoint path with .csv)")

    s = sub.add_parser("stylize", help="stylize a content PNG with a style PNG")
    s.add_argument("content")
    s.add_argument("style")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--eps", type=float, default=1e-5)
    s.add_argument("--seed", type=int, default=0, help="accepted for uniformity; stylize is deterministic")
    s.add_argument("--config")

    g = sub.add_parser("gradcheck", help="finite-difference certification of all gradients")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--tolerance", type=float, default=1e-4)
    g.add_argument("--out", help="write per-group errors as CSV")
    g.add_argument("--config")

    i = sub.add_parser("inspect-graph", help="print and export the style adjacency of a batch")
    i.add_argument("styles", nargs="*", help="style PNGs; omit to use a synthetic batch")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--batch", type=int, default=4)
    i.add_argument("--clusters", type=int, default=2, help="synthetic style clusters in the batch")
    i.add_argument("--size", type=int, default=32)
    i.add_argument("--variant", choices=("gram", "cosine"), default="gram")
    i.add_argument("--out", default="graph.csv")
    i.add_argument("--config")
    return p, sub


def cmd_train(args):
    from .trainer import TrainConfig, trace_csv, train

    try:
        cfg = TrainConfig(batch_size=args.batch, image_size=args.image_size, steps=args.steps,
                          lam=args.lam, lr=args.lr, seed=args.seed,
                          adjacency_variant=args.adjacency, activation=args.activation,
                          diagonal_theta=args.diagonal_theta, num_graph_layers=args.graph_layers,
                          eps=args.eps, reduction=args.reduction, detach_target=args.detach_target,
                          checkpoint_path=args.out, checkpoint_every=args.checkpoint_every)
    except ValueError as e:
        raise UsageError(str(e)) from None
    trace_path = args.trace or str(Path(args.out).with_suffix(".csv"))
    try:
        result = train(cfg)
    except TrainingError as e:
        log.error("training diverged: %s", e)
        print(f"error: training diverged at step {e.step}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    Path(trace_path).write_text(trace_csv(result.trace))
    if result.trace:
        print(f"step {result.trace[-1][0]}: total loss {result.trace[-1][1].total:.6g}")
    print(f"checkpoint: {args.out}\nloss trace: {trace_path}")
    return EXIT_OK


def cmd_stylize(args):
    from .imageio import read_png, resize_to_multiple, write_png
    from .net import DecoderParams, stylize

    imgs = []
    for path in (args.content, args.style):
        try:
            img = read_png(path)
        except (OSError, ValueError) as e:
            print(f"error: cannot read image {path}: {e}", file=sys.stderr)
            return EXIT_USAGE
        img, resized = resize_to_multiple(img, 8)
        if resized:
            print(f"notice: {path} resized to {img.shape[2]}x{img.shape[1]} (multiple of 8)", file=sys.stderr)
        imgs.append(img)
    try:
        params, _ = load_checkpoint(args.checkpoint)
        decoder = DecoderParams.from_named(params)
    except OSError as e:
        print(f"error: cannot read checkpoint {args.checkpoint}: {e.strerror}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, KeyError, GrinError, ValueError) as e:
        print(f"error: invalid checkpoint {args.checkpoint}: {e}", file=sys.stderr)
        return EXIT_USAGE
    out = stylize(imgs[0], imgs[1], decoder, eps=args.eps)
    write_png(args.out, out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_gradcheck(args):
    from .gradcheck import run_suite

    results = run_suite(args.seed)
    failed = []
    for r in results:
        ok = r.max_rel_error < args.tolerance
        print(f"{r.name:<36} max_rel_error={r.max_rel_error:.3e} checks={r.checks:<4} {'ok' if ok else 'FAIL'}")
        if not ok:
            failed.append(r.name)
    if args.out:
        lines = ["group,max_rel_error,checks"] + [f"{r.name},{r.max_rel_error!r},{r.checks}" for r in results]
        Path(args.out).write_text("\n".join(lines) + "\n")
    if failed:
        print(f"gradcheck failed for: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    print(f"all {len(results)} groups below {args.tolerance:g}")
    return EXIT_OK


def _fmt_matrix(m):
    return "\n".join("  " + " ".join(f"{v:12.6g}" for v in row) for row in np.atleast_2d(m))


def cmd_inspect_graph(args):
    from .data import STYLE_CLUSTERS, generate_batch
    from .graph import EPS_DEGREE, build_adjacency
    from .imageio import read_png, resize_to_multiple
    from .net import encoder_forward
    from .tensor import Rng

    if args.styles:
        imgs = []
        for path in args.styles:
            try:
                img, _ = resize_to_multiple(read_png(path), 8)
            except (OSError, ValueError) as e:
                print(f"error: cannot read image {path}: {e}", file=sys.stderr)
                return EXIT_USAGE
            if imgs and img.shape != imgs[0].shape:
                print(f"error: {path} has size {img.shape[1:]} but {args.styles[0]} has {imgs[0].shape[1:]}",
                      file=sys.stderr)
                return EXIT_USAGE
            imgs.append(img)
        styles = np.stack(imgs)
        labels = list(args.styles)
    else:
        if args.batch < 1 or not 1 <= args.clusters <= len(STYLE_CLUSTERS) or args.size % 8:
            print("error: need batch >= 1, 1 <= clusters <= "
                  f"{len(STYLE_CLUSTERS)} and size divisible by 8", file=sys.stderr)
            return EXIT_USAGE
        rng = Rng(args.seed)
        chosen = rng.choice(len(STYLE_CLUSTERS), args.clusters)
        clusters = [chosen[i * args.clusters // args.batch] for i in range(args.batch)]
        _, styles, clusters = generate_batch(rng, args.batch, args.size, clusters)
        labels = [f"synthetic[{i}] cluster {c}" for i, c in enumerate(clusters)]
    adj = build_adjacency(encoder_forward(styles).deepest, args.variant)
    print("nodes:")
    for i, name in enumerate(labels):
        print(f"  {i}: {name}")
    print("adjacency A:")
    print(_fmt_matrix(adj.a_tilde))
    print("degree:")
    print(_fmt_matrix(adj.degree[None, :]))
    print("propagation P = D^-1/2 A D^-1/2:")
    print(_fmt_matrix(adj.propagation))
    for i, d in enumerate(adj.degree):
        if d <= 1e3 * EPS_DEGREE:
            print(f"warning: node {i} has near-zero degree {d:.3g}", file=sys.stderr)
    rows = ["matrix,i,j,value"]
    n = adj.n
    for name, m in (("adjacency", adj.a_tilde), ("propagation", adj.propagation)):
        rows += [f"{name},{i},{j},{float(m[i, j])!r}" for i in range(n) for j in range(n)]
    rows += [f"degree,{i},,{float(adj.degree[i])!r}" for i in range(n)]
    Path(args.out).write_text("\n".join(rows) + "\n")
    print(f"wrote {args.out}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "stylize": cmd_stylize,
    "gradcheck": cmd_gradcheck,
    "inspect-graph": cmd_inspect_graph,
}


def _setup_logging():
    level = os.environ.get("GRIN_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _setup_logging()
    try:
        parser, sub = build_parser()
        args = parser.parse_args(argv)
        if args.config:
            apply_config(sub.choices[args.command], read_config(args.config))
            args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)


if __name__ == "__main__":
    sys.exit(main())
