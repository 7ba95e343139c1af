import numpy as np
import pytest

from grin.checkpoint import load_checkpoint, save_checkpoint
from grin.cli import main
from grin.data import generate_pair
from grin.imageio import read_png, to_uint8, write_png
from grin.net import DecoderParams, decoder_forward, encoder_forward
from grin.normalize import adain
from grin.stats import compute_stats
from grin.tensor import Rng


@pytest.fixture
def images(tmp_path):
    pair = generate_pair(Rng(11), 32)
    c, s = tmp_path / "content.png", tmp_path / "style.png"
    write_png(c, pair.content)
    write_png(s, pair.style)
    return c, s


@pytest.fixture
def checkpoint(tmp_path):
    path = tmp_path / "init.grin"
    assert main(["train", "--steps", "0", "--out", str(path)]) == 0
    return path


def test_png_roundtrip_rounding(tmp_path):
    img = np.array([0.0, 1 / 255 * 0.5, 0.2, 1.0, 1.5, -0.1]).reshape(3, 1, 2)
    assert list(to_uint8(img).ravel()) == [0, 1, 51, 255, 255, 0]
    write_png(tmp_path / "x.png", img)
    back = read_png(tmp_path / "x.png")
    np.testing.assert_array_equal(to_uint8(back), to_uint8(img))


def test_train_zero_steps_writes_checkpoint(tmp_path):
    out = tmp_path / "ck.grin"
    assert main(["train", "--steps", "0", "--out", str(out)]) == 0
    params, state = load_checkpoint(out)
    assert "decoder.0.weight" in params and "graph.theta.1" in params
    assert (tmp_path / "ck.csv").read_text() == "step,content,style,total\n"


def test_train_seed_deterministic(tmp_path):
    for name in ("a", "b"):
        args = ["train", "--seed", "0", "--steps", "3", "--batch", "2", "--image-size", "16",
                "--out", str(tmp_path / f"{name}.grin")]
        assert main(args) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.grin").read_bytes() == (tmp_path / "b.grin").read_bytes()


def test_train_usage_errors(tmp_path, capsys):
    assert main(["train", "--image-size", "20", "--out", str(tmp_path / "x.grin")]) == 2
    assert main(["train", "--bogus"]) == 2
    assert main([]) == 2


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "train.cfg"
    cfg.write_text("# tiny run\nsteps = 2\nbatch = 2\nimage-size = 16\nlambda = 0\n")
    out = tmp_path / "c.grin"
    assert main(["train", "--config", str(cfg), "--steps", "1", "--out", str(out)]) == 0
    rows = (tmp_path / "c.csv").read_text().splitlines()
    assert len(rows) == 2
    step, content, style, total = rows[1].split(",")
    assert float(total) == float(content)


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("steps = 1\nwarp_speed = 9\n")
    assert main(["train", "--config", str(cfg)]) == 2
    assert "warp_speed" in capsys.readouterr().err


def test_train_divergence_exit_code(tmp_path, monkeypatch):
    from grin import trainer
    from grin.losses import LossReport

    real = trainer.forward_loss

    def nan_loss(*a, **k):
        loss, r = real(*a, **k)
        return loss, LossReport(r.content, float("inf"), float("inf"))
    monkeypatch.setattr(trainer, "forward_loss", nan_loss)
    args = ["train", "--steps", "2", "--batch", "1", "--image-size", "16", "--out", str(tmp_path / "d.grin")]
    assert main(args) == 3


def test_stylize_matches_adain_reference(tmp_path, images, checkpoint):
    c, s = images
    out = tmp_path / "out.png"
    assert main(["stylize", str(c), str(s), "--checkpoint", str(checkpoint), "--out", str(out)]) == 0
    params, _ = load_checkpoint(checkpoint)
    dec = DecoderParams.from_named(params)
    x = encoder_forward(read_png(c)[None]).deepest
    y = encoder_forward(read_png(s)[None]).deepest
    ref = to_uint8(decoder_forward(adain(x, y), dec).value[0])
    assert np.array_equal(to_uint8(read_png(out)), ref)
    again = tmp_path / "again.png"
    main(["stylize", str(c), str(s), "--checkpoint", str(checkpoint), "--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_stylize_without_theta(tmp_path, images, checkpoint):
    params, state = load_checkpoint(checkpoint)
    slim = {k: v for k, v in params.items() if not k.startswith("graph.")}
    path = tmp_path / "slim.grin"
    save_checkpoint(slim, {}, path)
    c, s = images
    out = tmp_path / "slim.png"
    assert main(["stylize", str(c), str(s), "--checkpoint", str(path), "--out", str(out)]) == 0
    full = tmp_path / "full.png"
    main(["stylize", str(c), str(s), "--checkpoint", str(checkpoint), "--out", str(full)])
    assert out.read_bytes() == full.read_bytes()


def test_self_style_keeps_encoder_stats(images):
    c, _ = images
    x = encoder_forward(read_png(c)[None]).deepest
    t = adain(x, x)
    a, b = compute_stats(t), compute_stats(x)
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-9)
    np.testing.assert_allclose(a.std, b.std, rtol=1e-6)


def test_stylize_errors_and_resize(tmp_path, images, checkpoint, capsys):
    c, s = images
    out = str(tmp_path / "o.png")
    assert main(["stylize", str(tmp_path / "missing.png"), str(s), "--checkpoint", str(checkpoint),
                 "--out", out]) == 2
    bad = tmp_path / "bad.grin"
    bad.write_bytes(b"GRIN\x01")
    assert main(["stylize", str(c), str(s), "--checkpoint", str(bad), "--out", out]) == 2
    odd = tmp_path / "odd.png"
    write_png(odd, Rng(1).uniform((3, 30, 21)))
    assert main(["stylize", str(odd), str(s), "--checkpoint", str(checkpoint), "--out", out]) == 0
    assert "resized" in capsys.readouterr().err
    assert read_png(out).shape == (3, 32, 24)


def test_gradcheck_exit_codes(tmp_path, capsys):
    assert main(["gradcheck", "--seed", "0", "--out", str(tmp_path / "a.csv")]) == 0
    first = capsys.readouterr().out
    assert main(["gradcheck", "--seed", "0", "--out", str(tmp_path / "b.csv")]) == 0
    assert capsys.readouterr().out == first
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert main(["gradcheck", "--tolerance", "0"]) == 1
    assert "gradcheck failed for" in capsys.readouterr().err


def _read_graph_csv(path, name):
    rows = [r.split(",") for r in path.read_text().splitlines()[1:]]
    entries = [(int(i), int(j), float(v)) for m, i, j, v in rows if m == name]
    n = max(i for i, _, _ in entries) + 1
    out = np.zeros((n, n))
    for i, j, v in entries:
        out[i, j] = v
    return out


def test_inspect_single_image(tmp_path, images):
    _, s = images
    out = tmp_path / "g.csv"
    assert main(["inspect-graph", str(s), "--out", str(out)]) == 0
    np.testing.assert_allclose(_read_graph_csv(out, "propagation"), [[1.0]], rtol=1e-15)


def test_inspect_duplicated_image(tmp_path, images):
    _, s = images
    out = tmp_path / "g.csv"
    assert main(["inspect-graph", str(s), str(s), "--out", str(out)]) == 0
    np.testing.assert_allclose(_read_graph_csv(out, "propagation"), np.full((2, 2), 0.5), rtol=0, atol=1e-12)


def test_inspect_synthetic_clusters(tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert main(["inspect-graph", "--seed", "3", "--batch", "4", "--clusters", "2", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "propagation" in text
    p = _read_graph_csv(out, "propagation")
    within = (p[0, 1] + p[2, 3]) / 2
    across = p[:2, 2:].mean()
    assert within > across
    again = tmp_path / "g2.csv"
    main(["inspect-graph", "--seed", "3", "--batch", "4", "--clusters", "2", "--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_inspect_unreadable(tmp_path):
    assert main(["inspect-graph", str(tmp_path / "nope.png"), "--out", str(tmp_path / "g.csv")]) == 2


def test_inspect_flags_zero_degree(tmp_path, capsys):
    black = tmp_path / "black.png"
    write_png(black, np.zeros((3, 16, 16)))
    main(["inspect-graph", str(black), "--out", str(tmp_path / "g.csv")])
    # a black image still has positive features from the encoder biases, so only
    # check the command completes; the clamp itself is covered in test_graph
    assert "adjacency" in capsys.readouterr().out
