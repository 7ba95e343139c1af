import numpy as np
import pytest
from scipy.signal import correlate

from grin import ops
from grin.autodiff import Tape
from grin.data import generate_batch
from grin.errors import ShapeError
from grin.gradcheck import _e2e_setup, check_end_to_end
from grin.graph import GraphStack
from grin.losses import content_loss, style_loss
from grin.net import (Batch, ConvSpec, DecoderParams, Encoder, decoder_forward,
                      default_encoder, encoder_forward, forward_loss, grin_taped, stylize)
from grin.normalize import GrinConfig, grin


def test_tap_schedule(rng):
    taps = encoder_forward(rng.uniform((2, 3, 32, 32))).taps
    assert [t.shape for t in taps] == [(2, 8, 32, 32), (2, 16, 16, 16), (2, 32, 8, 8), (2, 64, 4, 4)]


def test_zero_image_closed_form():
    # reflection padding keeps constant planes constant, so every tap is
    # relu(sum of kernel taps @ previous constant + bias)
    enc = default_encoder()
    taps = encoder_forward(np.zeros((1, 3, 16, 16))).taps
    v = np.zeros(3)
    for w, b, tap in zip(enc.weights, enc.biases, taps):
        v = np.maximum(w.sum(axis=(2, 3)) @ v + b, 0.0)
        np.testing.assert_allclose(tap[0], np.broadcast_to(v[:, None, None], tap[0].shape),
                                   rtol=0, atol=1e-14)


def test_encoder_deterministic(rng):
    img = rng.uniform((1, 3, 16, 16))
    pair = np.concatenate([img, img])
    a = encoder_forward(pair)
    again = encoder_forward(pair.copy(), Encoder.from_seed())
    for t, u in zip(a.taps, again.taps):
        assert np.array_equal(t[0], t[1])
        assert np.array_equal(t, u)


def test_encoder_shape_errors(rng):
    with pytest.raises(ShapeError):
        encoder_forward(rng.uniform((1, 1, 16, 16)))
    with pytest.raises(ShapeError):
        encoder_forward(rng.uniform((1, 3, 12, 12)))


def test_encoder_registers_no_parameters(rng):
    tape = Tape()
    img = tape.param("img", rng.uniform((1, 3, 16, 16)))
    feats = encoder_forward(img)
    assert list(tape.params) == ["img"]
    grads = tape.backward(ops.sum_squares(feats.deepest))
    assert np.abs(grads["img"]).max() > 0  # gradients flow through the frozen net


def test_decoder_shape_contract(rng):
    t = encoder_forward(rng.uniform((2, 3, 32, 32))).deepest
    out = decoder_forward(t, DecoderParams.init(rng))
    assert out.shape == (2, 3, 32, 32)


def test_decoder_rejects_wrong_channels(rng):
    with pytest.raises(ShapeError):
        decoder_forward(rng.normal((1, 32, 4, 4)), DecoderParams.init(rng))


def test_decoder_zero_params_gives_bias(rng):
    p = DecoderParams.zeros()
    p.biases[-1] = np.array([0.1, -0.2, 0.3])
    out = decoder_forward(rng.normal((1, 64, 2, 2)), p).value
    np.testing.assert_array_equal(out[0], np.broadcast_to(p.biases[-1][:, None, None], (3, 16, 16)))


def _reference_decoder(t, params):
    x = t
    for s, w, b in zip(params.spec, params.weights, params.biases):
        p = s.k // 2
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)), mode="reflect")
        y = np.stack([np.stack([correlate(xp[n], w[o], mode="valid")[0] + b[o]
                                for o in range(w.shape[0])]) for n in range(x.shape[0])])
        if s.relu:
            y = np.maximum(y, 0)
        if s.upsample:
            y = np.kron(y, np.ones((1, 1, 2, 2)))
        x = y
    return x


def test_decoder_matches_untaped_reference(rng):
    params = DecoderParams.init(rng)
    t = np.abs(rng.normal((2, 64, 2, 2)))
    out = decoder_forward(t, params, Tape()).value
    np.testing.assert_allclose(out, _reference_decoder(t, params), rtol=0, atol=1e-12)


def test_one_by_one_decoder_kernel_gradient(rng):
    spec = (ConvSpec(4, 3, k=1, relu=False),)
    params = DecoderParams(spec, [rng.normal((3, 4, 1, 1))], [rng.normal(3)])
    t = rng.normal((2, 4, 3, 3))
    tape = Tape()
    out = decoder_forward(t, params, tape)
    ones = tape.record("sum", (out,), np.asarray(out.value.sum()), lambda g: (np.full(out.shape, g),))
    grads = tape.backward(ones)
    expected = np.broadcast_to(t.sum(axis=(0, 2, 3)), (3, 4))[:, :, None, None]
    np.testing.assert_allclose(grads["decoder.0.weight"], expected, rtol=1e-13)
    np.testing.assert_allclose(grads["decoder.0.bias"], np.full(3, 2 * 9.0))


def test_taped_grin_matches_library(rng):
    c, s, _ = generate_batch(rng, 3, 16)
    x = encoder_forward(c).deepest
    y = encoder_forward(s).deepest
    stack = GraphStack.init(64, rng, noise=0.1)
    for mode in ("train", "infer"):
        cfg = GrinConfig(mode=mode, stack=stack)
        np.testing.assert_allclose(grin_taped(x, y, cfg, Tape()).value, grin(x, y, cfg),
                                   rtol=0, atol=1e-12)


def test_forward_loss_report_matches_library(rng):
    c, s, _ = generate_batch(rng, 2, 16)
    batch = Batch.encode(c, s)
    dec = DecoderParams.init(rng)
    cfg = GrinConfig(stack=GraphStack.init(64, rng))
    _, report = forward_loss(Tape(), dec, batch, cfg)
    t = grin(batch.content_feats.deepest, batch.style_feats.deepest, cfg)
    out = decoder_forward(t, dec).value
    feats = encoder_forward(out).taps
    assert report.content == pytest.approx(content_loss(feats[-1], t), rel=1e-12)
    ls, per = style_loss(list(feats), list(batch.style_feats.taps))
    assert report.style == pytest.approx(ls, rel=1e-12)
    assert report.total == report.content + 10.0 * report.style


def test_infer_mode_has_no_theta_gradients(rng):
    _, data, params = _e2e_setup(3)
    tape = Tape()
    loss, _ = forward_loss(tape, DecoderParams.from_named(params), data, GrinConfig(mode="infer"))
    grads = tape.backward(loss)
    assert not any(k.startswith("graph.") for k in grads)


def test_train_mode_theta_gradients_nonzero(rng):
    _, data, params = _e2e_setup(3)
    stack = GraphStack([params["graph.theta.0"], params["graph.theta.1"]])
    tape = Tape()
    loss, _ = forward_loss(tape, DecoderParams.from_named(params), data, GrinConfig(stack=stack))
    grads = tape.backward(loss)
    assert np.abs(grads["graph.theta.0"]).max() > 0


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("detach", [False, True])
def test_end_to_end_gradients(seed, detach):
    results = check_end_to_end(seed, detach_target=detach)
    assert len(results) == 10
    for r in results:
        assert r.max_rel_error < 1e-4, r


def test_stylize_is_adain_path(rng):
    c, s, _ = generate_batch(rng, 1, 16)
    dec = DecoderParams.init(rng)
    out = stylize(c[0], s[0], dec)
    x = encoder_forward(c).deepest
    y = encoder_forward(s).deepest
    from grin.normalize import adain
    ref = decoder_forward(adain(x, y), dec).value[0]
    assert np.array_equal(out, ref)
