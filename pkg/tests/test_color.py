import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from eventrgbd.color import (
    ColorReconstructor,
    WhiteBalanceGains,
    accumulate_channels,
    apply_gains,
    auto_scale,
    calibrate_white_balance,
    counts_to_frame,
)
from eventrgbd.errors import IncompleteCycleError, InsufficientReferenceError
from eventrgbd.geometry import PinholeModel, ScenePlane
from eventrgbd.patterns import build_sequence, gen_solid
from eventrgbd.radiometry import Renderer, SpectralPower
from eventrgbd.scenes import color_wheel
from eventrgbd.sensor import SensorConfig, make_events, make_triggers, sense

TRIG = make_triggers([0, 100, 200], [0, 1, 2], ["R", "G", "B"], [0, 0, 0])


def counts_of(r, g, b, shape=(1, 1)):
    return np.stack([np.full(shape, r), np.full(shape, g), np.full(shape, b)])


def test_one_event_per_channel():
    ev = make_events([10, 110, 210], [5, 5, 5], [5, 5, 5], [1, 1, 1])
    cc = accumulate_channels(ev, TRIG, (8, 8), end_us=300)
    np.testing.assert_array_equal(cc.counts[:, 5, 5], [1, 1, 1])
    assert cc.counts.sum() == 3
    assert cc.slot_ids == (0, 1, 2)
    assert (cc.start_us, cc.end_us) == (0, 300)


def test_empty_stream_gives_zero_counts():
    cc = accumulate_channels(make_events([], [], [], []), TRIG, (4, 4), end_us=300)
    assert cc.counts.shape == (3, 4, 4) and cc.counts.sum() == 0


def test_off_events_ignored_and_outside_discarded():
    ev = make_events([5, 50, 150, 250, 320], [0, 1, 1, 1, 1], [0, 0, 0, 0, 0], [-1, 1, 1, -1, 1])
    cc = accumulate_channels(ev, TRIG, (2, 2), window=(0, 300), end_us=300)
    assert cc.totals() == (1, 1, 0)
    assert cc.off_totals == (1, 0, 1)
    assert cc.discarded == 1


def test_incomplete_cycle():
    trig = make_triggers([0, 100], [0, 1], ["R", "G"], [0, 0])
    with pytest.raises(IncompleteCycleError):
        accumulate_channels(make_events([], [], [], []), trig, (2, 2), end_us=200)
    with pytest.raises(IncompleteCycleError):
        accumulate_channels(make_events([], [], [], []), TRIG, (2, 2), window=(0, 250), end_us=300)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1199), st.integers(0, 3), st.integers(0, 2), st.sampled_from([1, -1])), max_size=200))
def test_accumulate_bookkeeping(raw):
    trig = make_triggers(np.arange(12) * 100, np.arange(12), list("RGB") * 4, [0] * 12)
    raw = sorted(raw)
    t, x, y, p = (np.array(v, dtype=np.int64) for v in zip(*raw)) if raw else ([], [], [], [])
    ev = make_events(t, x, y, p)
    window = (300, 900)
    cc = accumulate_channels(ev, trig, (3, 4), window=window, end_us=1200)
    on = ev[ev["p"] > 0]
    inside = on[(on["t"] >= 300) & (on["t"] < 900)]
    per_ch = np.bincount((inside["t"] // 100) % 3, minlength=3)
    assert cc.totals() == tuple(per_ch)
    assert sum(cc.totals()) + cc.discarded == on.shape[0]


def test_counts_to_frame_examples():
    assert not counts_to_frame(np.zeros((3, 2, 2))).any()
    np.testing.assert_array_equal(counts_to_frame(counts_of(4, 4, 4), (1, 1, 1), 63.75)[0, 0], [255, 255, 255])
    gains = calibrate_white_balance(counts_of(80, 100, 125))
    px = counts_to_frame(counts_of(80, 100, 125), gains, 1.0)[0, 0]
    assert px[0] == px[1] == px[2] == 100


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 60), min_size=3, max_size=3), st.floats(0.1, 2.0))
def test_counts_to_frame_monotone_and_scale_equivariant(vals, scale):
    c = counts_of(*vals, shape=(1, 2))
    c[:, 0, 1] += 1
    f1 = counts_to_frame(c, None, scale).astype(int)
    f2 = counts_to_frame(c, None, 2 * scale).astype(int)
    assert np.all(f1[0, 1] >= f1[0, 0])
    raw = c.transpose(1, 2, 0) * scale
    unclamped = raw * 2 < 254.5
    assert np.all(np.abs(f2[unclamped] - 2 * raw[unclamped]) <= 0.5 + 1e-9)


def test_calibrate_examples():
    g = calibrate_white_balance(counts_of(80, 100, 125))
    assert (g.r, g.g, g.b) == (1.25, 1.0, 0.8)
    g = calibrate_white_balance(counts_of(7, 7, 7))
    assert (g.r, g.g, g.b) == (1.0, 1.0, 1.0)


def test_calibrate_zero_channel():
    with pytest.raises(InsufficientReferenceError):
        calibrate_white_balance(counts_of(3, 0, 4))
    mask = np.zeros((2, 2), dtype=bool)
    with pytest.raises(InsufficientReferenceError):
        calibrate_white_balance(counts_of(3, 1, 4, (2, 2)), mask)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.1, 500), min_size=12, max_size=12))
def test_calibration_idempotent(vals):
    c = np.array(vals).reshape(3, 2, 2)
    g = calibrate_white_balance(c)
    balanced = apply_gains(c, g)
    np.testing.assert_allclose(balanced.reshape(3, -1).mean(axis=1), [balanced[1].mean()] * 3, rtol=1e-12)
    again = calibrate_white_balance(balanced)
    np.testing.assert_allclose([again.r, again.g, again.b], [1, 1, 1], atol=1e-9)


def test_gains_preserve_argmax_within_ratio():
    # top two counts 30 and 20: any gains within a factor < 1.5 keep the argmax
    c = counts_of(30, 20, 5)
    for gr, gb in ((1 / 1.2, 1.2), (0.7, 1.4), (1.0, 1.0)):
        g = WhiteBalanceGains(gr, 1.0, gb)
        assert np.argmax(apply_gains(c, g)[:, 0, 0]) == 0


def test_gains_normalized():
    with pytest.raises(ValueError):
        WhiteBalanceGains(1.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        WhiteBalanceGains(0.0, 1.0, 1.0)


def test_auto_scale_uses_pixels_with_events():
    c = np.zeros((3, 10, 10))
    c[0, :5] = 10
    c[1, 0, 0] = 0.2  # fractional noise mean must not count
    assert auto_scale(c) == pytest.approx(25.5)
    assert auto_scale(np.zeros((3, 2, 2))) == 1.0


def test_reconstructor_estimator_api():
    rec = ColorReconstructor(white_balance=True, reference_region=(0, 0, 1, 1))
    params = rec.get_params()
    assert params["white_balance"] is True and params["percentile"] == 99.0
    c = counts_of(80, 100, 125, (2, 2))
    frame = clone(rec).fit(c).transform(c)
    assert frame.shape == (2, 2, 3) and frame.dtype == np.uint8
    assert len(set(frame[0, 0])) == 1
    stack = rec.fit(c).transform(np.stack([c, c]))
    assert stack.shape == (2, 2, 2, 3)
    fixed = ColorReconstructor(gains=(2.0, 2.0, 1.0)).fit(c)
    assert (fixed.gains_.r, fixed.gains_.b) == (1.0, 0.5)


def test_reconstructor_requires_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        ColorReconstructor().transform(counts_of(1, 1, 1))


def test_color_wheel_red_ink_leaks_into_green():
    cam = PinholeModel(60.0, 60.0, 32.0, 32.0, 64, 64)
    proj = PinholeModel(150.0, 150.0, 64.0, 64.0, 128, 128, translation=(0.1, 0, 0))
    tex = color_wheel()
    r = Renderer(ScenePlane.facing_camera(1.6, tex.albedo, 1.4), proj, cam)
    plan = build_sequence([gen_solid(None, (128, 128))], 4225)
    frames = r.render_plan(plan, SpectralPower(), 0.01, 0.5)
    res = sense(frames, SensorConfig())
    cc = accumulate_channels(res.events, res.triggers, cam.shape, end_us=plan.end_us)
    labels = r.sample_texture(tex.labels, fill=-1)
    red = labels == 0
    assert red.sum() > 20
    mean = cc.counts[:, red].mean(axis=1)
    assert mean[0] > mean[1] > 0 and mean[0] > mean[2]
    # oracle: each ON count is the number of thresholds between ambient and lit level
    cfg = SensorConfig()
    for ch in range(3):
        lit = frames[ch].values[red]
        expected = np.floor((np.log(lit + cfg.log_eps) - np.log(0.01 + cfg.log_eps)) / cfg.contrast_threshold + 1e-9)
        np.testing.assert_array_equal(cc.counts[ch][red], expected)
