import colorsys
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eventrgbd.errors import DegenerateHistogramError, DimensionMismatchError
from eventrgbd.metrics import (
    MetricReport,
    correlation,
    histogram_correlation,
    hsv_histograms,
    metric_report,
    psnr,
    rgb_to_hsv,
    rmse_per_channel,
)

frames16 = arrays(np.uint8, (16, 16, 3))


def loop_rmse(a, b):
    h, w, _ = a.shape
    sse = [0.0, 0.0, 0.0]
    for y in range(h):
        for x in range(w):
            for c in range(3):
                d = float(a[y, x, c]) - float(b[y, x, c])
                sse[c] += d * d
    mse = [s / (h * w) for s in sse]
    return [math.sqrt(m) for m in mse] + [math.sqrt(sum(mse) / 3)]


def loop_psnr(a, b):
    _, _, _, overall = loop_rmse(a, b)
    return math.inf if overall == 0 else 10 * math.log10(255**2 / overall**2)


def loop_hsv(pixel):
    # textbook hexcone formula in exact rationals, so rounding ties cannot flip
    r, g, b = (int(c) for c in pixel)
    v, mn = max(r, g, b), min(r, g, b)
    d = v - mn
    half = Fraction(1, 2)
    s = math.floor(Fraction(255 * d, v) + half) if v else 0
    if d == 0:
        h = Fraction(0)
    elif v == r:
        h = (60 * Fraction(g - b, d)) % 360
    elif v == g:
        h = 120 + 60 * Fraction(b - r, d)
    else:
        h = 240 + 60 * Fraction(r - g, d)
    return [min(255, math.floor(h * 255 / 360 + half)), s, v]


def loop_hc(a, b):
    hists = []
    for img in (a, b):
        hist = [[0] * 256 for _ in range(3)]
        for row in img:
            for px in row:
                for c, val in enumerate(loop_hsv(px)):
                    hist[c][val] += 1
        hists.append(hist)
    out = []
    for c in range(3):
        ho, hb = hists[0][c], hists[1][c]
        mo, mb = sum(ho) / 256, sum(hb) / 256
        num = sum((x - mo) * (y - mb) for x, y in zip(ho, hb))
        den = math.sqrt(sum((x - mo) ** 2 for x in ho) * sum((y - mb) ** 2 for y in hb))
        out.append(num / den)
    return sum(out) / 3


def test_identical_frames():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
    assert rmse_per_channel(img, img) == (0.0, 0.0, 0.0, 0.0)
    assert psnr(img, img) == math.inf
    assert histogram_correlation(img, img) == 1.0


def test_single_pixel_extreme():
    a = np.zeros((1, 1, 3), dtype=np.uint8)
    b = a.copy()
    b[0, 0, 0] = 255
    r, g, bl, overall = rmse_per_channel(a, b)
    assert (r, g, bl) == (255.0, 0.0, 0.0)
    assert overall == pytest.approx(255 / math.sqrt(3))


def test_psnr_zero_db():
    a = np.zeros((4, 4, 3), dtype=np.uint8)
    assert psnr(a, a + 255) == 0.0


def test_against_loop_oracles():
    rng = np.random.default_rng(42)
    for _ in range(100):
        a = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
        b = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
        np.testing.assert_allclose(rmse_per_channel(a, b), loop_rmse(a, b), rtol=0, atol=1e-9)
        assert abs(psnr(a, b) - loop_psnr(a, b)) < 1e-9
        assert abs(histogram_correlation(a, b) - loop_hc(a, b)) < 1e-9


def test_hsv_matches_colorsys_and_exact_oracle():
    rng = np.random.default_rng(5)
    img = rng.integers(0, 256, (20, 20, 3), dtype=np.uint8)
    hsv = rgb_to_hsv(img)
    for y in range(20):
        for x in range(20):
            assert list(hsv[y, x]) == loop_hsv(img[y, x])
            h, s, v = colorsys.rgb_to_hsv(*(img[y, x] / 255.0))
            assert np.allclose(hsv[y, x], [h * 255, s * 255, v * 255], atol=0.5 + 1e-6)


def test_value_inverted_counterpart():
    rng = np.random.default_rng(9)
    img = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
    inv = 255 - img
    assert abs(histogram_correlation(img, inv) - loop_hc(img, inv)) < 1e-9


def test_flat_histogram_is_degenerate():
    # every gray level exactly once: the V histogram is flat, so its variance is zero
    ramp = np.repeat(np.arange(256, dtype=np.uint8)[:, None], 3, axis=1).reshape(16, 16, 3)
    with pytest.raises(DegenerateHistogramError):
        histogram_correlation(ramp, ramp)
    with pytest.raises(DegenerateHistogramError):
        correlation(np.ones(256), np.arange(256))


def test_constant_color_pair():
    a = np.zeros((4, 4, 3), dtype=np.uint8)
    a[...] = (200, 10, 10)
    b = np.zeros((4, 4, 3), dtype=np.uint8)
    b[...] = (10, 10, 200)
    # same S and V spikes, hue spikes in different bins: (1 + 1 - 1/255) / 3
    assert histogram_correlation(a, b) == pytest.approx((2 - 1 / 255) / 3)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        rmse_per_channel(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))
    with pytest.raises(DimensionMismatchError):
        psnr(np.zeros((2, 2, 3)), np.zeros((3, 2, 3)))
    with pytest.raises(DimensionMismatchError):
        histogram_correlation(np.zeros((2, 2, 3)), np.zeros((3, 2, 3)))


@settings(max_examples=40, deadline=None)
@given(frames16, frames16)
def test_hc_symmetric(a, b):
    try:
        ab = histogram_correlation(a, b)
    except DegenerateHistogramError:
        return
    assert abs(ab - histogram_correlation(b, a)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(frames16, frames16, st.randoms(use_true_random=False))
def test_hc_permutation_invariant(a, b, rnd):
    perm = list(range(256))
    rnd.shuffle(perm)
    pa = a.reshape(256, 3)[perm].reshape(16, 16, 3)
    pb = b.reshape(256, 3)[perm].reshape(16, 16, 3)
    try:
        ref = histogram_correlation(a, b)
    except DegenerateHistogramError:
        return
    assert histogram_correlation(pa, pb) == ref


@settings(max_examples=60, deadline=None)
@given(frames16, frames16, frames16)
def test_rmse_triangle(a, b, c):
    ac = rmse_per_channel(a, c)
    ab = rmse_per_channel(a, b)
    bc = rmse_per_channel(b, c)
    for i in range(4):
        assert ac[i] <= ab[i] + bc[i] + 1e-9


def test_histograms_sum_to_pixels():
    img = np.random.default_rng(1).integers(0, 256, (7, 9, 3), dtype=np.uint8)
    h = hsv_histograms(img)
    assert h.shape == (3, 256)
    assert np.all(h.sum(axis=1) == 63)


def test_report_csv_row():
    img = np.random.default_rng(2).integers(0, 256, (8, 8, 3), dtype=np.uint8)
    rep = metric_report(img, img)
    assert rep.csv_row() == "0.000000,0.000000,0.000000,0.000000,inf,1.000000"
    assert MetricReport.HEADER == "rmse_r,rmse_g,rmse_b,rmse,psnr_db,hc"
    other = metric_report(img, 255 - img)
    assert other.psnr_db < 20 and other.rmse > 0
