"""Color-reconstruction quality metrics: RMSE, PSNR and HSV histogram correlation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateHistogramError
from .validation import check_frame, check_same_shape

N_BINS = 256


@dataclass(frozen=True)
class MetricReport:
    rmse_r: float
    rmse_g: float
    rmse_b: float
    rmse: float
    psnr_db: float
    hc: float

    HEADER = "rmse_r,rmse_g,rmse_b,rmse,psnr_db,hc"

    def csv_row(self):
        psnr = "inf" if math.isinf(self.psnr_db) else f"{self.psnr_db:.6f}"
        return f"{self.rmse_r:.6f},{self.rmse_g:.6f},{self.rmse_b:.6f},{self.rmse:.6f},{psnr},{self.hc:.6f}"


def _pair(output, base):
    o = check_frame(output, "output")
    b = check_frame(base, "base")
    check_same_shape(o, b)
    return o, b


def channel_mse(output, base):
    o, b = _pair(output, base)
    d = o.astype(np.float64) - b.astype(np.float64)
    return (d * d).reshape(-1, 3).mean(axis=0)


def rmse_per_channel(output, base):
    """Per-channel RMSE and the overall RMSE (root of the mean channel MSE).

    Returns
    -------
    (rmse_r, rmse_g, rmse_b, rmse_overall) : tuple of float
    """
    mse = channel_mse(output, base)
    r, g, b = (float(v) for v in np.sqrt(mse))
    return r, g, b, float(np.sqrt(mse.mean()))


def psnr(output, base):
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical frames."""
    mse = float(channel_mse(output, base).mean())
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def _round_div(num, den):
    """``round(num / den)`` with halves rounded up, in exact integer arithmetic."""
    return (2 * num + den) // (2 * den)


def rgb_to_hsv(frame):
    """8-bit HSV with hue rescaled from [0, 360) degrees to [0, 255].

    Integer arithmetic keeps the rounding exact, so ties such as
    ``S = 94.5`` always round up.
    """
    rgb = check_frame(frame).astype(np.int64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    diff = v - rgb.min(axis=-1)
    s = np.where(v > 0, _round_div(255 * diff, np.maximum(v, 1)), 0)
    # hue in degrees times diff
    deg = np.where(
        v == r,
        60 * (g - b),
        np.where(v == g, 120 * diff + 60 * (b - r), 240 * diff + 60 * (r - g)),
    )
    deg = np.where(deg < 0, deg + 360 * diff, deg)
    h = np.where(diff > 0, _round_div(255 * deg, 360 * np.maximum(diff, 1)), 0)
    return np.stack([np.minimum(h, 255), s, v], axis=-1).astype(np.uint8)


def hsv_histograms(frame):
    """Three 256-bin histograms (H, S, V), shape ``(3, 256)``."""
    hsv = rgb_to_hsv(frame).reshape(-1, 3)
    return np.stack([np.bincount(hsv[:, c], minlength=N_BINS) for c in range(3)])


def correlation(h_o, h_b):
    """Mean-centered correlation of two histograms."""
    h_o = np.asarray(h_o, dtype=np.float64)
    h_b = np.asarray(h_b, dtype=np.float64)
    do = h_o - h_o.mean()
    db = h_b - h_b.mean()
    denom = math.sqrt(float((do * do).sum()) * float((db * db).sum()))
    if denom == 0:
        raise DegenerateHistogramError("degenerate histogram: zero variance")
    return float((do * db).sum()) / denom


def histogram_correlation(output, base, base_hist=None):
    """Mean over H, S and V of the histogram correlation of two frames.

    ``base_hist`` may carry precomputed :func:`hsv_histograms` of ``base``.
    """
    o, b = _pair(output, base)
    ho = hsv_histograms(o)
    hb = hsv_histograms(b) if base_hist is None else base_hist
    return float(np.mean([correlation(ho[c], hb[c]) for c in range(3)]))


def metric_report(output, base):
    r, g, b, overall = rmse_per_channel(output, base)
    return MetricReport(r, g, b, overall, psnr(output, base), histogram_correlation(output, base))
