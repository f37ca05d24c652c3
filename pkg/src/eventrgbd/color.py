"""Per-channel event accumulation, white balance and color frames."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import IncompleteCycleError, InsufficientReferenceError
from .patterns import CHANNELS
from .validation import check_counts, region_mask

DEFAULT_PERCENTILE = 99.0


@dataclass(frozen=True)
class ChannelCounts:
    """ON-event counts per channel over a trigger-delimited window."""

    counts: np.ndarray
    start_us: int
    end_us: int
    slot_ids: tuple = ()
    discarded: int = 0
    off_totals: tuple = (0, 0, 0)

    @property
    def shape(self):
        return self.counts.shape[1:]

    def totals(self):
        return tuple(int(v) for v in self.counts.reshape(3, -1).sum(axis=1))


@dataclass(frozen=True)
class WhiteBalanceGains:
    """Per-channel multipliers normalized so that green is exactly 1."""

    r: float = 1.0
    g: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.g != 1.0:
            raise ValueError("white-balance gains are normalized to g = 1")
        if not (self.r > 0 and self.b > 0):
            raise ValueError("white-balance gains must be positive")

    def as_array(self):
        return np.array([self.r, self.g, self.b])


def slot_bounds(triggers, end_us):
    """Start and end time of every trigger-delimited slot."""
    starts = triggers["t"].astype(np.int64)
    ends = np.r_[starts[1:], end_us] if starts.size else starts
    return starts, ends


def infer_end(triggers):
    """End of the last slot, assuming it lasts as long as the median slot."""
    t = triggers["t"]
    if t.size < 2:
        raise IncompleteCycleError("incomplete cycle: need at least two trigger pulses to infer slot length")
    return int(t[-1] + np.median(np.diff(t)))


def complete_cycles(triggers, window, end_us):
    """Indices of the R slots that start a full R, G, B cycle inside ``window``."""
    t0, t1 = window
    starts, ends = slot_bounds(triggers, end_us)
    ch = triggers["channel"]
    out = []
    for i in range(len(ch) - 2):
        if ch[i] == 0 and ch[i + 1] == 1 and ch[i + 2] == 2 and starts[i] >= t0 and ends[i + 2] <= t1:
            out.append(i)
    return out


def accumulate_channels(events, triggers, shape, window=None, end_us=None):
    """Sum ON events into the channel of the slot they fall in.

    Parameters
    ----------
    events, triggers : structured arrays
        Sorted event and trigger streams.
    shape : tuple
        Camera raster ``(height, width)``.
    window : (int, int), optional
        Half-open time window ``[t0, t1)`` in microseconds. Defaults to the
        whole trigger stream.
    end_us : int, optional
        End of the last slot in the trigger stream; inferred from the median
        slot length when omitted.

    Raises
    ------
    IncompleteCycleError
        If the window holds no complete R, G, B cycle.
    """
    h, w = shape
    if end_us is None:
        end_us = infer_end(triggers)
    if window is None:
        window = (int(triggers["t"][0]), int(end_us))
    t0, t1 = window
    if not complete_cycles(triggers, window, end_us):
        raise IncompleteCycleError(f"incomplete cycle: window [{t0}, {t1}) holds no full R, G, B cycle")
    starts, ends = slot_bounds(triggers, end_us)
    in_win = (starts >= t0) & (starts < t1)
    slot_ids = tuple(int(s) for s in triggers["slot"][in_win])

    t = events["t"]
    slot = np.searchsorted(starts, t, side="right") - 1
    ok = (slot >= 0) & (t >= t0) & (t < t1)
    slot_c = np.clip(slot, 0, max(len(starts) - 1, 0))
    if starts.size:
        ok &= in_win[slot_c] & (t < np.minimum(ends[slot_c], t1))
    else:
        ok[:] = False
    chan = triggers["channel"][slot_c].astype(np.int64) if starts.size else np.zeros_like(slot)
    on = events["p"] > 0
    use = ok & on
    flat = (chan[use] * h + events["y"][use].astype(np.int64)) * w + events["x"][use]
    counts = np.bincount(flat, minlength=3 * h * w).reshape(3, h, w)
    off = ok & ~on
    off_totals = tuple(int(v) for v in np.bincount(chan[off], minlength=3))
    discarded = int(on.sum() - use.sum())
    return ChannelCounts(counts, int(t0), int(t1), slot_ids, discarded, off_totals)


def auto_scale(counts, gains=None, percentile=DEFAULT_PERCENTILE):
    """Scale mapping the given percentile of gained counts to 255.

    Only pixels with at least one event (or a mean of at least one over
    several cycles) take part, so dark and noise-only pixels do not drag
    the reference down.
    """
    arr = check_counts(counts).astype(np.float64)
    g = np.ones(3) if gains is None else _gain_array(gains)
    vals = (arr * g[:, None, None])[arr >= 1]
    if vals.size == 0:
        return 1.0
    ref = float(np.percentile(vals, percentile))
    return 255.0 / ref if ref > 0 else 1.0


def _gain_array(gains):
    if isinstance(gains, WhiteBalanceGains):
        return gains.as_array()
    return np.asarray(gains, dtype=np.float64).reshape(3)


def counts_to_frame(counts, gains=None, scale=None, percentile=DEFAULT_PERCENTILE):
    """Map counts to 8-bit RGB: ``clamp(round(gain * scale * count), 0, 255)``.

    ``scale=None`` picks :func:`auto_scale`. Returns an ``(H, W, 3)`` uint8
    array.
    """
    arr = check_counts(counts).astype(np.float64)
    g = np.ones(3) if gains is None else _gain_array(gains)
    if scale is None:
        scale = auto_scale(arr, g, percentile)
    if scale <= 0:
        raise ValueError("scale must be positive")
    v = np.floor(arr * (g * scale)[:, None, None] + 0.5)
    return np.clip(v, 0, 255).astype(np.uint8).transpose(1, 2, 0).copy()


def calibrate_white_balance(counts, reference_region=None):
    """Gains that equalize the mean counts of a neutral reference region.

    ``reference_region`` is a boolean mask or an ``(x, y, width, height)``
    rectangle; ``None`` uses the whole frame.
    """
    arr = check_counts(counts).astype(np.float64)
    mask = region_mask(reference_region, arr.shape[1:])
    means = arr[:, mask].mean(axis=1) if mask.any() else np.zeros(3)
    if np.any(means <= 0):
        zero = [CHANNELS[i] for i in np.flatnonzero(means <= 0)]
        raise InsufficientReferenceError(f"insufficient reference signal in channel(s) {', '.join(zero)}")
    return WhiteBalanceGains(means[1] / means[0], 1.0, means[1] / means[2])


def apply_gains(counts, gains):
    arr = check_counts(counts).astype(np.float64)
    return arr * _gain_array(gains)[:, None, None]


class ColorReconstructor(TransformerMixin, BaseEstimator):
    """Turn per-channel event counts into 8-bit color frames.

    ``fit`` calibrates white-balance gains on a neutral reference region
    (when ``white_balance`` is set) and fixes the count-to-intensity scale;
    ``transform`` maps counts, or a stack of them, to frames.

    Parameters
    ----------
    white_balance : bool
        Calibrate gains on ``reference_region``; otherwise use unit gains.
    reference_region : mask or (x, y, width, height), optional
        Neutral region for calibration; the whole frame when omitted.
    scale : float, optional
        Fixed count-to-intensity scale. Chosen from ``percentile`` when
        omitted.
    percentile : float
        Percentile of nonzero gained counts mapped to 255.
    gains : tuple of 3 floats, optional
        Fixed gains; overrides calibration.
    """

    def __init__(self, white_balance=True, reference_region=None, scale=None, percentile=DEFAULT_PERCENTILE, gains=None):
        self.white_balance = white_balance
        self.reference_region = reference_region
        self.scale = scale
        self.percentile = percentile
        self.gains = gains

    def fit(self, X, y=None):
        arr = check_counts(X)
        if self.gains is not None:
            r, g, b = (float(v) for v in self.gains)
            self.gains_ = WhiteBalanceGains(r / g, 1.0, b / g)
        elif self.white_balance:
            self.gains_ = calibrate_white_balance(arr, self.reference_region)
        else:
            self.gains_ = WhiteBalanceGains()
        self.scale_ = float(self.scale) if self.scale is not None else auto_scale(arr, self.gains_, self.percentile)
        return self

    def transform(self, X):
        check_is_fitted(self, ["gains_", "scale_"])
        arr = np.asarray(getattr(X, "counts", X))
        if arr.ndim == 4:
            return np.stack([counts_to_frame(c, self.gains_, self.scale_) for c in arr])
        return counts_to_frame(arr, self.gains_, self.scale_)
