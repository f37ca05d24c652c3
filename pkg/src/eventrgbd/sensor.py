"""Event-camera model driven by projector slots.

Streams are numpy structured arrays. Events use :data:`EVENT_DTYPE`
(``t`` in microseconds, ``x``, ``y``, polarity ``p`` in {-1, +1}) and are
kept sorted by ``(t, y, x, p)``. Trigger pulses use :data:`TRIGGER_DTYPE`
with the channel stored as an index into ``("R", "G", "B")``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ScheduleGapError
from .patterns import CHANNELS

EVENT_DTYPE = np.dtype([("t", "<i8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])
TRIGGER_DTYPE = np.dtype([("t", "<i8"), ("slot", "<i8"), ("channel", "u1"), ("pattern", "<i8")])

# slack on floor(|dL| / C) so that an exact multiple of C is not lost to rounding
THRESHOLD_SLACK = 1e-9


def make_events(t, x, y, p):
    t = np.asarray(t)
    ev = np.empty(t.shape[0], dtype=EVENT_DTYPE)
    ev["t"], ev["x"], ev["y"], ev["p"] = t, x, y, p
    return ev


def make_triggers(t, slot, channel, pattern):
    t = np.asarray(t)
    tr = np.empty(t.shape[0], dtype=TRIGGER_DTYPE)
    tr["t"], tr["slot"], tr["pattern"] = t, slot, pattern
    tr["channel"] = [CHANNELS.index(c) if isinstance(c, str) else c for c in np.atleast_1d(channel)] if t.size else []
    return tr


def empty_events():
    return np.empty(0, dtype=EVENT_DTYPE)


def _order_key(events):
    t = events["t"].astype(np.int64)
    if t.size and (t.min() < 0 or t.max() >= 2**62 // (65536 * 65536 * 2)):
        return None
    return ((t * 65536 + events["y"]) * 65536 + events["x"]) * 2 + (events["p"] > 0)


def sort_events(events):
    """Events in canonical ``(t, y, x, p)`` order."""
    key = _order_key(events)
    if key is None:
        order = np.lexsort((events["p"], events["x"], events["y"], events["t"]))
    else:
        order = np.argsort(key, kind="stable")
    return events[order]


def is_sorted(events):
    key = _order_key(events)
    if key is None:
        return bool(np.array_equal(events, sort_events(events)))
    return bool(np.all(key[1:] >= key[:-1]))


@dataclass(frozen=True)
class SensorConfig:
    """Event-sensor parameters.

    ``contrast_threshold`` is in log-intensity units, ``refractory_us``
    spaces the events of one burst, ``noise_rate`` is in events per pixel
    per second and ``bus_cap`` in events per second.
    """

    contrast_threshold: float = 0.2
    refractory_us: int = 1
    log_eps: float = 1e-3
    noise_rate: float = 0.0
    bus_cap: float = math.inf
    bucket_us: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.contrast_threshold <= 0:
            raise ValueError("contrast_threshold must be > 0")
        if self.refractory_us < 0:
            raise ValueError("refractory_us must be >= 0")
        if self.log_eps <= 0:
            raise ValueError("log_eps must be > 0")
        if self.noise_rate < 0:
            raise ValueError("noise_rate must be >= 0")
        if self.bus_cap <= 0:
            raise ValueError("bus_cap must be > 0")
        if self.bucket_us <= 0:
            raise ValueError("bucket_us must be > 0")


class Burst(NamedTuple):
    """Events fired by one intensity transition.

    ``counts`` is signed: positive for ON, negative for OFF.
    """

    t_us: int
    next_us: int
    index: np.ndarray
    counts: np.ndarray


@dataclass
class SenseResult:
    events: np.ndarray
    triggers: np.ndarray
    generated: int
    dropped: int
    noise: int


class EventSensor:
    """Stateful contrast-threshold pixel array.

    Each pixel keeps a reference log intensity. A transition to a new
    log intensity fires ``floor(|dL| / C)`` events and moves the reference
    by that many thresholds, so the sub-threshold residual carries over.
    Events of a burst are spaced by the refractory period and truncated at
    the next transition; truncated changes stay pending.
    """

    def __init__(self, config, shape):
        self.config = config
        self.shape = tuple(shape)
        self.npix = self.shape[0] * self.shape[1]
        self.rng = np.random.default_rng(config.seed)
        self._log_cache = {}
        self.l_ref = None
        self.l_target = None
        self.pending = np.zeros(self.npix, dtype=bool)

    def log_intensity(self, values):
        key = id(values)
        hit = self._log_cache.get(key)
        if hit is not None and hit[0] is values:
            return hit[1]
        out = np.log(np.asarray(values, dtype=np.float64).ravel() + self.config.log_eps)
        if len(self._log_cache) > 64:
            self._log_cache.clear()
        self._log_cache[key] = (values, out)
        return out

    def dark_log(self, ambient):
        key = ("dark", float(ambient))
        hit = self._log_cache.get(key)
        if hit is None:
            hit = (None, np.full(self.npix, math.log(ambient + self.config.log_eps)))
            self._log_cache[key] = hit
        return hit[1]

    def reset(self, initial):
        """Set every pixel's reference to the log of ``initial`` irradiance."""
        log = self.log_intensity(initial) if np.ndim(initial) else self.dark_log(float(initial))
        self.l_ref = log.copy()
        self.l_target = log
        self.pending[:] = False

    def transition(self, target_log, t_us, next_us):
        """Move every pixel toward ``target_log`` at ``t_us``; return the burst."""
        if self.l_ref is None:
            raise RuntimeError("sensor must be reset before use")
        cand = np.flatnonzero((target_log != self.l_target) | self.pending)
        self.l_target = target_log
        if cand.size == 0:
            return Burst(t_us, next_us, cand, cand)
        c = self.config.contrast_threshold
        dl = target_log[cand] - self.l_ref[cand]
        k = np.floor(np.abs(dl) / c + THRESHOLD_SLACK).astype(np.int64)
        r = self.config.refractory_us
        if r > 0:
            capacity = max(0, -(-(next_us - t_us) // r))
            emitted = np.minimum(k, capacity)
        else:
            emitted = k
        self.pending[cand] = emitted < k
        signed = np.where(dl > 0, emitted, -emitted)
        self.l_ref[cand] += signed * c
        fired = emitted > 0
        return Burst(t_us, next_us, cand[fired], signed[fired])

    def slot_bursts(self, frame):
        """Transitions of one irradiance slot (lit onset and, if any, lit end)."""
        bursts = []
        lit_end = frame.end_us if frame.lit_until_us is None else frame.lit_until_us
        bursts.append(self.transition(self.log_intensity(frame.values), frame.start_us, lit_end))
        if frame.lit_until_us is not None and frame.lit_until_us < frame.end_us:
            bursts.append(self.transition(self.dark_log(frame.ambient), frame.lit_until_us, frame.end_us))
        return bursts

    def slot_noise(self, start_us, end_us):
        """Poisson background events in ``[start_us, end_us)``."""
        rate = self.config.noise_rate
        dur = end_us - start_us
        if rate == 0 or dur <= 0:
            return empty_events()
        n = int(self.rng.poisson(rate * self.npix * dur * 1e-6))
        x = self.rng.integers(0, self.shape[1], n)
        y = self.rng.integers(0, self.shape[0], n)
        t = start_us + self.rng.integers(0, dur, n)
        p = self.rng.integers(0, 2, n) * 2 - 1
        return make_events(t, x, y, p)

    def burst_events(self, burst):
        """Expand a burst into individual (unsorted) events."""
        k = np.abs(burst.counts)
        total = int(k.sum())
        if total == 0:
            return empty_events()
        pix = np.repeat(burst.index, k)
        first = np.repeat(np.cumsum(k) - k, k)
        j = np.arange(total) - first
        t = burst.t_us + j * self.config.refractory_us
        p = np.repeat(np.sign(burst.counts), k)
        return make_events(t, pix % self.shape[1], pix // self.shape[1], p)


def bucket_limit(cap, bucket_us):
    """Events allowed per bucket, or ``None`` for an unlimited bus."""
    if math.isinf(cap):
        return None
    return int(math.floor(cap * bucket_us / 1e6))


class BusLimiter:
    """Drop-newest rate limiter over fixed ``bucket_us`` windows.

    At most ``floor(cap * bucket_us / 1e6)`` events pass per bucket; an
    infinite cap passes everything. The limiter keeps the fill of the last
    bucket so that a sorted stream may be fed in consecutive chunks.
    """

    def __init__(self, cap, bucket_us=1000):
        if cap <= 0 or bucket_us <= 0:
            raise ValueError("cap and bucket_us must be positive")
        self.limit = bucket_limit(cap, bucket_us)
        self.bucket_us = int(bucket_us)
        self._bucket = None
        self._used = 0

    def __call__(self, events):
        n = events.shape[0]
        if n == 0 or self.limit is None:
            return events, 0
        b = events["t"] // self.bucket_us
        starts = np.flatnonzero(np.r_[True, b[1:] != b[:-1]])
        run_start = np.repeat(starts, np.diff(np.r_[starts, n]))
        rank = np.arange(n) - run_start
        if self._bucket is not None and b[0] == self._bucket:
            rank[: (starts[1] if starts.size > 1 else n)] += self._used
        keep = rank < self.limit
        self._bucket = int(b[-1])
        self._used = min(self.limit, int(rank[-1]) + 1)
        out = events[keep]
        return out, n - out.shape[0]


def apply_bus_cap(events, cap, bucket_us=1000):
    """Limit a sorted stream to ``cap`` events/s per bucket; return ``(kept, dropped)``."""
    return BusLimiter(cap, bucket_us)(events)


def _check_next(prev, frame, index):
    if frame.end_us <= frame.start_us:
        raise ScheduleGapError(f"slot {index} starting at {frame.start_us} us has no duration")
    if prev is not None and prev.end_us != frame.start_us:
        raise ScheduleGapError(
            f"schedule gap between slot {index - 1} ({prev.end_us} us) and slot {index} ({frame.start_us} us)"
        )


def sense(slots, config, initial=None):
    """Turn consecutive irradiance slots into event and trigger streams.

    Parameters
    ----------
    slots : iterable of IrradianceFrame
        Contiguous in time; consumed once, so lazily rendered frames work.
    config : SensorConfig
    initial : array_like or float, optional
        Irradiance seen before the first slot. Defaults to the first slot's
        dark level when slots have a dark phase, else to the first frame.

    Returns
    -------
    SenseResult
    """
    sensor = None
    chunks, meta = [], []
    noise = 0
    prev = None
    for frame in slots:
        _check_next(prev, frame, len(meta))
        if sensor is None:
            sensor = EventSensor(config, frame.shape)
            if initial is None:
                initial = frame.ambient if frame.lit_until_us is not None else frame.values
            sensor.reset(initial)
        for burst in sensor.slot_bursts(frame):
            chunks.append(sensor.burst_events(burst))
        nz = sensor.slot_noise(frame.start_us, frame.end_us)
        noise += nz.shape[0]
        chunks.append(nz)
        meta.append((frame.start_us, frame.channel, frame.pattern_id))
        prev = frame
    if sensor is None:
        return SenseResult(empty_events(), make_triggers([], [], [], []), 0, 0, 0)
    events = sort_events(np.concatenate(chunks))
    generated = events.shape[0]
    delivered, dropped = apply_bus_cap(events, config.bus_cap, config.bucket_us)
    t, ch, pid = zip(*meta)
    triggers = make_triggers(t, np.arange(len(meta)), ch, pid)
    return SenseResult(delivered, triggers, generated, dropped, noise)
