"""Binary projector patterns and R/G/B-cycled projection schedules."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import PatternOverflowError

CHANNELS = ("R", "G", "B")
FAMILIES = ("dots", "lines", "moving_line", "solid")
DEFAULT_PROJECTOR_DIMS = (912, 1140)


@dataclass(frozen=True)
class Pattern:
    """A 1-bit projector frame.

    ``bitmap`` is a boolean ``(height, width)`` array; ``cp`` is the
    coverage percentage as a fraction of lit pixels.
    """

    family: str
    bitmap: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        bm = np.asarray(self.bitmap, dtype=bool)
        bm.flags.writeable = False
        object.__setattr__(self, "bitmap", bm)

    @property
    def cp(self):
        return int(np.count_nonzero(self.bitmap)) / self.bitmap.size

    @property
    def dims(self):
        """Projector dimensions as ``(width, height)``."""
        return (self.bitmap.shape[1], self.bitmap.shape[0])

    def __repr__(self):
        h, w = self.bitmap.shape
        return f"Pattern({self.family!r}, {w}x{h}, cp={self.cp:.4%}, params={self.params})"


def _spread(count, size, extent):
    """Left edges of ``count`` features of ``size`` uniformly spread over ``extent``."""
    pitch = extent / count
    starts = [math.floor(i * pitch + (pitch - size) / 2) for i in range(count)]
    if starts[0] < 0 or starts[-1] + size > extent:
        raise PatternOverflowError(f"pattern overflow: {count} x {size} px exceeds {extent} px")
    if any(b < a + size for a, b in zip(starts, starts[1:])):
        raise PatternOverflowError(f"pattern overflow: {count} features of {size} px overlap in {extent} px")
    return starts


def gen_dot_grid(rows, cols, dot_size, proj_dims=DEFAULT_PROJECTOR_DIMS):
    """Uniform grid of ``rows x cols`` square dots of ``dot_size`` pixels."""
    width, height = proj_dims
    if rows < 1 or cols < 1:
        raise ValueError("a dot grid needs at least one row and one column")
    if dot_size < 1:
        raise ValueError("dot_size must be >= 1")
    xs = _spread(cols, dot_size, width)
    ys = _spread(rows, dot_size, height)
    bm = np.zeros((height, width), dtype=bool)
    for y in ys:
        for x in xs:
            bm[y : y + dot_size, x : x + dot_size] = True
    off = (dot_size - 1) / 2
    centers = [(x + off, y + off) for y in ys for x in xs]
    return Pattern("dots", bm, {"rows": rows, "cols": cols, "dot_size": dot_size, "centers": centers})


def gen_multi_line(count, width, orientation="vertical", proj_dims=DEFAULT_PROJECTOR_DIMS):
    """``count`` uniformly spaced stripes of ``width`` pixels.

    Vertical stripes are spread across the frame width, horizontal ones
    across its height. ``count == 0`` gives an all-black pattern.
    """
    pw, ph = proj_dims
    vertical = _check_orientation(orientation)
    extent = pw if vertical else ph
    bm = np.zeros((ph, pw), dtype=bool)
    starts = []
    if count:
        if width < 1:
            raise ValueError("line width must be >= 1")
        starts = _spread(count, width, extent)
        for s in starts:
            if vertical:
                bm[:, s : s + width] = True
            else:
                bm[s : s + width, :] = True
    params = {"count": count, "width": width, "orientation": orientation, "starts": starts}
    return Pattern("lines", bm, params)


def gen_moving_line(step, total_steps, width, orientation="vertical", proj_dims=DEFAULT_PROJECTOR_DIMS):
    """Single stripe for ``step`` of a sweep of ``total_steps`` positions.

    The stripe starts at ``floor(step * extent / total_steps)`` and is
    clipped at the frame edge; with ``total_steps * width >= extent`` the
    union of all steps covers every column (or row).
    """
    if not 0 <= step < total_steps:
        raise ValueError(f"step {step} out of range for {total_steps} steps")
    if width < 1:
        raise ValueError("line width must be >= 1")
    pw, ph = proj_dims
    vertical = _check_orientation(orientation)
    extent = pw if vertical else ph
    start = (step * extent) // total_steps
    stop = min(start + width, extent)
    bm = np.zeros((ph, pw), dtype=bool)
    if vertical:
        bm[:, start:stop] = True
    else:
        bm[start:stop, :] = True
    params = {
        "step": step,
        "total_steps": total_steps,
        "width": width,
        "orientation": orientation,
        "start": start,
        "center": (start + stop - 1) / 2,
    }
    return Pattern("moving_line", bm, params)


class MovingLineSweep(Sequence):
    """All steps of a moving-line sweep, generated on access.

    Behaves like a tuple of :func:`gen_moving_line` patterns without
    holding every bitmap in memory at once.
    """

    def __init__(self, total_steps, width, orientation="vertical", proj_dims=DEFAULT_PROJECTOR_DIMS):
        if total_steps < 1:
            raise ValueError("a sweep needs at least one step")
        _check_orientation(orientation)
        self.total_steps = total_steps
        self.width = width
        self.orientation = orientation
        self.proj_dims = tuple(proj_dims)
        self._get = lru_cache(maxsize=8)(self._make)

    def _make(self, step):
        return gen_moving_line(step, self.total_steps, self.width, self.orientation, self.proj_dims)

    def __len__(self):
        return self.total_steps

    def __getitem__(self, step):
        if isinstance(step, slice):
            return [self[i] for i in range(*step.indices(len(self)))]
        if step < 0:
            step += self.total_steps
        return self._get(step)

    def centers(self):
        """Center column (or row) of every step, without building bitmaps."""
        extent = self.proj_dims[0] if self.orientation == "vertical" else self.proj_dims[1]
        start = (np.arange(self.total_steps) * extent) // self.total_steps
        stop = np.minimum(start + self.width, extent)
        return (start + stop - 1) / 2


def gen_solid(roi=None, proj_dims=DEFAULT_PROJECTOR_DIMS):
    """Lit rectangle ``roi = (x, y, width, height)``; ``None`` lights the whole frame."""
    pw, ph = proj_dims
    if roi is None:
        roi = (0, 0, pw, ph)
    x, y, w, h = (int(v) for v in roi)
    if w <= 0 or h <= 0:
        raise ValueError("roi is empty")
    if x < 0 or y < 0 or x + w > pw or y + h > ph:
        raise ValueError(f"roi {roi} is out of bounds for a {pw}x{ph} frame")
    bm = np.zeros((ph, pw), dtype=bool)
    bm[y : y + h, x : x + w] = True
    return Pattern("solid", bm, {"roi": (x, y, w, h)})


def gen_black(proj_dims=DEFAULT_PROJECTOR_DIMS):
    pw, ph = proj_dims
    return Pattern("black", np.zeros((ph, pw), dtype=bool), {})


def _check_orientation(orientation):
    if orientation not in ("vertical", "horizontal"):
        raise ValueError(f"orientation must be 'vertical' or 'horizontal', not {orientation!r}")
    return orientation == "vertical"


def pattern_for_cp(target, family="dots", proj_dims=DEFAULT_PROJECTOR_DIMS, line_width=8, max_dot_size=16):
    """Build the pattern of ``family`` whose coverage is closest to ``target``.

    Dot grids search dot size and grid shape (preferring grids whose
    aspect follows the frame), line patterns keep ``line_width`` and
    search the count, solid patterns use a centered ROI.
    """
    pw, ph = proj_dims
    area = pw * ph
    if not 0 < target <= 1:
        raise ValueError("target coverage must lie in (0, 1]")
    if family == "dots":
        best = None
        for s in range(1, max_dot_size + 1):
            for rows in range(1, ph // s + 1):
                cols = round(target * area / (rows * s * s))
                if cols < 1 or cols > pw // s:
                    continue
                err = abs(rows * cols * s * s - target * area)
                aspect = abs(math.log((rows / cols) / (ph / pw)))
                key = (err, aspect, s)
                if best is None or key < best[0]:
                    best = (key, rows, cols, s)
        if best is None:
            raise PatternOverflowError(f"no dot grid reaches cp={target}")
        return gen_dot_grid(best[1], best[2], best[3], proj_dims)
    if family == "lines":
        count = max(1, round(target * pw / line_width))
        return gen_multi_line(count, line_width, "vertical", proj_dims)
    if family == "solid":
        k = math.sqrt(target)
        w, h = max(1, round(k * pw)), max(1, round(k * ph))
        return gen_solid(((pw - w) // 2, (ph - h) // 2, w, h), proj_dims)
    raise ValueError(f"cannot target coverage with family {family!r}")


@dataclass(frozen=True)
class Slot:
    start_us: int
    end_us: int
    channel: str
    pattern_id: int

    @property
    def duration_us(self):
        return self.end_us - self.start_us


@dataclass(frozen=True)
class SequencePlan:
    """Contiguous projection slots cycling R, G, B for every pattern."""

    slots: tuple
    switch_rate: Fraction
    patterns: tuple = ()

    @property
    def equivalent_fps(self):
        """Color frames per second: the switch rate over three channels."""
        return self.switch_rate / len(CHANNELS)

    @property
    def cycle_window_us(self):
        return float(Fraction(10**6) / self.equivalent_fps)

    @property
    def end_us(self):
        return self.slots[-1].end_us if self.slots else 0

    def pattern(self, slot):
        return self.patterns[self.slots[slot].pattern_id]


def build_sequence(patterns, switch_rate, repetitions=1, start_us=0):
    """Schedule every pattern once per channel, in R, G, B order.

    Slot boundaries sit at ``round(i * 1e6 / switch_rate)`` microseconds so
    that slots stay contiguous and each lasts ``1/switch_rate`` within one
    microsecond of rounding.
    """
    if not isinstance(patterns, Sequence):
        patterns = tuple(patterns)
    if not len(patterns):
        raise ValueError("empty pattern list")
    if switch_rate <= 0:
        raise ValueError("switch_rate must be positive")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    rate = Fraction(switch_rate)
    period = Fraction(10**6) / rate
    slots = []
    i = 0
    for _ in range(repetitions):
        for pid in range(len(patterns)):
            for ch in CHANNELS:
                start = start_us + round(i * period)
                end = start_us + round((i + 1) * period)
                slots.append(Slot(start, end, ch, pid))
                i += 1
    return SequencePlan(tuple(slots), rate, patterns)


def switch_rate_for_window(window_ms):
    """Switch rate (Hz) whose R, G, B cycle lasts ``window_ms``."""
    return Fraction(3000) / Fraction(str(window_ms))


def fps_for_window(window_ms):
    return float(Fraction(1000) / Fraction(str(window_ms)))
