"""End-to-end runs built from a :class:`~eventrgbd.config.RunConfig`."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .asl import LOG_HEADER, ASLController, PatternLadder, SLCostModel
from .color import ColorReconstructor, accumulate_channels, slot_bounds
from .depth import (
    DepthSamples,
    cluster_dots,
    colorize_cloud,
    correspond_and_triangulate,
    depth_from_moving_line,
)
from .errors import IncompleteCycleError, PatternOverflowError
from .metrics import hsv_histograms, histogram_correlation, rmse_per_channel
from .patterns import CHANNELS, build_sequence, fps_for_window, gen_solid, pattern_for_cp, switch_rate_for_window
from .scenes import build_patterns, build_rig, parse_floats, parse_ints
from .sensor import EventSensor, bucket_limit, sense
from .validation import region_mask

SWEEP_HEADER = "cp,cp_actual,family,window_ms,equivalent_fps,frames,rmse_r,rmse_g,rmse_b,rmse,hc,flag"


@dataclass
class Simulation:
    events: np.ndarray
    triggers: np.ndarray
    plan: object
    rig: object
    generated: int
    dropped: int
    noise: int

    @property
    def end_us(self):
        return self.plan.end_us


def make_plan(cfg, patterns, switch_rate=None, repetitions=None):
    rate = cfg.projector.switch_rate_hz if switch_rate is None else switch_rate
    reps = cfg.pattern.repetitions if repetitions is None else repetitions
    return build_sequence(patterns, rate, reps)


def simulate(cfg, rig=None, patterns=None, switch_rate=None, repetitions=None):
    """Render and sense the configured pattern sequence."""
    rig = build_rig(cfg) if rig is None else rig
    patterns = build_patterns(cfg, rig.proj_dims) if patterns is None else patterns
    plan = make_plan(cfg, patterns, switch_rate, repetitions)
    frames = rig.renderer.render_plan(plan, rig.s_pow, rig.ambient, rig.exposure)
    res = sense(frames, rig.sensor)
    return Simulation(res.events, res.triggers, plan, rig, res.generated, res.dropped, res.noise)


def cycle_groups(triggers):
    """Split a trigger stream into R, G, B cycles.

    Returns the index of the R slot of every complete cycle and the number
    of incomplete cycles that were skipped.
    """
    ch = triggers["channel"]
    n = ch.shape[0]
    starts, skipped, i = [], 0, 0
    while i < n:
        if i + 2 < n and ch[i] == 0 and ch[i + 1] == 1 and ch[i + 2] == 2:
            starts.append(i)
            i += 3
            continue
        skipped += 1
        i += 1
        while i < n and ch[i] != 0:
            i += 1
    return starts, skipped


def cycle_counts(events, triggers, shape, end_us):
    """Per-cycle :class:`ChannelCounts` plus the number of skipped cycles."""
    starts, skipped = cycle_groups(triggers)
    s_us, e_us = slot_bounds(triggers, end_us)
    out = []
    t = events["t"]
    for i in starts:
        t0, t1 = int(s_us[i]), int(e_us[i + 2])
        lo, hi = np.searchsorted(t, [t0, t1])
        sub = slice(i, i + 3)
        out.append(accumulate_channels(events[lo:hi], triggers[sub], shape, (t0, t1), t1))
    return out, skipped


def reference_region(cfg, rig):
    """Neutral region for white balance: the configured rectangle or the texture's gray card."""
    rect = parse_ints(cfg.color.reference_region)
    if rect:
        return region_mask(rect, rig.camera.shape)
    return rig.reference_mask()


def make_reconstructor(cfg, rig=None):
    c = cfg.color
    gains = (c.gain_r, c.gain_g, c.gain_b)
    fixed = None if c.white_balance or gains == (1.0, 1.0, 1.0) else gains
    region = None
    if c.white_balance:
        region = parse_ints(c.reference_region) or (rig.reference_mask() if rig is not None else None)
        if region is not None and not isinstance(region, tuple):
            region = np.asarray(region)
    return ColorReconstructor(
        white_balance=c.white_balance,
        reference_region=region,
        scale=c.scale if c.scale > 0 else None,
        percentile=c.percentile,
        gains=fixed,
    )


def reconstruct_frames(events, triggers, shape, reconstructor, end_us):
    """One color frame per complete cycle.

    The reconstructor is fitted on the mean counts of all cycles so that
    every frame shares one scale and one set of gains.

    Returns
    -------
    frames : (N, H, W, 3) uint8
    skipped : int
        Incomplete cycles that produced no frame.
    """
    counts, skipped = cycle_counts(events, triggers, shape, end_us)
    h, w = shape
    if not counts:
        return np.zeros((0, h, w, 3), dtype=np.uint8), skipped
    stack = np.stack([c.counts for c in counts])
    reconstructor.fit(stack.mean(axis=0))
    return reconstructor.transform(stack), skipped


class CycleCounter:
    """Per-cycle ON counts straight from sensor bursts.

    Equivalent to sensing the slots, then accumulating every complete cycle,
    as long as the bus cap never binds; no event is materialized. Per-bucket
    event totals are tracked so :attr:`cap_binding` reports whether the
    equivalence held.
    """

    def __init__(self, frames, config, initial=None):
        self.frames = frames
        if len(self.frames) % 3:
            raise IncompleteCycleError("incomplete cycle: slot count is not a multiple of 3")
        self.config = config
        self.shape = self.frames[0].shape
        self.initial = initial
        self.limit = bucket_limit(config.bus_cap, config.bucket_us)
        n_buckets = self.frames[-1].end_us // config.bucket_us + 1
        self.bucket_counts = np.zeros(n_buckets, dtype=np.int64)
        self.generated = 0

    @property
    def cap_binding(self):
        return self.limit is not None and bool(self.bucket_counts.max(initial=0) > self.limit)

    def _tally(self, burst):
        k = np.abs(burst.counts)
        if k.size == 0:
            return
        hist = np.bincount(k)
        alive = k.size - np.cumsum(hist)[:-1]  # pixels still firing at step j
        times = burst.t_us + np.arange(alive.size) * self.config.refractory_us
        np.add.at(self.bucket_counts, times // self.config.bucket_us, alive)
        self.generated += int(k.sum())

    def __iter__(self):
        sensor = EventSensor(self.config, self.shape)
        first = self.frames[0]
        initial = self.initial
        if initial is None:
            initial = first.ambient if first.lit_until_us is not None else first.values
        sensor.reset(initial)
        h, w = self.shape
        npix = h * w
        for c0 in range(0, len(self.frames), 3):
            counts = np.zeros((3, npix), dtype=np.int64)
            for frame in self.frames[c0 : c0 + 3]:
                ch = CHANNELS.index(frame.channel)
                for burst in sensor.slot_bursts(frame):
                    self._tally(burst)
                    on = burst.counts > 0
                    counts[ch, burst.index[on]] += burst.counts[on]
                nz = sensor.slot_noise(frame.start_us, frame.end_us)
                if nz.shape[0]:
                    np.add.at(self.bucket_counts, nz["t"] // self.config.bucket_us, 1)
                    self.generated += nz.shape[0]
                    p = nz[nz["p"] > 0]
                    counts[ch] += np.bincount(p["y"].astype(np.int64) * w + p["x"], minlength=npix)
            yield counts.reshape(3, h, w)


def materialized_cycle_counts(frames, config):
    """Reference path: sense every slot, then accumulate each cycle."""
    res = sense(frames, config)
    counts, _ = cycle_counts(res.events, res.triggers, frames[0].shape, frames[-1].end_us)
    return [c.counts for c in counts]


@dataclass(frozen=True)
class SweepRow:
    cp: float
    cp_actual: float
    family: str
    window_ms: float
    equivalent_fps: float
    frames: int
    rmse_r: float
    rmse_g: float
    rmse_b: float
    rmse: float
    hc: float
    flag: str = ""

    def csv_row(self):
        return (
            f"{self.cp:.6g},{self.cp_actual:.6f},{self.family},{self.window_ms:g},{self.equivalent_fps:.6g},"
            f"{self.frames},{self.rmse_r:.6f},{self.rmse_g:.6f},{self.rmse_b:.6f},{self.rmse:.6f},{self.hc:.6f},{self.flag}"
        )


AUTO_FAMILY_LIMITS = (("dots", 0.05), ("lines", 0.5), ("solid", 1.0))


def sweep_pattern(target, family, proj_dims, line_width=8, tolerance=0.01):
    """Pattern whose coverage is closest to ``target``.

    ``family="auto"`` follows the density ladder: dot grids for sparse
    coverage, stripes up to one half, solid above. If the preferred family
    misses ``target`` by more than ``tolerance`` (relative) the others are
    tried as well and the closest wins. ``None`` when nothing fits.
    """
    if family == "auto":
        first = next(f for f, limit in AUTO_FAMILY_LIMITS if target <= limit or f == "solid")
        fams = (first,) + tuple(f for f, _ in AUTO_FAMILY_LIMITS if f != first)
    else:
        fams = (family,)
    best = None
    for fam in fams:
        try:
            pat = pattern_for_cp(target, fam, proj_dims, line_width=line_width)
        except (ValueError, PatternOverflowError):
            continue
        err = abs(pat.cp - target)
        if best is None or err < best[0]:
            best = (err, pat)
        if err <= tolerance * target:
            break
    return None if best is None else best[1]


def _frames_for(rig, pattern, rate, cycles):
    plan = build_sequence([pattern], rate, cycles)
    return rig.renderer.render_plan(plan, rig.s_pow, rig.ambient, rig.exposure)


def sweep_cell(rig, pattern, window_ms, n_frames, gt_window_ms, scale=None, percentile=99.0):
    """Average RMSE and HC of single-cycle frames against a long-window ground truth.

    The ground truth is the mean per-cycle count over ``gt_window_ms``,
    mapped to 8 bits with auto-exposure; the scored frames are the first
    ``n_frames`` cycles of the same run and share the ground-truth scale.
    """
    rate = switch_rate_for_window(window_ms)
    gt_cycles = max(n_frames, int(round(gt_window_ms / window_ms)))
    frames = _frames_for(rig, pattern, rate, gt_cycles)
    counter = CycleCounter(frames, rig.sensor)
    total = np.zeros((3,) + rig.camera.shape)
    first = []
    for i, c in enumerate(counter):
        total += c
        if i < n_frames:
            first.append(c.astype(np.uint16))
    flag = ""
    if counter.cap_binding:
        # the bus cap drops events, so fall back to explicit event streams
        flag = "bus_saturated"
        per_cycle = materialized_cycle_counts(frames, rig.sensor)
        total = np.sum(per_cycle, axis=0).astype(np.float64)
        first = per_cycle[:n_frames]
    rec = ColorReconstructor(white_balance=False, scale=scale, percentile=percentile).fit(total / gt_cycles)
    gt = rec.transform(total / gt_cycles)
    gt_hist = hsv_histograms(gt)
    acc = np.zeros(5)
    for c in first:
        frame = rec.transform(c)
        r, g, b, overall = rmse_per_channel(frame, gt)
        acc += (r, g, b, overall, histogram_correlation(frame, gt, base_hist=gt_hist))
    return acc / len(first), flag


def sweep(cfg, progress=None):
    """Rows for every (coverage, window) pair of the ``sweep`` section."""
    rig = build_rig(cfg)
    cps = parse_floats(cfg.sweep.cps)
    windows = parse_floats(cfg.sweep.windows_ms)
    if not cps or not windows:
        raise ValueError("sweep needs at least one coverage and one window")
    scale = cfg.color.scale if cfg.color.scale > 0 else None
    rows = []
    for cp in cps:
        pat = sweep_pattern(cp, cfg.sweep.family, rig.proj_dims, cfg.pattern.width, cfg.sweep.tolerance)
        for wms in windows:
            fps = fps_for_window(wms)
            if pat is None:
                nan = float("nan")
                rows.append(SweepRow(cp, nan, "none", wms, fps, 0, nan, nan, nan, nan, nan, "cp_unreachable"))
                continue
            flags = []
            if abs(pat.cp - cp) > cfg.sweep.tolerance * cp:
                flags.append("cp_unreachable")
            m, flag = sweep_cell(rig, pat, wms, cfg.sweep.frames, cfg.sweep.gt_window_ms, scale, cfg.color.percentile)
            if flag:
                flags.append(flag)
            rows.append(SweepRow(cp, pat.cp, pat.family, wms, fps, cfg.sweep.frames, *m, "|".join(flags)))
            if progress is not None:
                progress(rows[-1])
    return rows


def format_sweep(rows):
    return SWEEP_HEADER + "\n" + "".join(r.csv_row() + "\n" for r in rows)


@dataclass
class DepthRun:
    samples: DepthSamples
    cloud: object
    frame: np.ndarray
    rig: object
    stats: dict = field(default_factory=dict)


def color_frame(cfg, rig):
    """Reconstructed color of the scene under a full-frame solid pattern."""
    sim = simulate(cfg, rig, [gen_solid(None, rig.proj_dims)], repetitions=1)
    rec = make_reconstructor(cfg, rig)
    frames, _ = reconstruct_frames(sim.events, sim.triggers, rig.camera.shape, rec, sim.end_us)
    return frames[0]


def depth_prior(cfg, rig):
    d = cfg.depth.prior_distance_m if cfg.depth.prior_distance_m > 0 else cfg.scene.distance_m
    return (np.array([0.0, 0.0, 1.0]), float(d))


def run_depth(cfg, rig=None):
    """Triangulate the configured depth mode and color the resulting cloud."""
    rig = build_rig(cfg) if rig is None else rig
    mode = cfg.depth.mode
    if mode == "dots":
        pats = build_patterns(cfg.with_values(pattern={"family": "dots"}), rig.proj_dims)
        sim = simulate(cfg, rig, pats, repetitions=1)
        obs = cluster_dots(sim.events, rig.camera.shape, min_count=cfg.depth.min_count, slot=0)
        samples = correspond_and_triangulate(
            obs, pats[0], rig.camera, rig.projector, depth_prior(cfg, rig), cfg.depth.gap_threshold_m
        )
    elif mode == "moving_line":
        pc = cfg.pattern
        pats = build_patterns(cfg.with_values(pattern={"family": "moving_line"}), rig.proj_dims)
        sim = simulate(cfg, rig, pats, repetitions=1)
        centers = pats.centers()
        schedule = {i: float(centers[slot.pattern_id]) for i, slot in enumerate(sim.plan.slots)}
        samples = depth_from_moving_line(
            sim.events, sim.triggers, schedule, rig.camera, rig.projector, pc.orientation, sim.end_us
        )
    else:
        raise ValueError(f"unknown depth mode {mode!r}")
    frame = color_frame(cfg, rig)
    cloud = colorize_cloud(samples, frame)
    return DepthRun(samples, cloud, frame, rig, dict(samples.stats, dropped=cloud.dropped))


def ladder_costs(rig, ladder, rate, cycles_per_pattern=1):
    """Measured structured-light events per cycle for every ladder rung."""
    out = []
    for rung in ladder:
        totals = []
        for pat in rung.patterns:
            frames = _frames_for(rig, pat, rate, cycles_per_pattern)
            counter = CycleCounter(frames, rig.sensor)
            for _ in counter:
                pass
            totals.append(counter.generated / cycles_per_pattern)
        out.append(float(np.mean(totals)))
    return out


def motion_trace(cfg):
    a = cfg.asl
    return np.linspace(a.motion_start, a.motion_end, a.cycles)


@dataclass
class AslRun:
    decisions: list
    alpha: float
    costs: list
    ladder: PatternLadder


def run_asl(cfg, rig=None, trace=None):
    """Fit the SL cost on the rig, then drive the controller over a motion-rate ramp."""
    rig = build_rig(cfg.with_values(camera={"noise_rate": 0.0})) if rig is None else rig
    ladder = PatternLadder.default(rig.proj_dims)
    costs = ladder_costs(rig, ladder, cfg.projector.switch_rate_hz)
    alpha = SLCostModel().fit(ladder.cps, costs).coef_
    a = cfg.asl
    cycle_rate = cfg.projector.switch_rate_hz / 3
    ctl = ASLController(ladder.cps, a.budget, cycle_rate, a.beta_low, a.beta_high, a.margin, a.dwell)
    trace = motion_trace(cfg) if trace is None else trace
    return AslRun(ctl.run(trace, alpha), alpha, costs, ladder)


def format_decisions(decisions):
    return LOG_HEADER + "\n" + "".join(d.csv_row() + "\n" for d in decisions)

