"""Adaptive structured light: pick pattern density under an event-rate budget.

The controller walks a ladder of patterns ordered by coverage. Its load
model is ``r_M + alpha * CP * cycle_rate``: motion events plus structured
light events, the latter proportional to the coverage of the projected
pattern. A rung is feasible when that load stays within ``margin * budget``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .color import slot_bounds
from .patterns import (
    DEFAULT_PROJECTOR_DIMS,
    gen_moving_line,
    gen_solid,
    pattern_for_cp,
)

LOG_HEADER = "time_us,rung,cp,r_sl,r_m,utilization,flag"


@dataclass(frozen=True)
class Rung:
    """One ladder step: a static pattern or a cycle of moving-line steps."""

    name: str
    patterns: tuple

    @property
    def cp(self):
        return float(np.mean([p.cp for p in self.patterns]))

    def pattern(self, cycle):
        return self.patterns[cycle % len(self.patterns)]


class PatternLadder:
    """Rungs sorted by strictly increasing coverage."""

    def __init__(self, rungs):
        rungs = tuple(rungs)
        if len(rungs) < 2:
            raise ValueError("a pattern ladder needs at least two rungs")
        cps = [r.cp for r in rungs]
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ValueError(f"ladder coverages must be strictly increasing, got {cps}")
        self.rungs = rungs

    def __len__(self):
        return len(self.rungs)

    def __getitem__(self, i):
        return self.rungs[i]

    @property
    def cps(self):
        return np.array([r.cp for r in self.rungs])

    @classmethod
    def default(cls, proj_dims=DEFAULT_PROJECTOR_DIMS, moving_steps=3):
        """Dots M, dots N, lines M, lines N, moving line, solid.

        Dot and line coverages follow the sparsest dot and line settings
        of the reference experiments; the moving line uses a bar of
        ``1/moving_steps`` of the frame width.
        """
        width = proj_dims[0]
        bar = -(-width // moving_steps)
        moving = tuple(gen_moving_line(s, moving_steps, bar, "vertical", proj_dims) for s in range(moving_steps))
        return cls(
            [
                Rung("dots_M", (pattern_for_cp(0.0154, "dots", proj_dims),)),
                Rung("dots_N", (pattern_for_cp(0.0222, "dots", proj_dims),)),
                Rung("lines_M", (pattern_for_cp(0.0702, "lines", proj_dims),)),
                Rung("lines_N", (pattern_for_cp(0.1404, "lines", proj_dims),)),
                Rung("moving_line", moving),
                Rung("solid", (gen_solid(None, proj_dims),)),
            ]
        )


def estimate_rates(events, triggers, footprints, horizon, end_us=None):
    """Split the event rate into structured-light and motion parts.

    An event counts as structured light when it falls inside a projector
    slot at a camera pixel lit by that slot's pattern (``footprints`` maps
    pattern id to a boolean camera mask). Everything else is motion or
    noise.

    Returns
    -------
    (r_sl, r_m) : rates in events per second
    """
    t0, t1 = horizon
    if t1 <= t0:
        raise ValueError("empty horizon")
    sel = (events["t"] >= t0) & (events["t"] < t1)
    ev = events[sel]
    total = ev.shape[0]
    sl = np.zeros(total, dtype=bool)
    if triggers.shape[0] and total:
        if end_us is None:
            end_us = t1 if triggers.shape[0] < 2 else max(t1, int(triggers["t"][-1]))
        starts, ends = slot_bounds(triggers, end_us)
        slot = np.searchsorted(starts, ev["t"], side="right") - 1
        inside = (slot >= 0) & (ev["t"] < ends[np.clip(slot, 0, None)])
        pids = triggers["pattern"]
        for pid in np.unique(pids):
            mask = footprints[int(pid)]
            if mask is None:
                continue
            hit = inside & (pids[np.clip(slot, 0, None)] == pid)
            idx = np.flatnonzero(hit)
            sl[idx] = mask[ev["y"][idx], ev["x"][idx]]
    span = (t1 - t0) * 1e-6
    n_sl = int(sl.sum())
    return n_sl / span, (total - n_sl) / span


class SLCostModel(RegressorMixin, BaseEstimator):
    """Structured-light events per cycle as ``alpha * CP`` (fit through the origin)."""

    def fit(self, X, y):
        cp = np.asarray(X, dtype=np.float64).reshape(-1)
        e = np.asarray(y, dtype=np.float64).reshape(-1)
        if cp.shape != e.shape:
            raise ValueError("X and y must have the same number of samples")
        denom = float(cp @ cp)
        if denom == 0:
            raise ValueError("all coverage samples are zero")
        self.coef_ = float(cp @ e) / denom
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return self.coef_ * np.asarray(X, dtype=np.float64).reshape(-1)


def fit_sl_cost(history):
    """Least-squares ``alpha`` from ``(cp, events_per_cycle)`` samples."""
    history = list(history)
    if not history:
        raise ValueError("all coverage samples are zero")
    cp, e = zip(*history)
    return SLCostModel().fit(cp, e).coef_


@dataclass
class ControllerState:
    rung: int
    dwell_left: int
    r_m: float = 0.0
    alpha: float = 0.0


@dataclass(frozen=True)
class Decision:
    time_us: int
    rung: int
    cp: float
    r_sl: float
    r_m: float
    utilization: float
    flag: str
    changed: bool

    def csv_row(self):
        return f"{self.time_us},{self.rung},{self.cp:.6f},{self.r_sl:.3f},{self.r_m:.3f},{self.utilization:.6f},{self.flag}"


class ASLController:
    """Hysteretic one-rung-at-a-time pattern selector.

    Parameters
    ----------
    cps : sequence of float
        Ladder coverages, strictly increasing.
    budget : float
        Bus budget in events per second.
    cycle_rate : float
        Color cycles per second (the equivalent frame rate).
    beta_low, beta_high : float
        Utilization dead band: climb only if the next rung stays below
        ``beta_low``, descend when the current rung exceeds ``beta_high``.
    margin : float
        Fraction of the budget that counts as usable; utilization is
        measured against ``margin * budget``.
    dwell : int
        Cycles to wait after start-up and after every change.
    """

    def __init__(self, cps, budget, cycle_rate, beta_low=0.5, beta_high=0.85, margin=0.9, dwell=3, initial_rung=0):
        self.cps = np.asarray(cps, dtype=np.float64)
        if self.cps.size < 2 or np.any(np.diff(self.cps) <= 0):
            raise ValueError("ladder coverages must be strictly increasing with at least two rungs")
        if not 0 < beta_low < beta_high <= 1:
            raise ValueError("need 0 < beta_low < beta_high <= 1")
        if not 0 < margin <= 1:
            raise ValueError("margin must lie in (0, 1]")
        if budget <= 0 or cycle_rate <= 0:
            raise ValueError("budget and cycle_rate must be positive")
        if dwell < 0:
            raise ValueError("dwell must be >= 0")
        if not 0 <= initial_rung < self.cps.size:
            raise ValueError("initial rung outside the ladder")
        self.budget = float(budget)
        self.cycle_rate = float(cycle_rate)
        self.beta_low = beta_low
        self.beta_high = beta_high
        self.margin = margin
        self.dwell = int(dwell)
        self.state = ControllerState(initial_rung, self.dwell)

    def sl_rate(self, rung, alpha):
        return alpha * self.cps[rung] * self.cycle_rate

    def utilization(self, rung, r_m, alpha):
        return (r_m + self.sl_rate(rung, alpha)) / (self.margin * self.budget)

    def select(self, r_m, alpha):
        """Rung to move to from the current one, and the flag to raise."""
        c = self.state.rung
        u = [self.utilization(i, r_m, alpha) for i in range(self.cps.size)]
        feasible = [i for i, ui in enumerate(u) if ui <= 1.0]
        if not feasible:
            return 0, "infeasible"
        target = max(feasible)
        if u[c] > self.beta_high and c > 0:
            new = c - 1
        elif target > c and u[c + 1] < self.beta_low:
            new = c + 1
        else:
            new = c
        return new, ("" if u[new] <= 1.0 else "over_budget")

    def step(self, r_m, alpha, time_us=0):
        """Advance one cycle; decide only once the dwell countdown has expired."""
        st = self.state
        st.r_m, st.alpha = float(r_m), float(alpha)
        if st.dwell_left > 0:
            st.dwell_left -= 1
            new = st.rung
            flag = "" if self.utilization(new, r_m, alpha) <= 1.0 else "over_budget"
        else:
            new, flag = self.select(r_m, alpha)
        changed = new != st.rung
        if changed:
            st.rung = new
            st.dwell_left = self.dwell
        return Decision(
            int(time_us),
            new,
            float(self.cps[new]),
            float(self.sl_rate(new, alpha)),
            float(r_m),
            float(self.utilization(new, r_m, alpha)),
            flag,
            changed,
        )

    def run(self, r_m_trace, alpha, cycle_us=None):
        """Decisions for a scripted motion-rate trace, one entry per cycle."""
        if cycle_us is None:
            cycle_us = 1e6 / self.cycle_rate
        return [self.step(r, alpha, round(i * cycle_us)) for i, r in enumerate(r_m_trace)]
