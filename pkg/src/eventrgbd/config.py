"""Plain-text run configuration.

A config file holds ``section.key = value`` lines; ``#`` starts a comment.
Every key has a default (see :data:`DEFAULTS` or the README table), so an
empty file is a valid configuration. Unknown keys are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class ProjectorConfig:
    width: int = 912
    height: int = 1140
    switch_rate_hz: float = 4225.0
    s_pow_r: float = 1.0
    s_pow_g: float = 1.0
    s_pow_b: float = 1.0
    fx: float = 1200.0
    fy: float = 1200.0
    cx: float = -1.0
    cy: float = -1.0
    baseline_m: float = 0.1
    exposure: float = 0.5


@dataclass(frozen=True)
class CameraConfig:
    width: int = 640
    height: int = 480
    fx: float = 1000.0
    fy: float = 1000.0
    cx: float = -1.0
    cy: float = -1.0
    contrast_threshold: float = 0.2
    refractory_us: int = 1
    log_eps: float = 1e-3
    bus_cap_events_per_s: float = math.inf
    bucket_us: int = 1000
    noise_rate: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class SceneConfig:
    distance_m: float = 1.6
    tilt_deg: float = 0.0
    texture: str = "chart"
    width_m: float = 0.8
    ambient: float = 0.01
    falloff: bool = False


@dataclass(frozen=True)
class PatternConfig:
    family: str = "solid"
    cp: float = 0.0
    rows: int = 16
    cols: int = 16
    dot_size: int = 5
    count: int = 8
    width: int = 8
    orientation: str = "vertical"
    steps: int = 114
    roi: str = ""
    repetitions: int = 1


@dataclass(frozen=True)
class ColorConfig:
    white_balance: bool = False
    reference_region: str = ""
    gain_r: float = 1.0
    gain_g: float = 1.0
    gain_b: float = 1.0
    scale: float = 0.0
    percentile: float = 99.0


@dataclass(frozen=True)
class AslConfig:
    budget: float = 2e9
    beta_low: float = 0.5
    beta_high: float = 0.85
    margin: float = 0.9
    dwell: int = 3
    cycles: int = 300
    motion_start: float = 0.0
    motion_end: float = 1.6e9


@dataclass(frozen=True)
class SweepConfig:
    cps: str = "0.0154,0.0222,0.0702"
    windows_ms: str = "2.5,7.14"
    frames: int = 100
    gt_window_ms: float = 1000.0
    family: str = "auto"
    tolerance: float = 0.01


@dataclass(frozen=True)
class DepthConfig:
    mode: str = "dots"
    gap_threshold_m: float = 0.005
    min_count: int = 3
    prior_distance_m: float = 0.0


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"


@dataclass(frozen=True)
class RunConfig:
    projector: ProjectorConfig = field(default_factory=ProjectorConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    pattern: PatternConfig = field(default_factory=PatternConfig)
    color: ColorConfig = field(default_factory=ColorConfig)
    asl: AslConfig = field(default_factory=AslConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    depth: DepthConfig = field(default_factory=DepthConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        _validate(self)

    def with_values(self, **sections):
        """Copy with ``section={key: value}`` overrides applied."""
        cfg = self
        for name, values in sections.items():
            cfg = replace(cfg, **{name: replace(getattr(cfg, name), **values)})
        return cfg


POSITIVE = {
    "projector": ("width", "height", "switch_rate_hz", "fx", "fy"),
    "camera": ("width", "height", "fx", "fy", "contrast_threshold", "log_eps", "bus_cap_events_per_s", "bucket_us"),
    "scene": ("distance_m", "width_m"),
    "pattern": ("repetitions", "steps"),
    "asl": ("budget", "margin", "cycles"),
    "sweep": ("frames", "gt_window_ms"),
    "depth": ("gap_threshold_m",),
}
NONNEGATIVE = {
    "projector": ("s_pow_r", "s_pow_g", "s_pow_b", "exposure"),
    "camera": ("refractory_us", "noise_rate", "seed"),
    "scene": ("ambient",),
    "asl": ("dwell", "motion_start", "motion_end"),
}


def _validate(cfg):
    for section, keys in POSITIVE.items():
        for key in keys:
            if not getattr(getattr(cfg, section), key) > 0:
                raise ConfigError(f"{section}.{key} must be positive")
    for section, keys in NONNEGATIVE.items():
        for key in keys:
            if getattr(getattr(cfg, section), key) < 0:
                raise ConfigError(f"{section}.{key} must be nonnegative")
    if cfg.projector.exposure > 1:
        raise ConfigError("projector.exposure must lie in [0, 1]")
    if not 0 < cfg.asl.beta_low < cfg.asl.beta_high <= 1:
        raise ConfigError("need 0 < asl.beta_low < asl.beta_high <= 1")


def defaults():
    """``{"section.key": default}`` for every accepted key."""
    cfg = RunConfig()
    out = {}
    for sec in fields(RunConfig):
        for f in fields(getattr(cfg, sec.name)):
            out[f"{sec.name}.{f.name}"] = getattr(getattr(cfg, sec.name), f.name)
    return out


DEFAULTS = defaults()


def _convert(key, raw, default):
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {type(default).__name__}, got {raw!r}") from None
    return raw


def parse_overrides(pairs, base=None):
    """Apply ``("section.key", "value")`` pairs to ``base`` (defaults if omitted)."""
    base = RunConfig() if base is None else base
    sections = {}
    for key, raw in pairs:
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        raw = raw.strip()
        if raw == "":
            raise ConfigError(f"{key} requires a value (default: {DEFAULTS[key]!r})")
        section, name = key.split(".", 1)
        sections.setdefault(section, {})[name] = _convert(key, raw, DEFAULTS[key])
    return base.with_values(**sections)


def parse_config_text(text):
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {line!r}")
        key, raw = line.split("=", 1)
        pairs.append((key, raw))
    return parse_overrides(pairs)


def parse_config(path):
    return parse_config_text(Path(path).read_text())


def format_config(cfg):
    """Config text listing every key, parseable by :func:`parse_config_text`."""
    lines = []
    for sec in fields(RunConfig):
        for f in fields(getattr(cfg, sec.name)):
            value = getattr(getattr(cfg, sec.name), f.name)
            if value == "":
                continue
            lines.append(f"{sec.name}.{f.name} = {str(value).lower() if isinstance(value, bool) else value}")
    return "\n".join(lines) + "\n"
