"""Built-in calibration textures and rig assembly from a run configuration."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import PinholeModel, ScenePlane
from .patterns import (
    gen_black,
    gen_dot_grid,
    gen_multi_line,
    gen_solid,
    MovingLineSweep,
    pattern_for_cp,
)
from .radiometry import Renderer, SpectralPower
from .sensor import SensorConfig

# sRGB values of the 24 patches of a classic color checker, row-major
COLOR_CHECKER = np.array(
    [
        [115, 82, 68], [194, 150, 130], [98, 122, 157], [87, 108, 67], [133, 128, 177], [103, 189, 170],
        [214, 126, 44], [80, 91, 166], [193, 90, 99], [94, 60, 108], [157, 188, 64], [224, 163, 46],
        [56, 61, 150], [70, 148, 73], [175, 54, 60], [231, 199, 31], [187, 86, 149], [8, 133, 161],
        [243, 243, 242], [200, 200, 200], [160, 160, 160], [122, 122, 121], [85, 85, 85], [52, 52, 52],
    ],
    dtype=np.float64,
) / 255.0

# printed inks are not spectrally pure: each leaks into the other channels
WHEEL_INKS = np.array(
    [
        [0.85, 0.22, 0.18],
        [0.88, 0.80, 0.20],
        [0.25, 0.68, 0.30],
        [0.22, 0.62, 0.78],
        [0.20, 0.25, 0.72],
        [0.70, 0.22, 0.62],
    ]
)


@dataclass(frozen=True)
class Texture:
    """Albedo map plus a per-texel label map (``-1`` for background)."""

    albedo: np.ndarray
    labels: np.ndarray
    reference_label: int = -1


def color_chart(patch=12, gap=3, border=6, gray_card=False, gray_level=0.5):
    """4 x 6 color checker on a black card, optionally above a gray card.

    Labels 0..23 mark the patches; the gray card, when present, is label 24
    and is the white-balance reference.
    """
    rows, cols = 4, 6
    h = 2 * border + rows * patch + (rows - 1) * gap
    w = 2 * border + cols * patch + (cols - 1) * gap
    card_h = (patch + gap) if gray_card else 0
    albedo = np.zeros((h + card_h, w, 3))
    labels = np.full((h + card_h, w), -1, dtype=np.int64)
    for i in range(rows * cols):
        r, c = divmod(i, cols)
        y = border + r * (patch + gap)
        x = border + c * (patch + gap)
        albedo[y : y + patch, x : x + patch] = COLOR_CHECKER[i]
        labels[y : y + patch, x : x + patch] = i
    ref = -1
    if gray_card:
        y0 = h - border + gap
        albedo[y0 : y0 + patch, border : w - border] = gray_level
        labels[y0 : y0 + patch, border : w - border] = 24
        ref = 24
    return Texture(albedo, labels, ref)


def color_wheel(size=96, rings=1):
    """Disk of six impure-ink sectors on white paper; labels are sector ids."""
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    c = size / 2
    r = np.hypot(xx - c, yy - c)
    ang = (np.degrees(np.arctan2(yy - c, xx - c)) + 360.0) % 360.0
    sector = (ang // 60).astype(np.int64)
    disk = r < 0.45 * size
    albedo = np.full((size, size, 3), 0.9)
    labels = np.full((size, size), -1, dtype=np.int64)
    albedo[disk] = WHEEL_INKS[sector[disk]]
    labels[disk] = sector[disk]
    return Texture(albedo, labels)


def gray_card(size=32, level=0.5):
    return Texture(np.full((size, size, 3), level), np.zeros((size, size), dtype=np.int64), 0)


def load_texture(name):
    if name == "chart":
        return color_chart()
    if name == "chart_gray":
        return color_chart(gray_card=True)
    if name == "wheel":
        return color_wheel()
    if name == "gray":
        return gray_card()
    from .io import read_ppm

    img = read_ppm(Path(name))
    return Texture(img.astype(np.float64) / 255.0, np.zeros(img.shape[:2], dtype=np.int64))


def _center(value, size):
    return size / 2.0 if value < 0 else value


def camera_model(cfg):
    c = cfg.camera
    return PinholeModel(c.fx, c.fy, _center(c.cx, c.width), _center(c.cy, c.height), c.width, c.height)


def projector_model(cfg):
    p = cfg.projector
    return PinholeModel(
        p.fx, p.fy, _center(p.cx, p.width), _center(p.cy, p.height), p.width, p.height,
        translation=(p.baseline_m, 0.0, 0.0),
    )


def sensor_config(cfg):
    c = cfg.camera
    return SensorConfig(
        contrast_threshold=c.contrast_threshold,
        refractory_us=c.refractory_us,
        log_eps=c.log_eps,
        noise_rate=c.noise_rate,
        bus_cap=c.bus_cap_events_per_s,
        bucket_us=c.bucket_us,
        seed=c.seed,
    )


@dataclass
class Rig:
    """Everything needed to render and sense one static scene."""

    camera: PinholeModel
    projector: PinholeModel
    scene: ScenePlane
    texture: Texture
    renderer: Renderer
    s_pow: SpectralPower
    ambient: float
    exposure: float
    sensor: SensorConfig

    @property
    def proj_dims(self):
        return (self.projector.width, self.projector.height)

    def labels(self):
        """Texture label seen by every camera pixel, ``-1`` off the texture."""
        return self.renderer.sample_texture(self.texture.labels, fill=-1)

    def reference_mask(self):
        if self.texture.reference_label < 0:
            return None
        return self.labels() == self.texture.reference_label


def build_rig(cfg):
    tex = load_texture(cfg.scene.texture)
    scene = ScenePlane.facing_camera(cfg.scene.distance_m, tex.albedo, cfg.scene.width_m, cfg.scene.tilt_deg)
    camera = camera_model(cfg)
    projector = projector_model(cfg)
    p = cfg.projector
    return Rig(
        camera,
        projector,
        scene,
        tex,
        Renderer(scene, projector, camera, falloff=cfg.scene.falloff),
        SpectralPower(p.s_pow_r, p.s_pow_g, p.s_pow_b),
        cfg.scene.ambient,
        p.exposure,
        sensor_config(cfg),
    )


def parse_ints(text):
    return tuple(int(v) for v in text.replace(" ", "").split(",") if v)


def parse_floats(text):
    return tuple(float(v) for v in text.replace(" ", "").split(",") if v)


def build_patterns(cfg, proj_dims):
    """Patterns named by the ``pattern`` section; moving lines expand to every step."""
    pc = cfg.pattern
    fam = pc.family
    if pc.cp > 0 and fam in ("dots", "lines", "solid"):
        return [pattern_for_cp(pc.cp, fam, proj_dims, line_width=pc.width)]
    if fam == "solid":
        return [gen_solid(parse_ints(pc.roi) or None, proj_dims)]
    if fam == "dots":
        return [gen_dot_grid(pc.rows, pc.cols, pc.dot_size, proj_dims)]
    if fam == "lines":
        return [gen_multi_line(pc.count, pc.width, pc.orientation, proj_dims)]
    if fam == "moving_line":
        return MovingLineSweep(pc.steps, pc.width, pc.orientation, proj_dims)
    if fam == "black":
        return [gen_black(proj_dims)]
    raise ValueError(f"unknown pattern family {fam!r}")
