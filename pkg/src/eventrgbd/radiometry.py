"""Lambertian shading of a projected pattern on a textured plane."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BehindCameraError
from .geometry import intersect_rays_plane
from .patterns import CHANNELS

DEFAULT_AMBIENT = 0.01


@dataclass(frozen=True)
class SpectralPower:
    """Relative projector power per LED channel."""

    r: float = 1.0
    g: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if min(self.r, self.g, self.b) < 0:
            raise ValueError("spectral power must be nonnegative")

    def __getitem__(self, channel):
        return (self.r, self.g, self.b)[_channel_index(channel)]

    def as_array(self):
        return np.array([self.r, self.g, self.b])

    def scaled(self, gains):
        return SpectralPower(*(self.as_array() * np.asarray(gains, dtype=np.float64)))


def _channel_index(channel):
    if isinstance(channel, str):
        return CHANNELS.index(channel)
    return int(channel)


@dataclass(frozen=True)
class IrradianceFrame:
    """Irradiance seen by the camera during one projector slot.

    The pattern is lit from ``start_us`` to ``lit_until_us`` and the scene
    falls back to ``ambient`` until ``end_us``. ``lit_until_us = None``
    means the frame holds for the whole slot.
    """

    values: np.ndarray
    channel: str = "R"
    pattern_id: int = 0
    start_us: int = 0
    end_us: int = 0
    ambient: float = DEFAULT_AMBIENT
    lit_until_us: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("irradiance frame must be 2-D")
        if v.size and v.min() < 0:
            raise ValueError("irradiance must be nonnegative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if self.lit_until_us is not None and not self.start_us <= self.lit_until_us <= self.end_us:
            raise ValueError("lit_until_us must lie inside the slot")

    @property
    def shape(self):
        return self.values.shape


def shade_lambertian(s_ref, s_pow, normal, beam):
    """Lambertian irradiance ``s_ref * s_pow * max(0, normal . beam)``.

    ``normal`` and ``beam`` may be single 3-vectors or ``(..., 3)`` stacks;
    ``beam`` points from the surface toward the projector.
    """
    cos = np.einsum("...i,...i->...", np.asarray(normal, dtype=np.float64), np.asarray(beam, dtype=np.float64))
    out = np.asarray(s_ref) * np.asarray(s_pow) * np.maximum(0.0, cos)
    return float(out) if np.ndim(out) == 0 else out


class Renderer:
    """Per-pixel geometry of a static camera/projector/plane rig.

    Building the renderer does the ray casting once; :meth:`render` then
    only looks up pattern bits, so many slots of the same rig are cheap.

    Parameters
    ----------
    scene : ScenePlane
    projector, camera : PinholeModel
    falloff : bool
        Apply inverse-square attenuation with the projector distance,
        normalized to 1 m. Off by default.
    """

    def __init__(self, scene, projector, camera, falloff=False):
        self.scene = scene
        self.projector = projector
        self.camera = camera
        self.falloff = falloff
        pix = camera.pixel_grid()
        dirs = camera.ray_directions(pix)
        pts, t = intersect_rays_plane(camera.center, dirs, scene.normal, scene.offset)
        valid = np.isfinite(t) & (t > 0)
        ppx, pdepth = projector.project_many(np.where(valid[:, None], pts, 0.0))
        valid &= pdepth > 0
        if not valid.any():
            raise BehindCameraError("scene plane is behind the camera or the projector")
        col = np.floor(ppx[:, 0] + 0.5)
        row = np.floor(ppx[:, 1] + 0.5)
        inside = valid & (col >= 0) & (col < projector.width) & (row >= 0) & (row < projector.height)
        self.proj_index = np.where(inside, row * projector.width + col, -1).astype(np.int64)
        self._inside = np.flatnonzero(inside)
        self._inside_proj = self.proj_index[self._inside]
        self.points = pts
        self.valid = valid

        # orient the normal toward the camera side of the plane
        side = scene.normal @ camera.center - scene.offset
        normal = scene.normal if side >= 0 else -scene.normal
        to_proj = projector.center - pts
        dist = np.linalg.norm(to_proj, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            beam = to_proj / dist[:, None]
        cos = np.where(valid, np.maximum(0.0, beam @ normal), 0.0)
        if falloff:
            cos = np.where(valid, cos / dist**2, 0.0)
        albedo = np.where(valid[:, None], scene.albedo_at(np.where(valid[:, None], pts, 0.0)), 0.0)
        self.albedo = albedo
        tc = np.floor(scene.texel_coords(np.where(valid[:, None], pts, 0.0))).astype(np.int64)
        rows, cols = scene.albedo.shape[:2]
        on_tex = valid & (tc[:, 0] >= 0) & (tc[:, 0] < cols) & (tc[:, 1] >= 0) & (tc[:, 1] < rows)
        self.texel = np.where(on_tex[:, None], tc, -1)
        self.cos = cos
        self.response = albedo * cos[:, None]
        self._response_c = [np.ascontiguousarray(self.response[:, c]) for c in range(3)]

    @property
    def shape(self):
        return self.camera.shape

    def lit_mask(self, pattern):
        """Camera pixels whose scene point receives a lit projector pixel."""
        lit = np.zeros(self.proj_index.shape, dtype=bool)
        lit[self._inside] = pattern.bitmap.ravel()[self._inside_proj]
        return lit.reshape(self.shape)

    def sample_texture(self, values, fill=0):
        """Per-pixel lookup of a texture-shaped array (nearest texel)."""
        values = np.asarray(values)
        on = self.texel[:, 0] >= 0
        out = np.full(self.texel.shape[:1] + values.shape[2:], fill, dtype=values.dtype)
        out[on] = values[self.texel[on, 1], self.texel[on, 0]]
        return out.reshape(self.shape + values.shape[2:])

    def albedo_image(self):
        """Ground-truth albedo as an 8-bit RGB image of the camera view."""
        img = np.clip(np.floor(self.albedo * 255 + 0.5), 0, 255).astype(np.uint8)
        return img.reshape(self.shape + (3,))

    def render(self, pattern, channel, s_pow, ambient=DEFAULT_AMBIENT, slot=None, exposure=None):
        """Irradiance frame for ``pattern`` shown in ``channel``.

        ``slot`` supplies timing and pattern id; ``exposure`` is the lit
        fraction of the slot (``None``: lit for the whole slot).
        """
        if ambient < 0:
            raise ValueError("ambient must be nonnegative")
        c = _channel_index(channel)
        power = s_pow[c] if isinstance(s_pow, SpectralPower) else float(np.asarray(s_pow).reshape(-1)[c])
        lit = self.lit_mask(pattern).ravel()
        values = np.full(lit.shape, float(ambient))
        idx = np.flatnonzero(lit)
        values[idx] += power * self._response_c[c][idx]
        kw = {}
        if slot is not None:
            kw = {"start_us": slot.start_us, "end_us": slot.end_us, "pattern_id": slot.pattern_id}
            if exposure is not None:
                kw["lit_until_us"] = slot.start_us + int(round(exposure * slot.duration_us))
        return IrradianceFrame(values.reshape(self.shape), CHANNELS[c], ambient=float(ambient), **kw)

    def render_plan(self, plan, s_pow, ambient=DEFAULT_AMBIENT, exposure=0.5):
        """Irradiance frames for every slot of a :class:`SequencePlan` (rendered lazily)."""
        return PlanFrames(self, plan, s_pow, ambient, exposure)


class PlanFrames(Sequence):
    """Lazy sequence of the irradiance frames of a plan.

    Frames are rendered on access; the last few (pattern, channel) rasters
    are cached, so repeated patterns share one array.
    """

    def __init__(self, renderer, plan, s_pow, ambient=DEFAULT_AMBIENT, exposure=0.5, cache_size=16):
        self.renderer = renderer
        self.plan = plan
        self.s_pow = s_pow
        self.ambient = float(ambient)
        self.exposure = exposure
        self._values = lru_cache(maxsize=cache_size)(self._render)

    def _render(self, pattern_id, channel):
        return self.renderer.render(self.plan.patterns[pattern_id], channel, self.s_pow, self.ambient).values

    def __len__(self):
        return len(self.plan.slots)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        slot = self.plan.slots[i]
        lit_until = None
        if self.exposure is not None:
            lit_until = slot.start_us + int(round(self.exposure * slot.duration_us))
        values = self._values(slot.pattern_id, slot.channel)
        return IrradianceFrame(values, slot.channel, slot.pattern_id, slot.start_us, slot.end_us, self.ambient, lit_until)


def render_slot(scene, projector, camera, pattern, channel, s_pow, ambient=DEFAULT_AMBIENT, slot=None, falloff=False):
    """Render a single slot; see :class:`Renderer` for repeated use."""
    return Renderer(scene, projector, camera, falloff=falloff).render(pattern, channel, s_pow, ambient, slot=slot)
