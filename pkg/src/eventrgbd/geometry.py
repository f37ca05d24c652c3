"""Pinhole camera/projector models, textured planes and ray primitives.

Conventions
-----------
* World frame is the camera frame: the camera sits at the origin looking
  down +z, x to the right and y down in the image.
* A model's ``rotation``/``translation`` map model coordinates to world
  coordinates: ``X_world = R @ X_model + t``. ``t`` is the optical center.
* Integer pixel coordinates address pixel centers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BehindCameraError,
    BehindRayError,
    DegenerateTriangulationError,
    NoIntersectionError,
)

PARALLEL_TOL = 1e-12
TRIANGULATION_TOL = 1e-9


def _as_vec3(v, name):
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    return arr


def rotation_y(angle_rad):
    """Rotation matrix about the y axis."""
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@dataclass(frozen=True)
class PinholeModel:
    """Distortion-free pinhole model shared by the camera and the projector."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("resolution must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        rot = np.asarray(self.rotation, dtype=np.float64)
        if rot.shape != (3, 3) or not np.allclose(rot.T @ rot, np.eye(3), atol=1e-9, rtol=0):
            raise ValueError("rotation must be a 3x3 orthonormal matrix")
        rot = rot.copy()
        rot.flags.writeable = False
        trans = _as_vec3(self.translation, "translation").copy()
        trans.flags.writeable = False
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @property
    def center(self):
        return self.translation

    @property
    def shape(self):
        """Raster shape as ``(height, width)``."""
        return (self.height, self.width)

    @property
    def K(self):
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def to_model(self, points):
        """World points ``(..., 3)`` expressed in the model frame."""
        return (np.asarray(points, dtype=np.float64) - self.translation) @ self.rotation

    def to_world(self, points):
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def project_many(self, points):
        """Project ``(N, 3)`` world points without raising.

        Returns
        -------
        pixels : ndarray, shape (N, 2)
        depth : ndarray, shape (N,)
            Depth along the optical axis; callers must mask ``depth <= 0``.
        """
        pc = self.to_model(points)
        z = pc[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * pc[..., 0] / z + self.cx
            v = self.fy * pc[..., 1] / z + self.cy
        return np.stack([u, v], axis=-1), z

    def ray_directions(self, pixels):
        """Unit world-frame directions through ``(N, 2)`` pixels."""
        px = np.asarray(pixels, dtype=np.float64)
        d = np.stack(
            [(px[..., 0] - self.cx) / self.fx, (px[..., 1] - self.cy) / self.fy, np.ones(px.shape[:-1])],
            axis=-1,
        )
        d = d @ self.rotation.T
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def pixel_grid(self):
        """Pixel-center coordinates ``(H*W, 2)`` in row-major order."""
        ys, xs = np.mgrid[0 : self.height, 0 : self.width]
        return np.stack([xs.ravel(), ys.ravel()], axis=-1).astype(np.float64)


@dataclass(frozen=True)
class Ray:
    """Half-line ``origin + t * direction`` for ``t >= 0``.

    ``direction`` is normalized on construction.
    """

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = _as_vec3(self.origin, "origin")
        d = _as_vec3(self.direction, "direction")
        n = np.linalg.norm(d)
        if n == 0 or not np.isfinite(n):
            raise ValueError("ray direction must be a finite nonzero vector")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d / n)

    def at(self, t):
        return self.origin + t * self.direction


@dataclass(frozen=True)
class ScenePlane:
    """Textured plane ``{x : normal . x = offset}``.

    The albedo texture is an ``(rows, cols, 3)`` array of per-channel
    reflectances in [0, 1]. Texel ``(col, row)`` covers the plane patch
    starting at ``origin + col*texel_size*u_axis + row*texel_size*v_axis``.
    Points outside the texture take ``background``.
    """

    normal: np.ndarray
    offset: float
    albedo: np.ndarray
    origin: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    texel_size: float
    background: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        n = _as_vec3(self.normal, "normal")
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("plane normal must be a unit vector")
        alb = np.asarray(self.albedo, dtype=np.float64)
        if alb.ndim != 3 or alb.shape[2] != 3:
            raise ValueError("albedo must have shape (rows, cols, 3)")
        if alb.size and (alb.min() < 0 or alb.max() > 1):
            raise ValueError("albedo entries must lie in [0, 1]")
        bg = tuple(float(b) for b in self.background)
        if len(bg) != 3 or min(bg) < 0 or max(bg) > 1:
            raise ValueError("background albedo must be three values in [0, 1]")
        if self.texel_size <= 0:
            raise ValueError("texel_size must be positive")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "albedo", alb)
        object.__setattr__(self, "origin", _as_vec3(self.origin, "origin"))
        object.__setattr__(self, "u_axis", _as_vec3(self.u_axis, "u_axis"))
        object.__setattr__(self, "v_axis", _as_vec3(self.v_axis, "v_axis"))
        object.__setattr__(self, "background", bg)

    @classmethod
    def facing_camera(cls, distance, albedo, width_m, tilt_deg=0.0, background=(0.0, 0.0, 0.0)):
        """Plane through ``(0, 0, distance)`` rotated by ``tilt_deg`` about y.

        The texture is centered on the optical axis and spans ``width_m``
        horizontally. The stored normal faces the camera.
        """
        albedo = np.asarray(albedo, dtype=np.float64)
        rows, cols = albedo.shape[:2]
        rot = rotation_y(np.deg2rad(tilt_deg))
        u_axis = rot @ np.array([1.0, 0.0, 0.0])
        v_axis = np.array([0.0, 1.0, 0.0])
        normal = rot @ np.array([0.0, 0.0, -1.0])
        center = np.array([0.0, 0.0, float(distance)])
        ts = width_m / cols
        origin = center - 0.5 * cols * ts * u_axis - 0.5 * rows * ts * v_axis
        return cls(normal, float(normal @ center), albedo, origin, u_axis, v_axis, ts, background)

    def texel_coords(self, points):
        """Continuous ``(col, row)`` texel coordinates of on-plane points."""
        rel = np.asarray(points, dtype=np.float64) - self.origin
        return np.stack([rel @ self.u_axis, rel @ self.v_axis], axis=-1) / self.texel_size

    def albedo_at(self, points):
        """Nearest-texel albedo ``(N, 3)`` of on-plane points."""
        tc = np.floor(self.texel_coords(points)).astype(np.int64)
        rows, cols = self.albedo.shape[:2]
        inside = (tc[..., 0] >= 0) & (tc[..., 0] < cols) & (tc[..., 1] >= 0) & (tc[..., 1] < rows)
        out = np.empty(tc.shape[:-1] + (3,))
        out[...] = self.background
        out[inside] = self.albedo[tc[inside, 1], tc[inside, 0]]
        return out


def project(point, model):
    """Project a world point to continuous pixel coordinates.

    Raises
    ------
    BehindCameraError
        If the point is at or behind the model's optical center.
    """
    pixels, depth = model.project_many(np.atleast_2d(np.asarray(point, dtype=np.float64)))
    if np.any(depth <= 0) or not np.all(np.isfinite(depth)):
        raise BehindCameraError("point is behind camera")
    return pixels[0] if np.ndim(point) == 1 else pixels


def backproject_ray(pixel, model):
    """Ray from the optical center through a (continuous) pixel."""
    d = model.ray_directions(np.asarray(pixel, dtype=np.float64)[None, :])[0]
    return Ray(model.center, d)


def intersect_ray_plane(ray, plane):
    """Intersect a ray with a plane.

    Returns
    -------
    point : ndarray, shape (3,)
    texel : ndarray, shape (2,)
        Continuous ``(col, row)`` texture coordinate of ``point``.
    """
    denom = float(plane.normal @ ray.direction)
    if abs(denom) <= PARALLEL_TOL:
        raise NoIntersectionError("no intersection: ray is parallel to the plane")
    t = (plane.offset - float(plane.normal @ ray.origin)) / denom
    if t < 0:
        raise BehindRayError("intersection lies behind the ray origin")
    point = ray.at(t)
    return point, plane.texel_coords(point)


def intersect_rays_plane(origins, directions, normal, offset):
    """Vectorized ray/plane intersection without raising.

    Returns the points and the ray parameters ``t``; rays parallel to the
    plane get ``t = nan``.
    """
    directions = np.asarray(directions, dtype=np.float64)
    origins = np.broadcast_to(np.asarray(origins, dtype=np.float64), directions.shape)
    denom = directions @ normal
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (offset - origins @ normal) / denom
    t = np.where(np.abs(denom) > PARALLEL_TOL, t, np.nan)
    return origins + t[..., None] * directions, t


def triangulate_rays(ray_a, ray_b):
    """Midpoint of the shortest segment between two rays.

    Returns
    -------
    midpoint : ndarray, shape (3,)
    gap : float
        Length of the shortest segment, in meters.
    """
    if np.linalg.norm(np.cross(ray_a.direction, ray_b.direction)) <= TRIANGULATION_TOL:
        raise DegenerateTriangulationError("degenerate triangulation: rays are parallel")
    mid, gap = triangulate_many(
        ray_a.origin[None], ray_a.direction[None], ray_b.origin[None], ray_b.direction[None]
    )
    return mid[0], float(gap[0])


def triangulate_many(oa, da, ob, db):
    """Vectorized two-ray midpoint triangulation for unit directions.

    Parallel pairs yield ``nan``.
    """
    da = np.asarray(da, dtype=np.float64)
    db = np.asarray(db, dtype=np.float64)
    oa = np.broadcast_to(np.asarray(oa, dtype=np.float64), da.shape)
    ob = np.broadcast_to(np.asarray(ob, dtype=np.float64), db.shape)
    w0 = oa - ob
    b = np.einsum("ij,ij->i", da, db)
    d = np.einsum("ij,ij->i", da, w0)
    e = np.einsum("ij,ij->i", db, w0)
    denom = 1.0 - b * b
    ok = np.linalg.norm(np.cross(da, db), axis=1) > TRIANGULATION_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        sa = np.where(ok, (b * e - d) / denom, np.nan)
        sb = np.where(ok, (e - b * d) / denom, np.nan)
    pa = oa + sa[:, None] * da
    pb = ob + sb[:, None] * db
    return 0.5 * (pa + pb), np.linalg.norm(pa - pb, axis=1)
