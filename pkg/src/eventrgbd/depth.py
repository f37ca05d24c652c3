"""Camera-projector triangulation from dot and moving-line events."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .color import infer_end, slot_bounds
from .geometry import intersect_rays_plane, triangulate_many
from .validation import check_frame

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class DotObservation:
    x: float
    y: float
    count: int
    slot: int = -1


@dataclass
class DepthSamples:
    """Triangulated points with the camera pixel each one came from."""

    pixels: np.ndarray
    points: np.ndarray
    sources: np.ndarray = None
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64).reshape(-1, 2)
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if self.sources is None:
            self.sources = np.arange(len(self.points))

    def __len__(self):
        return self.points.shape[0]

    @property
    def depth(self):
        return self.points[:, 2]


@dataclass
class PointCloud:
    points: np.ndarray
    colors: np.ndarray
    dropped: int = 0

    def __len__(self):
        return self.points.shape[0]


def cluster_dots(events, shape, window=None, min_count=3, slot=-1):
    """8-connected clusters of ON-event pixels and their count-weighted centroids."""
    ev = events
    if window is not None:
        ev = ev[(ev["t"] >= window[0]) & (ev["t"] < window[1])]
    ev = ev[ev["p"] > 0]
    h, w = shape
    if ev.shape[0] == 0:
        return []
    img = np.bincount(ev["y"].astype(np.int64) * w + ev["x"], minlength=h * w).reshape(h, w)
    labels, n = ndimage.label(img > 0, structure=EIGHT_CONNECTED)
    if n == 0:
        return []
    idx = np.arange(1, n + 1)
    sums = ndimage.sum(img, labels, idx)
    centers = ndimage.center_of_mass(img, labels, idx)
    out = []
    for (cy, cx), total in zip(centers, sums):
        if total >= min_count:
            out.append(DotObservation(float(cx), float(cy), int(total), slot))
    return out


def _plane_parts(plane):
    if hasattr(plane, "normal"):
        return np.asarray(plane.normal, dtype=np.float64), float(plane.offset)
    n, d = plane
    return np.asarray(n, dtype=np.float64), float(d)


def predict_dot_images(centers, camera, projector, prior):
    """Camera pixels where projector dot centers land on the prior plane."""
    n, d = _plane_parts(prior)
    dirs = projector.ray_directions(np.asarray(centers, dtype=np.float64))
    pts, _ = intersect_rays_plane(projector.center, dirs, n, d)
    px, _ = camera.project_many(pts)
    return px


def correspond_and_triangulate(
    observations, pattern, camera, projector, prior, gap_threshold=0.005, tie_tol=0.5, max_distance=None
):
    """Match dot observations to projector dots and triangulate each pair.

    Parameters
    ----------
    observations : sequence of DotObservation
    pattern : Pattern
        Dot-grid pattern holding the projector dot centers.
    camera, projector : PinholeModel
    prior : ScenePlane or (normal, offset)
        Coarse plane used only to predict where each dot should appear.
    gap_threshold : float
        Maximum ray gap in meters for an accepted sample.
    tie_tol : float
        Two observations whose distances to the same nearest dot differ by
        less than this many pixels are both rejected as ambiguous.
    max_distance : float, optional
        Maximum predicted-to-observed distance in pixels.
    """
    stats = {"ambiguous": 0, "gap": 0, "unmatched": 0}
    obs = list(observations)
    if not obs:
        return DepthSamples(np.empty((0, 2)), np.empty((0, 3)), np.empty(0, dtype=np.int64), stats)
    centers = np.asarray(pattern.params["centers"], dtype=np.float64)
    predicted = predict_dot_images(centers, camera, projector, prior)
    xy = np.array([(o.x, o.y) for o in obs])
    dist = np.linalg.norm(xy[:, None, :] - predicted[None, :, :], axis=2)
    dist = np.where(np.isfinite(dist), dist, np.inf)

    nearest = np.argmin(dist, axis=1)
    best = dist[np.arange(len(obs)), nearest]
    rejected = np.zeros(len(obs), dtype=bool)
    for j in np.unique(nearest):
        claim = np.flatnonzero(nearest == j)
        if claim.size < 2:
            continue
        d = np.sort(best[claim])
        tied = claim[best[claim] - d[0] < tie_tol]
        if tied.size >= 2:
            rejected[tied] = True
    stats["ambiguous"] = int(rejected.sum())

    ii, jj = np.nonzero(np.isfinite(dist) & ~rejected[:, None])
    dd = dist[ii, jj]
    if max_distance is not None:
        sel = dd <= max_distance
        ii, jj, dd = ii[sel], jj[sel], dd[sel]
    # ties broken by dot index and observation position, never list order
    order = np.lexsort((xy[ii, 1], xy[ii, 0], jj, dd))
    used_obs = np.zeros(len(obs), dtype=bool)
    used_dot = np.zeros(len(centers), dtype=bool)
    matches = []
    limit = min(int((~rejected).sum()), len(centers))
    for k in order:
        i, j = ii[k], jj[k]
        if used_obs[i] or used_dot[j]:
            continue
        used_obs[i] = used_dot[j] = True
        matches.append((int(j), int(i)))
        if len(matches) == limit:
            break
    matches.sort()
    stats["unmatched"] = int((~rejected).sum()) - len(matches)
    if not matches:
        return DepthSamples(np.empty((0, 2)), np.empty((0, 3)), np.empty(0, dtype=np.int64), stats)
    dots = np.array([m[0] for m in matches])
    oi = np.array([m[1] for m in matches])
    cam_dirs = camera.ray_directions(xy[oi])
    proj_dirs = projector.ray_directions(centers[dots])
    mid, gap = triangulate_many(camera.center, cam_dirs, projector.center, proj_dirs)
    keep = np.isfinite(gap) & (gap <= gap_threshold)
    stats["gap"] = int((~keep).sum())
    return DepthSamples(xy[oi][keep], mid[keep], dots[keep], stats)


def line_plane(projector, position, orientation="vertical"):
    """Plane through the projector center containing one projector column (or row)."""
    if orientation == "vertical":
        ends = np.array([[position, 0.0], [position, projector.height - 1.0]])
    else:
        ends = np.array([[0.0, position], [projector.width - 1.0, position]])
    d = projector.ray_directions(ends)
    n = np.cross(d[0], d[1])
    n /= np.linalg.norm(n)
    return n, float(n @ projector.center)


def depth_from_moving_line(events, triggers, schedule, camera, projector, orientation="vertical", end_us=None):
    """Per-pixel depth from time-coded line sweeps.

    ``schedule`` maps slot index to the projector column (or row) lit in
    that slot. Each ON event is intersected with the light plane of its
    slot; samples are averaged per camera pixel. Events in slots without a
    schedule entry are discarded and counted in ``stats["discarded"]``.
    """
    stats = {"discarded": 0}
    ev = events[events["p"] > 0]
    if ev.shape[0] == 0 or triggers.shape[0] == 0:
        stats["discarded"] = int(ev.shape[0])
        return DepthSamples(np.empty((0, 2)), np.empty((0, 3)), None, stats)
    if end_us is None:
        end_us = infer_end(triggers) if triggers.shape[0] > 1 else int(ev["t"].max()) + 1
    starts, ends = slot_bounds(triggers, end_us)
    slot = np.searchsorted(starts, ev["t"], side="right") - 1
    ok = (slot >= 0) & (ev["t"] < ends[np.clip(slot, 0, None)])
    slot_ids = triggers["slot"][np.clip(slot, 0, None)]
    keys = np.array(sorted(schedule), dtype=np.int64)
    pos = np.array([schedule[int(k)] for k in keys], dtype=np.float64)
    if keys.size:
        at = np.clip(np.searchsorted(keys, slot_ids), 0, keys.size - 1)
        has_entry = ok & (keys[at] == slot_ids)
    else:
        at = np.zeros(slot_ids.shape, dtype=np.int64)
        has_entry = np.zeros_like(ok)
    stats["discarded"] = int((~has_entry).sum())
    ev = ev[has_entry]
    event_pos = pos[at[has_entry]]
    if ev.shape[0] == 0:
        return DepthSamples(np.empty((0, 2)), np.empty((0, 3)), None, stats)

    uniq_pos, pos_inv = np.unique(event_pos, return_inverse=True)
    h, w = camera.shape
    pix = ev["y"].astype(np.int64) * w + ev["x"]
    # every event of one pixel in one slot gives the same sample: intersect once, weight by count
    pair, weight = np.unique(pix * uniq_pos.size + pos_inv, return_counts=True)
    pair_pix, pair_pos = pair // uniq_pos.size, pair % uniq_pos.size
    planes = [line_plane(projector, p, orientation) for p in uniq_pos]
    normals = np.array([n for n, _ in planes])[pair_pos]
    offsets = np.array([d for _, d in planes])[pair_pos]

    uniq, inv = np.unique(pair_pix, return_inverse=True)
    px = np.stack([uniq % w, uniq // w], axis=1).astype(np.float64)
    dirs = camera.ray_directions(px)[inv]
    denom = np.einsum("ij,ij->i", dirs, normals)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (offsets - normals @ camera.center) / denom
    good = np.isfinite(t) & (t > 0)
    stats["discarded"] += int(weight[~good].sum())
    pts = camera.center + t[:, None] * dirs
    wg = weight[good]
    cnt = np.bincount(inv[good], weights=wg, minlength=uniq.size)
    sums = np.stack(
        [np.bincount(inv[good], weights=wg * pts[good, k], minlength=uniq.size) for k in range(3)], axis=1
    )
    have = cnt > 0
    return DepthSamples(px[have], sums[have] / cnt[have, None], uniq[have], stats)


def colorize_cloud(samples, frame):
    """Attach the color of each sample's (rounded) source pixel."""
    img = check_frame(frame)
    h, w = img.shape[:2]
    if len(samples) == 0:
        return PointCloud(np.empty((0, 3)), np.empty((0, 3), dtype=np.uint8), 0)
    col = np.floor(samples.pixels[:, 0] + 0.5).astype(np.int64)
    row = np.floor(samples.pixels[:, 1] + 0.5).astype(np.int64)
    pts = samples.points
    keep = (col >= 0) & (col < w) & (row >= 0) & (row < h) & np.all(np.isfinite(pts), axis=1) & (pts[:, 2] > 0)
    return PointCloud(pts[keep], img[row[keep], col[keep]], int((~keep).sum()))
