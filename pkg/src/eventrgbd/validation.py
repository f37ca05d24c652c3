"""Input checks shared by the estimators and metric functions."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError


def check_frame(frame, name="frame"):
    """Return ``frame`` as an ``(H, W, 3)`` uint8 array.

    Float or wider integer input is accepted when it already holds
    integral values in [0, 255].
    """
    arr = np.asarray(frame)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.dtype == np.uint8:
        return arr
    if arr.size and (arr.min() < 0 or arr.max() > 255 or not np.all(np.mod(arr, 1) == 0)):
        raise ValueError(f"{name} must hold integer values in [0, 255]")
    return arr.astype(np.uint8)


def check_same_shape(a, b):
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape} vs {b.shape}")


def check_counts(counts):
    """Return per-channel counts as a float-compatible ``(3, H, W)`` array."""
    arr = np.asarray(getattr(counts, "counts", counts))
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValueError(f"channel counts must have shape (3, H, W), got {arr.shape}")
    if arr.size and arr.min() < 0:
        raise ValueError("channel counts must be nonnegative")
    return arr


def region_mask(region, shape):
    """Boolean mask from a mask array or an ``(x, y, width, height)`` rectangle."""
    if region is None:
        return np.ones(shape, dtype=bool)
    arr = np.asarray(region)
    if arr.dtype == bool:
        if arr.shape != tuple(shape):
            raise DimensionMismatchError(f"region mask shape {arr.shape} does not match {tuple(shape)}")
        return arr
    x, y, w, h = (int(v) for v in arr.reshape(-1))
    mask = np.zeros(shape, dtype=bool)
    mask[max(y, 0) : y + h, max(x, 0) : x + w] = True
    return mask
