"""Disparity-to-depth conversion and depth-range keypoint filtering."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensors import Keypoint

INVALID_DEPTH = float("nan")
UNBOUNDED = math.inf


@dataclass(frozen=True)
class CameraIntrinsics:
    focal_length: float  # pixels
    baseline: float  # meters

    def __post_init__(self):
        if not (np.isfinite(self.focal_length) and self.focal_length > 0):
            raise ValueError(f"focal length must be positive, got {self.focal_length}")
        if not (np.isfinite(self.baseline) and self.baseline > 0):
            raise ValueError(f"baseline must be positive, got {self.baseline}")


def disparity_to_depth(disparity: float, intrinsics: CameraIntrinsics) -> float:
    """Metric depth f*b/disparity; non-positive disparity yields the NaN sentinel."""
    if not np.isfinite(disparity):
        raise ValueError(f"disparity must be finite, got {disparity}")
    if disparity <= 0.0:
        return INVALID_DEPTH
    return float(intrinsics.focal_length * intrinsics.baseline / disparity)


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel depths in meters, NaN where no valid depth exists."""

    depths: np.ndarray  # (H, W)

    def __post_init__(self):
        d = np.asarray(self.depths, dtype=np.float64)
        if d.ndim != 2 or d.size == 0:
            raise ValueError(f"expected a non-empty (H, W) array, got shape {np.shape(self.depths)}")
        bad = ~(np.isnan(d) | (np.isfinite(d) & (d > 0.0)))
        if np.any(bad):
            raise ValueError("depth map values must be positive or NaN")
        object.__setattr__(self, "depths", d)

    @property
    def width(self) -> int:
        return self.depths.shape[1]

    @property
    def height(self) -> int:
        return self.depths.shape[0]


def depth_at(depthmap: DepthMap, keypoint: Keypoint, scale: tuple[float, float] = (1.0, 1.0)) -> float:
    """Depth at the pixel nearest to (x*sx, y*sy); half-way values round up."""
    sx, sy = scale
    px = math.floor(keypoint.x * sx + 0.5)
    py = math.floor(keypoint.y * sy + 0.5)
    if not (0 <= px < depthmap.width and 0 <= py < depthmap.height):
        raise IndexError(
            f"keypoint ({keypoint.x}, {keypoint.y}) scales to pixel ({px}, {py}) "
            f"outside {depthmap.width}x{depthmap.height} depth map"
        )
    return float(depthmap.depths[py, px])


def passes_depth_filter(depths, limit: float):
    """Strict range predicate: depth is valid (finite, positive) and < limit.

    Works elementwise on arrays; NaN sentinels never pass.
    """
    d = np.asarray(depths, dtype=np.float64)
    return np.isfinite(d) & (d > 0.0) & (d < limit)


def filter_by_depth(keypoints_with_depth, limit: float) -> list[Keypoint]:
    """Keypoints whose attached depth passes the strict range predicate."""
    return [kp for kp, d in keypoints_with_depth if bool(passes_depth_filter(d, limit))]
