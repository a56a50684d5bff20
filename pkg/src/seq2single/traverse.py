"""In-memory data model: frame records and ordered traverses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Pose:
    x: float  # world meters
    y: float  # world meters
    heading: float  # radians, direction of travel
    s: float  # meters traveled from the traverse start

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass
class FrameRecord:
    """One place observation: per-channel keypoints, depths, descriptors."""

    frame_id: int
    keypoints: np.ndarray  # (C, 2) int32, columns (x, y)
    keypoint_depths: np.ndarray  # (C,) float64 meters, NaN = invalid
    descriptors: np.ndarray  # (C, D) float32
    global_descriptor: np.ndarray  # (D,) float32
    pose: Pose

    def __post_init__(self):
        self.keypoints = np.asarray(self.keypoints, dtype=np.int32)
        self.keypoint_depths = np.asarray(self.keypoint_depths, dtype=np.float64)
        self.descriptors = np.asarray(self.descriptors, dtype=np.float32)
        self.global_descriptor = np.asarray(self.global_descriptor, dtype=np.float32).ravel()
        c = self.descriptors.shape[0] if self.descriptors.ndim == 2 else -1
        if self.descriptors.ndim != 2:
            raise ValueError(f"descriptors must be (C, D), got shape {self.descriptors.shape}")
        if self.keypoints.shape != (c, 2):
            raise ValueError(f"expected {c} keypoints as (C, 2), got shape {self.keypoints.shape}")
        if self.keypoint_depths.shape != (c,):
            raise ValueError(f"expected {c} keypoint depths, got shape {self.keypoint_depths.shape}")

    @property
    def channels(self) -> int:
        return self.descriptors.shape[0]

    @property
    def descriptor_dim(self) -> int:
        return self.descriptors.shape[1]


@dataclass(frozen=True)
class TraverseMeta:
    name: str
    direction: str
    condition: str
    spacing_m: float
    channels: int
    descriptor_dim: int


@dataclass
class Traverse:
    """Ordered frame records plus traverse-level metadata."""

    meta: TraverseMeta
    frames: list[FrameRecord] = field(default_factory=list)

    def __post_init__(self):
        ids = [f.frame_id for f in self.frames]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValueError("frame ids must be strictly increasing")
        for f in self.frames:
            if f.channels != self.meta.channels or f.descriptor_dim != self.meta.descriptor_dim:
                raise ValueError(
                    f"frame {f.frame_id} has {f.channels}x{f.descriptor_dim} descriptors, "
                    f"metadata says {self.meta.channels}x{self.meta.descriptor_dim}"
                )

    def __len__(self) -> int:
        return len(self.frames)

    def positions(self) -> np.ndarray:
        return np.array([[f.pose.x, f.pose.y] for f in self.frames], dtype=np.float64)

    def headings(self) -> np.ndarray:
        return np.array([f.pose.heading for f in self.frames], dtype=np.float64)

    def global_descriptors(self) -> np.ndarray:
        return np.stack([f.global_descriptor for f in self.frames])

    def descriptor_stack(self) -> np.ndarray:
        return np.stack([f.descriptors for f in self.frames])

    def depth_stack(self) -> np.ndarray:
        return np.stack([f.keypoint_depths for f in self.frames])


def frames_equal(a: FrameRecord, b: FrameRecord) -> bool:
    """Exact structural equality; NaN depth sentinels compare equal."""
    return (
        a.frame_id == b.frame_id
        and np.array_equal(a.keypoints, b.keypoints)
        and np.array_equal(a.keypoint_depths, b.keypoint_depths, equal_nan=True)
        and np.array_equal(a.descriptors, b.descriptors)
        and np.array_equal(a.global_descriptor, b.global_descriptor)
        and a.pose == b.pose
    )


def traverses_equal(a: Traverse, b: Traverse) -> bool:
    return (
        a.meta == b.meta
        and len(a) == len(b)
        and all(frames_equal(fa, fb) for fa, fb in zip(a.frames, b.frames))
    )
