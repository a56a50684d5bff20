"""Shared builders for randomized test traverses."""

from __future__ import annotations

import numpy as np

from seq2single.traverse import FrameRecord, Pose, Traverse, TraverseMeta


def make_random_frame(rng, frame_id, channels, dim, pose=None, invalid_depth_fraction=0.2):
    depths = rng.uniform(1.0, 40.0, channels)
    invalid = rng.random(channels) < invalid_depth_fraction
    depths[invalid] = np.nan
    return FrameRecord(
        frame_id=frame_id,
        keypoints=rng.integers(0, 16, size=(channels, 2)),
        keypoint_depths=depths,
        descriptors=rng.standard_normal((channels, dim)).astype(np.float32),
        global_descriptor=rng.standard_normal(dim).astype(np.float32),
        pose=pose if pose is not None else Pose(float(frame_id) * 2.0, 0.0, 0.0, float(frame_id) * 2.0),
    )


def make_random_traverse(
    seed,
    n_frames=8,
    channels=4,
    dim=6,
    spacing=2.0,
    name="test",
    direction="forward",
    condition="base",
    invalid_depth_fraction=0.2,
):
    rng = np.random.default_rng(seed)
    frames = []
    for i in range(n_frames):
        pose = Pose(i * spacing, float(rng.normal(0.0, 0.1)), 0.0, i * spacing)
        frames.append(make_random_frame(rng, i, channels, dim, pose, invalid_depth_fraction))
    meta = TraverseMeta(name, direction, condition, spacing, channels, dim)
    return Traverse(meta=meta, frames=frames)
