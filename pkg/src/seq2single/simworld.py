"""Deterministic synthetic opposing-viewpoint worlds.

A world is a gently curving planar path of known arc length with landmarks
scattered alongside it. Each landmark owns one descriptor channel and a base
descriptor. Rendering a traverse places a pinhole camera every frame_spacing
meters, either forward (frame 0 at arc 0, heading along travel) or reverse
(driven end-to-start, heading flipped). Per channel, the nearest visible
landmark of that channel becomes the frame's keypoint: its grid projection,
its range along the optical axis as the depth, and its condition-rendered
descriptor. Channels that see nothing get a zero descriptor and a NaN depth.

Appearance change at severity sigma blends ALIASED landmarks toward a single
world-wide pool vector with weight min(1, sigma * distance / max_visible_range)
and adds per-component noise of std 0.1 * sigma to every landmark, so distant
aliased landmarks become mutually indistinguishable while close ones stay
discriminative. Severity 0 renders are exactly noise-free and identical under
any condition seed.

All randomness derives from numpy SeedSequence entropy tuples
(condition_seed..., frame, channel, stream), so any single draw can be
reproduced in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .traverse import FrameRecord, Pose, Traverse, TraverseMeta

GRID_WIDTH = 32  # virtual tensor grid for keypoint projections
GRID_HEIGHT = 32
_PATH_STEP = 0.25  # polyline sampling, meters
_CAMERA_HEIGHT = 1.5  # meters
_LANDMARK_HEIGHT = (0.5, 3.0)  # meters
_GLOBAL_NOISE_SCALE = 0.05  # of severity, per component of the global descriptor

_APPEARANCE_STREAM = 0
_DEPTH_STREAM = 1
_GLOBAL_STREAM = 2


def _entropy(seed) -> tuple[int, ...]:
    if isinstance(seed, (tuple, list)):
        return tuple(int(v) for v in seed)
    return (int(seed),)


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(key))


@dataclass(frozen=True)
class WorldConfig:
    path_length: float  # meters
    landmark_count: int
    lateral_spread: float  # meters, landmarks offset up to this far from the path
    channel_count: int
    descriptor_dim: int  # must equal channel_count
    fov_half_angle: float  # radians, horizontal; must stay below pi/2
    max_visible_range: float  # meters
    frame_spacing: float = 2.0  # meters
    appearance_severity: float = 0.0
    aliasing_fraction: float = 0.0
    depth_noise_std: float = 0.0  # relative
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.path_length) and self.path_length > 0):
            raise ValueError(f"path_length must be positive, got {self.path_length}")
        if self.landmark_count < 1:
            raise ValueError(f"landmark_count must be >= 1, got {self.landmark_count}")
        if not (np.isfinite(self.lateral_spread) and self.lateral_spread >= 0):
            raise ValueError(f"lateral_spread must be >= 0, got {self.lateral_spread}")
        if self.channel_count < 1:
            raise ValueError(f"channel_count must be >= 1, got {self.channel_count}")
        if self.descriptor_dim != self.channel_count:
            raise ValueError(
                f"descriptor_dim must equal channel_count, got {self.descriptor_dim} != {self.channel_count}"
            )
        if not (0 < self.fov_half_angle < math.pi / 2):
            raise ValueError(f"fov_half_angle must be in (0, pi/2), got {self.fov_half_angle}")
        if not (np.isfinite(self.max_visible_range) and self.max_visible_range > 0):
            raise ValueError(f"max_visible_range must be positive, got {self.max_visible_range}")
        if not (np.isfinite(self.frame_spacing) and self.frame_spacing > 0):
            raise ValueError(f"frame_spacing must be positive, got {self.frame_spacing}")
        if not (np.isfinite(self.appearance_severity) and self.appearance_severity >= 0):
            raise ValueError(f"appearance_severity must be >= 0, got {self.appearance_severity}")
        if not 0.0 <= self.aliasing_fraction <= 1.0:
            raise ValueError(f"aliasing_fraction must be in [0, 1], got {self.aliasing_fraction}")
        if not (np.isfinite(self.depth_noise_std) and self.depth_noise_std >= 0):
            raise ValueError(f"depth_noise_std must be >= 0, got {self.depth_noise_std}")
        if int(self.seed) < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed}")


@dataclass(frozen=True)
class Landmark:
    position: np.ndarray  # (3,) meters
    base_descriptor: np.ndarray  # (D,)
    channel_id: int
    aliased: bool


@dataclass
class World:
    config: WorldConfig
    path_points: np.ndarray  # (n, 2)
    path_cum: np.ndarray  # (n,) arc length at each point, ends exactly at path_length
    segment_headings: np.ndarray  # (n-1,)
    landmark_arcs: np.ndarray  # (L,) longitudinal arc positions
    landmark_positions: np.ndarray  # (L, 3)
    landmark_channels: np.ndarray  # (L,) int32
    landmark_aliased: np.ndarray  # (L,) bool
    base_descriptors: np.ndarray  # (L, D)
    pool_vector: np.ndarray  # (D,)

    @property
    def landmark_count(self) -> int:
        return self.landmark_positions.shape[0]

    def landmark(self, i: int) -> Landmark:
        return Landmark(
            position=self.landmark_positions[i].copy(),
            base_descriptor=self.base_descriptors[i].copy(),
            channel_id=int(self.landmark_channels[i]),
            aliased=bool(self.landmark_aliased[i]),
        )

    def point_at(self, s) -> np.ndarray:
        x = np.interp(s, self.path_cum, self.path_points[:, 0])
        y = np.interp(s, self.path_cum, self.path_points[:, 1])
        return np.stack(np.broadcast_arrays(x, y), axis=-1)

    def heading_at(self, s):
        idx = np.clip(np.searchsorted(self.path_cum, s, side="right") - 1, 0, len(self.segment_headings) - 1)
        return self.segment_headings[idx]


def generate_world(config: WorldConfig) -> World:
    """Seeded world construction; identical configs give bitwise-identical worlds."""
    path_rng, lm_rng, desc_rng = (np.random.default_rng(c) for c in np.random.SeedSequence(config.seed).spawn(3))

    # Path: gentle seeded heading drift, sampled every _PATH_STEP meters.
    total = config.path_length
    amp = path_rng.uniform(0.0, 0.12, size=2)
    wavelength = path_rng.uniform(0.6 * total, 1.8 * total, size=2)
    phase = path_rng.uniform(0.0, 2 * math.pi, size=2)
    n_full = int(math.floor(total / _PATH_STEP + 1e-9))
    step_ends = np.arange(1, n_full + 1) * _PATH_STEP
    if step_ends.size == 0 or step_ends[-1] < total - 1e-12:
        step_ends = np.concatenate([step_ends, [total]])
    cum = np.concatenate([[0.0], step_ends])
    seg_start = cum[:-1]
    headings = (
        amp[0] * np.sin(2 * math.pi * seg_start / wavelength[0] + phase[0])
        + amp[1] * np.sin(2 * math.pi * seg_start / wavelength[1] + phase[1])
    )
    seg_len = np.diff(cum)
    deltas = seg_len[:, None] * np.stack([np.cos(headings), np.sin(headings)], axis=1)
    points = np.vstack([[0.0, 0.0], np.cumsum(deltas, axis=0)])

    arcs = lm_rng.uniform(0.0, total, size=config.landmark_count)
    lateral = lm_rng.uniform(-config.lateral_spread, config.lateral_spread, size=config.landmark_count)
    height = lm_rng.uniform(*_LANDMARK_HEIGHT, size=config.landmark_count)
    channels = lm_rng.integers(0, config.channel_count, size=config.landmark_count).astype(np.int32)
    aliased = np.zeros(config.landmark_count, dtype=bool)
    n_aliased = int(round(config.aliasing_fraction * config.landmark_count))
    aliased[lm_rng.permutation(config.landmark_count)[:n_aliased]] = True

    seg_idx = np.clip(np.searchsorted(cum, arcs, side="right") - 1, 0, len(headings) - 1)
    h = headings[seg_idx]
    base_xy = np.stack(
        [np.interp(arcs, cum, points[:, 0]), np.interp(arcs, cum, points[:, 1])], axis=1
    )
    normal = np.stack([-np.sin(h), np.cos(h)], axis=1)
    positions = np.concatenate([base_xy + lateral[:, None] * normal, height[:, None]], axis=1)

    base_descriptors = desc_rng.standard_normal((config.landmark_count, config.descriptor_dim))
    pool_vector = desc_rng.standard_normal(config.descriptor_dim)

    return World(
        config=config,
        path_points=points,
        path_cum=cum,
        segment_headings=headings,
        landmark_arcs=arcs,
        landmark_positions=positions,
        landmark_channels=channels,
        landmark_aliased=aliased,
        base_descriptors=base_descriptors,
        pool_vector=pool_vector,
    )


def _visibility(world: World, cam_xy: np.ndarray, heading: float):
    """Mask plus per-landmark (axial depth, rightward offset, horizontal range)."""
    cfg = world.config
    rel = world.landmark_positions[:, :2] - cam_xy
    cos_h, sin_h = math.cos(heading), math.sin(heading)
    axial = rel[:, 0] * cos_h + rel[:, 1] * sin_h
    right = rel[:, 0] * sin_h - rel[:, 1] * cos_h
    horiz = np.hypot(rel[:, 0], rel[:, 1])
    with np.errstate(invalid="ignore"):
        mask = (axial > 0.0) & (horiz <= cfg.max_visible_range) & (
            np.abs(np.arctan2(right, axial)) <= cfg.fov_half_angle
        )
    return mask, axial, right, horiz


def visible_landmarks(world: World, x: float, y: float, heading: float) -> np.ndarray:
    """Indices of landmarks visible from a camera pose, ascending."""
    mask, _, _, _ = _visibility(world, np.array([x, y]), heading)
    return np.flatnonzero(mask)


def apply_condition(
    descriptor,
    severity: float,
    aliased: bool,
    distance: float,
    *,
    pool,
    max_range: float,
    seed=None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Render a base descriptor under an appearance condition.

    Aliased landmarks blend toward the pool vector with weight
    min(1, severity * distance / max_range); everything gets additive noise of
    std 0.1 * severity per component. Severity 0 is the exact identity.
    """
    desc = np.asarray(descriptor, dtype=np.float64)
    if severity < 0 or not np.isfinite(severity):
        raise ValueError(f"severity must be >= 0, got {severity}")
    if severity == 0.0:
        return desc.copy()
    if rng is None:
        rng = _rng(*_entropy(seed))
    w = min(1.0, severity * (float(distance) / max_range)) if aliased else 0.0
    noise = rng.normal(0.0, 0.1 * severity, size=desc.shape[0])
    return w * np.asarray(pool, dtype=np.float64) + (1.0 - w) * desc + noise


def corrupt_depth(true_depth: float, noise_std: float, seed=None, rng: np.random.Generator | None = None) -> float:
    """Relative multiplicative depth noise, clamped positive; std 0 is the identity."""
    if not (np.isfinite(true_depth) and true_depth > 0):
        raise ValueError(f"true depth must be positive, got {true_depth}")
    if noise_std < 0 or not np.isfinite(noise_std):
        raise ValueError(f"noise std must be >= 0, got {noise_std}")
    if noise_std == 0.0:
        return float(true_depth)
    if rng is None:
        rng = _rng(*_entropy(seed))
    e = rng.normal(0.0, noise_std)
    return float(true_depth * max(1.0 + e, 1e-9))


def frame_count(config: WorldConfig) -> int:
    return int(math.floor(config.path_length / config.frame_spacing + 1e-9)) + 1


def render_traverse(
    world: World,
    direction: str,
    severity: float = 0.0,
    condition_seed=0,
    *,
    name: str | None = None,
    condition: str = "base",
) -> Traverse:
    """Render one traverse of the world under an appearance condition.

    Forward frames run arc 0 -> path_length; reverse frames are driven the
    other way (frame 0 at the far end, heading flipped). Depth noise follows
    world.config.depth_noise_std and is seeded per frame and channel.
    """
    if direction not in ("forward", "reverse"):
        raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
    cfg = world.config
    cond_key = _entropy(condition_seed)
    c, d = cfg.channel_count, cfg.descriptor_dim
    n = frame_count(cfg)
    fx = ((GRID_WIDTH - 1) / 2.0) / math.tan(cfg.fov_half_angle)
    fy = ((GRID_HEIGHT - 1) / 2.0) / math.tan(cfg.fov_half_angle)

    frames = []
    for i in range(n):
        arc = i * cfg.frame_spacing if direction == "forward" else cfg.path_length - i * cfg.frame_spacing
        arc = min(max(arc, 0.0), cfg.path_length)
        cam = world.point_at(arc)
        heading = float(world.heading_at(arc))
        if direction == "reverse":
            heading = math.atan2(math.sin(heading + math.pi), math.cos(heading + math.pi))

        mask, axial, right, horiz = _visibility(world, cam, heading)
        visible = np.flatnonzero(mask)

        keypoints = np.zeros((c, 2), dtype=np.int32)
        depths = np.full(c, np.nan)
        descriptors = np.zeros((c, d), dtype=np.float64)

        # Nearest visible landmark per channel, ties to the smallest landmark index.
        order = visible[np.lexsort((visible, horiz[visible]))]
        winners: dict[int, int] = {}
        for lm in order:
            ch = int(world.landmark_channels[lm])
            if ch not in winners:
                winners[ch] = int(lm)

        for ch, lm in winners.items():
            u = (GRID_WIDTH - 1) / 2.0 + fx * (right[lm] / axial[lm])
            v = (GRID_HEIGHT - 1) / 2.0 - fy * ((world.landmark_positions[lm, 2] - _CAMERA_HEIGHT) / axial[lm])
            keypoints[ch, 0] = int(np.clip(math.floor(u + 0.5), 0, GRID_WIDTH - 1))
            keypoints[ch, 1] = int(np.clip(math.floor(v + 0.5), 0, GRID_HEIGHT - 1))
            true_depth = float(axial[lm])
            if cfg.depth_noise_std > 0:
                depths[ch] = corrupt_depth(true_depth, cfg.depth_noise_std, seed=cond_key + (i, ch, _DEPTH_STREAM))
            else:
                depths[ch] = true_depth
            descriptors[ch] = apply_condition(
                world.base_descriptors[lm],
                severity,
                bool(world.landmark_aliased[lm]),
                float(horiz[lm]),
                pool=world.pool_vector,
                max_range=cfg.max_visible_range,
                seed=cond_key + (i, ch, _APPEARANCE_STREAM),
            )

        grng = _rng(*cond_key, i, 0, _GLOBAL_STREAM)
        if visible.size:
            parts = [
                apply_condition(
                    world.base_descriptors[lm],
                    severity,
                    bool(world.landmark_aliased[lm]),
                    float(horiz[lm]),
                    pool=world.pool_vector,
                    max_range=cfg.max_visible_range,
                    rng=grng,
                )
                for lm in visible
            ]
            gd = np.mean(parts, axis=0)
        else:
            gd = np.zeros(d)
        if severity > 0:
            gd = gd + grng.normal(0.0, _GLOBAL_NOISE_SCALE * severity, size=d)

        frames.append(
            FrameRecord(
                frame_id=i,
                keypoints=keypoints,
                keypoint_depths=depths,
                descriptors=descriptors.astype(np.float32),
                global_descriptor=gd.astype(np.float32),
                pose=Pose(float(cam[0]), float(cam[1]), heading, i * cfg.frame_spacing),
            )
        )

    return Traverse(
        meta=TraverseMeta(
            name=name if name is not None else direction,
            direction=direction,
            condition=condition,
            spacing_m=cfg.frame_spacing,
            channels=c,
            descriptor_dim=d,
        ),
        frames=frames,
    )


def covisibility_counts(world: World, query: Traverse, reference: Traverse) -> np.ndarray:
    """(n_query, n_reference) counts of landmarks visible from both frames."""
    def stack_masks(t: Traverse) -> np.ndarray:
        masks = []
        for f in t.frames:
            m, _, _, _ = _visibility(world, np.array([f.pose.x, f.pose.y]), f.pose.heading)
            masks.append(m)
        return np.stack(masks)

    bq = stack_masks(query).astype(np.float64)
    br = stack_masks(reference).astype(np.float64)
    return (bq @ br.T).astype(np.int64)


def modal_visual_offset(world: World, query: Traverse, reference: Traverse) -> float:
    """Median over queries of the travel-direction offset to the most co-visible reference frame.

    This measures where visual overlap peaks, the quantity ground-truth targets
    should be advanced by for opposing-viewpoint evaluation.
    """
    counts = covisibility_counts(world, query, reference)
    qpos = query.positions()
    qhead = query.headings()
    rpos = reference.positions()
    offsets = []
    for qi in range(len(query)):
        row = counts[qi]
        if row.max() == 0:
            continue
        ri = int(np.argmax(row))
        direction = np.array([math.cos(qhead[qi]), math.sin(qhead[qi])])
        offsets.append(float((rpos[ri] - qpos[qi]) @ direction))
    if not offsets:
        return 0.0
    return float(np.median(offsets))
