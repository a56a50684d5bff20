"""Reference-window construction and per-channel min-distance scoring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .depth import passes_depth_filter
from .traverse import FrameRecord

WORST_SCORE = 2.0


@dataclass(frozen=True)
class ReferenceSequence:
    """Strided window of reference frame indices around a candidate center."""

    center: int
    half_width: int
    stride: int
    members: tuple[int, ...]


def build_sequence(traverse_length: int, center: int, length: int, stride: int = 1) -> ReferenceSequence:
    """Window {center + j*stride : j in [-length/2, length/2]} clipped to the traverse.

    `length` counts half-spans, so the full window holds up to length+1 frames;
    length 0 yields the singleton {center}. A stride above 1 emulates faster
    camera motion by skipping intermediate frames.
    """
    if not 0 <= center < traverse_length:
        raise IndexError(f"center {center} outside traverse of length {traverse_length}")
    if length < 0 or length % 2 != 0:
        raise ValueError(f"sequence length must be even and >= 0, got {length}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    h = length // 2
    members = tuple(
        center + j * stride for j in range(-h, h + 1) if 0 <= center + j * stride < traverse_length
    )
    return ReferenceSequence(center=center, half_width=h, stride=stride, members=members)


@dataclass(frozen=True)
class ChannelMatch:
    distance: float
    frame_id: int


@dataclass(frozen=True)
class MatchScore:
    """Mean over contributing channels of the per-channel min distance."""

    score: float
    contributing_channels: tuple[int, ...]
    per_channel: dict[int, ChannelMatch]


def window_min_distances(query_desc: np.ndarray, ref_desc: np.ndarray, ref_depths: np.ndarray, depth_limit: float):
    """Vectorized core shared by the record API and the pipeline.

    query_desc (C, D) float64; ref_desc (m, C, D) float64 ordered by ascending
    frame id; ref_depths (m, C). Returns (min_dist (C,), argmin_row (C,),
    contributing (C,) bool); channels with no depth-passing frame hold inf.
    """
    qn = np.linalg.norm(query_desc, axis=1)
    rn = np.linalg.norm(ref_desc, axis=2)
    dots = np.einsum("cd,mcd->mc", query_desc, ref_desc)
    denom = qn[None, :] * rn
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(denom > 0.0, dots / denom, 0.0)
    dist = 1.0 - cos
    passing = passes_depth_filter(ref_depths, depth_limit)
    masked = np.where(passing, dist, np.inf)
    return masked.min(axis=0), masked.argmin(axis=0), passing.any(axis=0)


def score_from_min_distances(min_dist: np.ndarray, contributing: np.ndarray) -> float:
    if not contributing.any():
        return WORST_SCORE
    return float(min_dist[contributing].mean())


def sequence_min_distances(query: FrameRecord, frames: Sequence[FrameRecord], depth_limit: float) -> MatchScore:
    """Score a query frame against a window of reference frames.

    Per channel, only frames whose keypoint depth passes the strict range filter
    participate; the channel contributes the minimum cosine distance over those
    frames. The score is the mean over contributing channels, or the worst
    score 2.0 when no channel contributes. Duplicate frame ids are collapsed
    and the result is independent of input frame order.
    """
    if not frames:
        raise ValueError("reference sequence is empty")
    unique = sorted({f.frame_id: f for f in frames}.values(), key=lambda f: f.frame_id)
    c, d = query.descriptors.shape
    for f in unique:
        if f.descriptors.shape != (c, d):
            raise ValueError(
                f"frame {f.frame_id} descriptors are {f.descriptors.shape}, query has {(c, d)}"
            )
    ref_desc = np.stack([f.descriptors for f in unique]).astype(np.float64)
    ref_depths = np.stack([f.keypoint_depths for f in unique])
    min_dist, argmin_row, contributing = window_min_distances(
        query.descriptors.astype(np.float64), ref_desc, ref_depths, depth_limit
    )
    chans = np.flatnonzero(contributing)
    per_channel = {
        int(k): ChannelMatch(float(min_dist[k]), unique[int(argmin_row[k])].frame_id) for k in chans
    }
    return MatchScore(
        score=score_from_min_distances(min_dist, contributing),
        contributing_channels=tuple(int(k) for k in chans),
        per_channel=per_channel,
    )


def select_best(candidates: Sequence[tuple[int, MatchScore]]) -> int:
    """Candidate center with the lowest score; ties go to the smallest center."""
    if not candidates:
        raise ValueError("no candidates to select from")
    best_center, _ = min(candidates, key=lambda item: (item[1].score, item[0]))
    return best_center
