"""Ground truth with visual offset, recall-at-radius curves, parameter sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pipeline import MatchParams, candidate_lists, match_traverses
from .traverse import Traverse

DEFAULT_VISUAL_OFFSET = 35.0  # meters; midpoint of the expected overlap offset for opposing views


def _advance_along_polyline(points: np.ndarray, cum: np.ndarray, start_s: float, delta: float, end_heading: float) -> np.ndarray:
    """Point `delta` meters past arc position start_s; extrapolates past the end."""
    target = start_s + delta
    if target <= cum[-1]:
        x = np.interp(target, cum, points[:, 0])
        y = np.interp(target, cum, points[:, 1])
        return np.array([x, y])
    over = target - cum[-1]
    return points[-1] + over * np.array([math.cos(end_heading), math.sin(end_heading)])


@dataclass(frozen=True)
class GroundTruth:
    """Per-query target positions plus the reference positions they are judged against."""

    targets: np.ndarray  # (n_query, 2) meters
    reference_positions: np.ndarray  # (n_reference, 2) meters
    visual_offset: float


def make_ground_truth(query: Traverse, reference: Traverse, visual_offset: float = DEFAULT_VISUAL_OFFSET) -> GroundTruth:
    """Target for each query = its position advanced `visual_offset` meters along its travel direction.

    The advance walks the query traverse's own polyline (frame order); past the
    final pose it continues straight along that pose's heading.
    """
    if visual_offset < 0 or not np.isfinite(visual_offset):
        raise ValueError(f"visual offset must be finite and >= 0, got {visual_offset}")
    if len(query) == 0 or len(reference) == 0:
        raise ValueError("query and reference traverses must be non-empty")
    qpos = query.positions()
    rpos = reference.positions()
    if not (np.all(np.isfinite(qpos)) and np.all(np.isfinite(rpos))):
        raise ValueError("traverse poses contain non-finite positions")

    seg = np.linalg.norm(np.diff(qpos, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    end_heading = query.frames[-1].pose.heading
    targets = np.stack(
        [_advance_along_polyline(qpos, cum, cum[i], visual_offset, end_heading) for i in range(len(query))]
    )
    return GroundTruth(targets=targets, reference_positions=rpos, visual_offset=float(visual_offset))


def _match_pairs(matches) -> list[tuple[int, int]]:
    pairs = []
    for m in matches:
        if hasattr(m, "reference_index"):
            pairs.append((m.query_index, m.reference_index))
        else:
            q, r = m
            pairs.append((int(q), int(r)))
    return pairs


def recall_at_radius(matches, gt: GroundTruth, radius: float) -> float:
    """Fraction of queries whose matched reference lies within `radius` of the target."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    pairs = _match_pairs(matches)
    if not pairs:
        raise ValueError("no matches to evaluate")
    hits = 0
    for q, r in pairs:
        d = float(np.hypot(*(gt.reference_positions[r] - gt.targets[q])))
        if d <= radius:
            hits += 1
    return hits / len(pairs)


@dataclass(frozen=True)
class RecallCurve:
    radii: tuple[float, ...]
    recalls: tuple[float, ...]
    n_queries: int


def recall_curve(matches, gt: GroundTruth, radii) -> RecallCurve:
    """Recall at each radius; radii must be strictly increasing."""
    radii = [float(r) for r in radii]
    if not radii:
        raise ValueError("radius list is empty")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError(f"radii must be strictly increasing, got {radii}")
    pairs = _match_pairs(matches)
    recalls = tuple(recall_at_radius(pairs, gt, r) for r in radii)
    return RecallCurve(radii=tuple(radii), recalls=recalls, n_queries=len(pairs))


@dataclass(frozen=True)
class SweepSurface:
    """Recall at a fixed radius over a (depth limit, sequence length) grid.

    Cells whose pipeline run failed hold NaN and are listed in `failures`.
    """

    depth_limits: tuple[float, ...]
    sequence_lengths: tuple[int, ...]
    stride: int
    radius: float
    recall: np.ndarray  # (len(depth_limits), len(sequence_lengths)), NaN = failed
    n_queries: int
    failures: tuple[tuple[float, int, str], ...] = field(default=())


def sweep_d_l(
    query: Traverse,
    reference: Traverse,
    depth_limits,
    sequence_lengths,
    top_n: int = 5,
    radius: float = 10.0,
    stride: int = 1,
    visual_offset: float = DEFAULT_VISUAL_OFFSET,
    threads: int = 1,
) -> SweepSurface:
    """Full pipeline per (depth limit, sequence length) cell, recall at one radius.

    Retrieval does not depend on the grid, so candidate lists are computed once
    and shared; each cell then equals an independent pipeline invocation.
    """
    depth_limits = tuple(float(d) for d in depth_limits)
    sequence_lengths = tuple(int(l) for l in sequence_lengths)
    if not depth_limits or not sequence_lengths:
        raise ValueError("depth and sequence-length grids must be non-empty")

    gt = make_ground_truth(query, reference, visual_offset)
    cands = candidate_lists(query, reference, top_n)
    recall = np.full((len(depth_limits), len(sequence_lengths)), np.nan)
    failures = []

    def run_cell(cell):
        di, li = cell
        params = MatchParams(depth_limits[di], sequence_lengths[li], top_n=top_n, stride=stride)
        matches = match_traverses(query, reference, params, candidates=cands)
        return recall_at_radius(matches, gt, radius)

    cells = [(di, li) for di in range(len(depth_limits)) for li in range(len(sequence_lengths))]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_cell, cell) for cell in cells]
        results = []
        for cell, fut in zip(cells, futures):
            try:
                results.append((cell, fut.result(), None))
            except Exception as e:
                results.append((cell, np.nan, str(e)))
    else:
        results = []
        for cell in cells:
            try:
                results.append((cell, run_cell(cell), None))
            except Exception as e:
                results.append((cell, np.nan, str(e)))

    for (di, li), value, err in results:
        recall[di, li] = value
        if err is not None:
            failures.append((depth_limits[di], sequence_lengths[li], err))

    return SweepSurface(
        depth_limits=depth_limits,
        sequence_lengths=sequence_lengths,
        stride=stride,
        radius=float(radius),
        recall=recall,
        n_queries=len(query),
        failures=tuple(failures),
    )


def camera_speed_experiment(
    query: Traverse,
    reference: Traverse,
    depth_limits,
    sequence_lengths,
    strides,
    top_n: int = 5,
    radius: float = 10.0,
    visual_offset: float = DEFAULT_VISUAL_OFFSET,
    threads: int = 1,
) -> list[SweepSurface]:
    """One sweep surface per frame-skip stride (the camera-speed analogue)."""
    strides = [int(m) for m in strides]
    if not strides or any(m < 1 for m in strides):
        raise ValueError(f"strides must be positive integers, got {strides}")
    return [
        sweep_d_l(
            query,
            reference,
            depth_limits,
            sequence_lengths,
            top_n=top_n,
            radius=radius,
            stride=m,
            visual_offset=visual_offset,
            threads=threads,
        )
        for m in strides
    ]


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def write_curve_csv(path, curve: RecallCurve) -> None:
    lines = ["radius_meters,recall,n_queries"]
    for r, rec in zip(curve.radii, curve.recalls):
        lines.append(f"{_fmt(r)},{_fmt(rec)},{curve.n_queries}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_surface_csv(path, surface: SweepSurface) -> None:
    """Grid rows in (d, l) order; failed cells leave the recall field empty."""
    lines = ["d_meters,l_frames,stride,radius_meters,recall,n_queries"]
    for di, d in enumerate(surface.depth_limits):
        for li, l in enumerate(surface.sequence_lengths):
            r = surface.recall[di, li]
            rec = "" if np.isnan(r) else _fmt(r)
            lines.append(f"{_fmt(d)},{l},{surface.stride},{_fmt(surface.radius)},{rec},{surface.n_queries}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
