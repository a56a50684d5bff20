"""End-to-end matching: global retrieval, window scoring, candidate selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matching import build_sequence, score_from_min_distances, window_min_distances
from .retrieval import top_n_candidates
from .traverse import Traverse


@dataclass(frozen=True)
class MatchParams:
    depth_limit: float
    sequence_length: int
    top_n: int = 5
    stride: int = 1

    def __post_init__(self):
        if self.depth_limit <= 0:
            raise ValueError(f"depth limit must be positive (or inf), got {self.depth_limit}")
        if self.sequence_length < 0 or self.sequence_length % 2 != 0:
            raise ValueError(f"sequence length must be even and >= 0, got {self.sequence_length}")
        if self.top_n < 1:
            raise ValueError(f"top_n must be >= 1, got {self.top_n}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")


@dataclass(frozen=True)
class QueryMatch:
    query_index: int
    reference_index: int
    score: float
    candidates: tuple[int, ...]  # retrieval order, best first


def candidate_lists(query: Traverse, reference: Traverse, top_n: int) -> list[np.ndarray]:
    """Per-query top-N reference indices by global-descriptor distance."""
    ref_gds = reference.global_descriptors()
    return [top_n_candidates(f.global_descriptor, ref_gds, top_n) for f in query.frames]


def match_traverses(
    query: Traverse,
    reference: Traverse,
    params: MatchParams,
    candidates: list[np.ndarray] | None = None,
) -> list[QueryMatch]:
    """Match every query frame against the reference traverse.

    Precomputed candidate lists may be passed to share retrieval across runs;
    they must come from candidate_lists() with the same top_n.
    """
    if len(query) == 0 or len(reference) == 0:
        raise ValueError("query and reference traverses must be non-empty")
    if (query.meta.channels, query.meta.descriptor_dim) != (reference.meta.channels, reference.meta.descriptor_dim):
        raise ValueError(
            f"channel/descriptor shape mismatch: query {query.meta.channels}x{query.meta.descriptor_dim}, "
            f"reference {reference.meta.channels}x{reference.meta.descriptor_dim}"
        )
    if candidates is None:
        candidates = candidate_lists(query, reference, params.top_n)
    if len(candidates) != len(query):
        raise ValueError(f"expected {len(query)} candidate lists, got {len(candidates)}")

    ref_desc = reference.descriptor_stack().astype(np.float64)
    ref_depths = reference.depth_stack()

    matches = []
    for qi, frame in enumerate(query.frames):
        qdesc = frame.descriptors.astype(np.float64)
        scored = []
        for center in candidates[qi]:
            seq = build_sequence(len(reference), int(center), params.sequence_length, params.stride)
            idx = np.array(seq.members, dtype=np.intp)
            min_dist, _, contributing = window_min_distances(
                qdesc, ref_desc[idx], ref_depths[idx], params.depth_limit
            )
            scored.append((int(center), score_from_min_distances(min_dist, contributing)))
        best_center, best_score = min(scored, key=lambda item: (item[1], item[0]))
        matches.append(
            QueryMatch(
                query_index=qi,
                reference_index=best_center,
                score=best_score,
                candidates=tuple(int(c) for c in candidates[qi]),
            )
        )
    return matches
