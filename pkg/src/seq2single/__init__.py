"""Depth- and temporal-aware sequence-to-single place matching."""

__version__ = "0.1.0"

from .depth import (
    INVALID_DEPTH,
    UNBOUNDED,
    CameraIntrinsics,
    DepthMap,
    depth_at,
    disparity_to_depth,
    filter_by_depth,
    passes_depth_filter,
)
from .evaluation import (
    GroundTruth,
    RecallCurve,
    SweepSurface,
    camera_speed_experiment,
    make_ground_truth,
    recall_at_radius,
    recall_curve,
    sweep_d_l,
    write_curve_csv,
    write_surface_csv,
)
from .matching import (
    MatchScore,
    ReferenceSequence,
    build_sequence,
    select_best,
    sequence_min_distances,
)
from .pipeline import MatchParams, QueryMatch, candidate_lists, match_traverses
from .retrieval import global_cosine_distances, top_n_candidates
from .simworld import (
    Landmark,
    World,
    WorldConfig,
    apply_condition,
    corrupt_depth,
    generate_world,
    modal_visual_offset,
    render_traverse,
    visible_landmarks,
)
from .store import (
    TraverseStoreError,
    load_tensor,
    load_traverse,
    save_tensor,
    save_traverse,
    subsample_by_distance,
)
from .tensors import ActivationTensor, Keypoint, cosine_distance, descriptor_at, extract_keypoints
from .traverse import FrameRecord, Pose, Traverse, TraverseMeta, traverses_equal

__all__ = [
    "ActivationTensor",
    "CameraIntrinsics",
    "DepthMap",
    "FrameRecord",
    "GroundTruth",
    "INVALID_DEPTH",
    "Keypoint",
    "Landmark",
    "MatchParams",
    "MatchScore",
    "Pose",
    "QueryMatch",
    "RecallCurve",
    "ReferenceSequence",
    "SweepSurface",
    "Traverse",
    "TraverseMeta",
    "TraverseStoreError",
    "UNBOUNDED",
    "World",
    "WorldConfig",
    "apply_condition",
    "build_sequence",
    "camera_speed_experiment",
    "candidate_lists",
    "corrupt_depth",
    "cosine_distance",
    "depth_at",
    "descriptor_at",
    "disparity_to_depth",
    "extract_keypoints",
    "filter_by_depth",
    "generate_world",
    "global_cosine_distances",
    "load_tensor",
    "load_traverse",
    "make_ground_truth",
    "match_traverses",
    "modal_visual_offset",
    "passes_depth_filter",
    "recall_at_radius",
    "recall_curve",
    "render_traverse",
    "save_tensor",
    "save_traverse",
    "select_best",
    "sequence_min_distances",
    "subsample_by_distance",
    "sweep_d_l",
    "top_n_candidates",
    "traverses_equal",
    "visible_landmarks",
    "write_curve_csv",
    "write_surface_csv",
]
