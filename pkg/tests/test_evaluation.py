import math

import numpy as np
import pytest

from helpers import make_random_traverse
from seq2single.evaluation import (
    camera_speed_experiment,
    make_ground_truth,
    recall_at_radius,
    recall_curve,
    sweep_d_l,
)
from seq2single.pipeline import MatchParams, match_traverses
from seq2single.traverse import FrameRecord, Pose, Traverse, TraverseMeta


def traverse_from_positions(positions, headings=None, channels=2, dim=3, seed=0):
    rng = np.random.default_rng(seed)
    frames = []
    s = 0.0
    for i, (x, y) in enumerate(positions):
        if i > 0:
            s += math.hypot(x - positions[i - 1][0], y - positions[i - 1][1])
        h = headings[i] if headings is not None else 0.0
        frames.append(
            FrameRecord(
                frame_id=i,
                keypoints=np.zeros((channels, 2), dtype=np.int32),
                keypoint_depths=rng.uniform(1, 20, channels),
                descriptors=rng.standard_normal((channels, dim)).astype(np.float32),
                global_descriptor=rng.standard_normal(dim).astype(np.float32),
                pose=Pose(float(x), float(y), float(h), s),
            )
        )
    meta = TraverseMeta("t", "forward", "base", 2.0, channels, dim)
    return Traverse(meta=meta, frames=frames)


class TestMakeGroundTruth:
    def test_zero_offset_targets_query_positions(self):
        t = traverse_from_positions([(0, 0), (2, 0), (4, 0)])
        gt = make_ground_truth(t, t, visual_offset=0.0)
        assert np.allclose(gt.targets, t.positions())
        assert np.allclose(gt.reference_positions, t.positions())

    def test_straight_line_advance(self):
        positions = [(float(i), 0.0) for i in range(0, 100, 2)]
        t = traverse_from_positions(positions)
        gt = make_ground_truth(t, t, visual_offset=35.0)
        assert np.allclose(gt.targets[0], [35.0, 0.0])
        assert np.allclose(gt.targets[5], [45.0, 0.0])

    def test_extrapolates_past_polyline_end_along_heading(self):
        positions = [(0.0, 0.0), (10.0, 0.0)]
        t = traverse_from_positions(positions, headings=[0.0, 0.0])
        gt = make_ground_truth(t, t, visual_offset=15.0)
        assert np.allclose(gt.targets[1], [25.0, 0.0])

    def test_curved_path_matches_arc_walk_oracle(self):
        theta = np.linspace(0, math.pi / 2, 40)
        radius = 60.0
        positions = list(zip(radius * np.sin(theta), radius * (1 - np.cos(theta))))
        t = traverse_from_positions(positions)
        offset = 20.0
        gt = make_ground_truth(t, t, visual_offset=offset)

        pts = np.array(positions)
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        for qi in range(10):
            target_s = cum[qi] + offset
            j = int(np.searchsorted(cum, target_s)) - 1
            frac = (target_s - cum[j]) / seg[j]
            expected = pts[j] + frac * (pts[j + 1] - pts[j])
            assert np.allclose(gt.targets[qi], expected, atol=1e-9)

    def test_rejects_bad_offset(self):
        t = traverse_from_positions([(0, 0), (1, 0)])
        with pytest.raises(ValueError):
            make_ground_truth(t, t, visual_offset=-1.0)
        with pytest.raises(ValueError):
            make_ground_truth(t, t, visual_offset=math.nan)

    def test_rejects_non_finite_positions(self):
        t = traverse_from_positions([(0, 0), (math.inf, 0)])
        with pytest.raises(ValueError):
            make_ground_truth(t, t, visual_offset=1.0)


class TestRecall:
    def test_all_on_target(self):
        t = traverse_from_positions([(0, 0), (2, 0), (4, 0)])
        gt = make_ground_truth(t, t, visual_offset=0.0)
        matches = [(i, i) for i in range(3)]
        assert recall_at_radius(matches, gt, 0.0) == 1.0

    def test_radius_zero_off_target(self):
        t = traverse_from_positions([(0, 0), (2, 0), (4, 0)])
        gt = make_ground_truth(t, t, visual_offset=0.0)
        matches = [(0, 1), (1, 2), (2, 0)]
        assert recall_at_radius(matches, gt, 0.0) == 0.0

    def test_hand_counted_hits(self):
        positions = [(2.0 * i, 0.0) for i in range(20)]
        t = traverse_from_positions(positions)
        gt = make_ground_truth(t, t, visual_offset=0.0)
        matches = [(i, min(19, i + (i % 3))) for i in range(20)]
        radius = 3.0
        expected = sum(1 for i in range(20) if abs(2.0 * min(19, i + (i % 3)) - 2.0 * i) <= radius) / 20
        assert recall_at_radius(matches, gt, radius) == pytest.approx(expected)

    def test_invariant_to_query_order(self):
        positions = [(2.0 * i, 0.0) for i in range(10)]
        t = traverse_from_positions(positions)
        gt = make_ground_truth(t, t, visual_offset=0.0)
        matches = [(i, (i + 1) % 10) for i in range(10)]
        shuffled = matches[::-1]
        assert recall_at_radius(matches, gt, 2.5) == recall_at_radius(shuffled, gt, 2.5)

    def test_curve_saturates_and_is_monotone(self):
        positions = [(2.0 * i, 0.0) for i in range(10)]
        t = traverse_from_positions(positions)
        gt = make_ground_truth(t, t, visual_offset=0.0)
        matches = [(i, (i + 2) % 10) for i in range(10)]
        curve = recall_curve(matches, gt, [0.0, 2.0, 5.0, 1e9])
        assert curve.recalls[-1] == 1.0
        assert all(b >= a for a, b in zip(curve.recalls, curve.recalls[1:]))

    def test_single_radius_curve_equals_pointwise(self):
        positions = [(2.0 * i, 0.0) for i in range(10)]
        t = traverse_from_positions(positions)
        gt = make_ground_truth(t, t, visual_offset=0.0)
        matches = [(i, (i + 1) % 10) for i in range(10)]
        curve = recall_curve(matches, gt, [4.0])
        assert curve.recalls == (recall_at_radius(matches, gt, 4.0),)

    def test_random_curve_pointwise_equal(self):
        rng = np.random.default_rng(0)
        positions = [(2.0 * i, float(rng.normal())) for i in range(15)]
        t = traverse_from_positions(positions)
        gt = make_ground_truth(t, t, visual_offset=5.0)
        matches = [(i, int(rng.integers(0, 15))) for i in range(15)]
        radii = [0.5, 2.0, 7.5, 30.0]
        curve = recall_curve(matches, gt, radii)
        for r, rec in zip(radii, curve.recalls):
            assert rec == recall_at_radius(matches, gt, r)

    def test_unsorted_radii_rejected(self):
        t = traverse_from_positions([(0, 0), (2, 0)])
        gt = make_ground_truth(t, t, visual_offset=0.0)
        with pytest.raises(ValueError):
            recall_curve([(0, 0), (1, 1)], gt, [2.0, 1.0])


class TestSweeps:
    @pytest.fixture
    def pair(self):
        query = make_random_traverse(21, n_frames=12, channels=4, dim=6)
        reference = make_random_traverse(22, n_frames=12, channels=4, dim=6)
        return query, reference

    def test_single_cell_equals_direct_pipeline(self, pair):
        query, reference = pair
        surface = sweep_d_l(query, reference, [20.0], [4], top_n=3, radius=5.0, visual_offset=0.0)
        params = MatchParams(20.0, 4, top_n=3)
        matches = match_traverses(query, reference, params)
        gt = make_ground_truth(query, reference, 0.0)
        assert surface.recall[0, 0] == recall_at_radius(matches, gt, 5.0)

    def test_rerun_identical(self, pair):
        query, reference = pair
        kwargs = dict(top_n=3, radius=5.0, visual_offset=0.0)
        a = sweep_d_l(query, reference, [10.0, 30.0], [0, 4], **kwargs)
        b = sweep_d_l(query, reference, [10.0, 30.0], [0, 4], **kwargs)
        assert np.array_equal(a.recall, b.recall)

    def test_grid_cells_equal_independent_runs(self, pair):
        query, reference = pair
        d_values, l_values = [10.0, 30.0], [0, 4]
        surface = sweep_d_l(query, reference, d_values, l_values, top_n=3, radius=5.0, visual_offset=0.0)
        gt = make_ground_truth(query, reference, 0.0)
        for di, d in enumerate(d_values):
            for li, l in enumerate(l_values):
                matches = match_traverses(query, reference, MatchParams(d, l, top_n=3))
                assert surface.recall[di, li] == recall_at_radius(matches, gt, 5.0)

    def test_failed_cell_marked_missing_not_zero(self, pair):
        query, reference = pair
        surface = sweep_d_l(query, reference, [10.0], [3], top_n=3, radius=5.0, visual_offset=0.0)
        assert math.isnan(surface.recall[0, 0])
        assert surface.failures and surface.failures[0][:2] == (10.0, 3)

    def test_threaded_matches_sequential(self, pair):
        query, reference = pair
        kwargs = dict(top_n=3, radius=5.0, visual_offset=0.0)
        seq = sweep_d_l(query, reference, [10.0, 30.0], [0, 4], threads=1, **kwargs)
        par = sweep_d_l(query, reference, [10.0, 30.0], [0, 4], threads=4, **kwargs)
        assert np.array_equal(seq.recall, par.recall)

    def test_unit_stride_speed_equals_sweep(self, pair):
        query, reference = pair
        kwargs = dict(top_n=3, radius=5.0, visual_offset=0.0)
        surfaces = camera_speed_experiment(query, reference, [10.0, 30.0], [0, 4], [1], **kwargs)
        plain = sweep_d_l(query, reference, [10.0, 30.0], [0, 4], stride=1, **kwargs)
        assert np.array_equal(surfaces[0].recall, plain.recall)

    def test_singleton_window_identical_across_strides(self, pair):
        query, reference = pair
        kwargs = dict(top_n=3, radius=5.0, visual_offset=0.0)
        surfaces = camera_speed_experiment(query, reference, [10.0, 30.0], [0], [1, 2, 4], **kwargs)
        for s in surfaces[1:]:
            assert np.array_equal(s.recall, surfaces[0].recall)

    def test_strided_cells_match_hand_built_windows(self, pair):
        from seq2single.matching import build_sequence

        query, reference = pair
        stride = 2
        surface = sweep_d_l(query, reference, [25.0], [4], top_n=2, radius=5.0, stride=stride, visual_offset=0.0)
        # Recompute via explicit window enumeration.
        from seq2single.matching import sequence_min_distances
        from seq2single.retrieval import top_n_candidates

        gt = make_ground_truth(query, reference, 0.0)
        ref_gds = reference.global_descriptors()
        matches = []
        for qi, f in enumerate(query.frames):
            scored = []
            for c in top_n_candidates(f.global_descriptor, ref_gds, 2):
                members = build_sequence(len(reference), int(c), 4, stride).members
                assert members == tuple(
                    m for m in range(int(c) - 4, int(c) + 5, stride) if 0 <= m < len(reference)
                )
                ms = sequence_min_distances(f, [reference.frames[m] for m in members], 25.0)
                scored.append((int(c), ms.score))
            best = min(scored, key=lambda item: (item[1], item[0]))[0]
            matches.append((qi, best))
        assert surface.recall[0, 0] == recall_at_radius(matches, gt, 5.0)

    def test_empty_grid_rejected(self, pair):
        query, reference = pair
        with pytest.raises(ValueError):
            sweep_d_l(query, reference, [], [0], top_n=2, radius=5.0)
