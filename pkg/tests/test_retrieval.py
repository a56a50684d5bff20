import numpy as np
import pytest

from seq2single.retrieval import global_cosine_distances, top_n_candidates
from seq2single.tensors import cosine_distance


class TestTopNCandidates:
    def test_exact_copy_is_rank_one(self):
        rng = np.random.default_rng(0)
        db = rng.standard_normal((10, 6))
        query = db[4].copy()
        top = top_n_candidates(query, db, 3)
        assert top[0] == 4
        assert global_cosine_distances(query, db)[4] == pytest.approx(0.0, abs=1e-12)

    def test_n_larger_than_database_returns_full_sorted(self):
        rng = np.random.default_rng(1)
        db = rng.standard_normal((4, 5))
        query = rng.standard_normal(5)
        top = top_n_candidates(query, db, 50)
        assert len(top) == 4
        dist = global_cosine_distances(query, db)
        assert list(top) == sorted(range(4), key=lambda i: (dist[i], i))

    def test_matches_full_sort_oracle(self):
        rng = np.random.default_rng(2)
        db = rng.standard_normal((50, 8))
        query = rng.standard_normal(8)
        top = top_n_candidates(query, db, 5)
        oracle = sorted(range(50), key=lambda i: (cosine_distance(query, db[i]), i))[:5]
        assert list(top) == oracle

    def test_prefix_containment(self):
        rng = np.random.default_rng(3)
        db = rng.standard_normal((30, 6))
        query = rng.standard_normal(6)
        t3 = top_n_candidates(query, db, 3)
        t10 = top_n_candidates(query, db, 10)
        assert list(t10[:3]) == list(t3)

    def test_scale_invariance(self):
        rng = np.random.default_rng(4)
        db = rng.standard_normal((20, 6))
        query = rng.standard_normal(6)
        base = top_n_candidates(query, db, 7)
        scaled = top_n_candidates(3.5 * query, 0.25 * db, 7)
        assert list(base) == list(scaled)

    def test_distances_non_decreasing_along_ranking(self):
        rng = np.random.default_rng(5)
        db = rng.standard_normal((25, 4))
        query = rng.standard_normal(4)
        top = top_n_candidates(query, db, 25)
        dist = global_cosine_distances(query, db)[top]
        assert np.all(np.diff(dist) >= -1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            top_n_candidates(np.ones(3), np.ones((5, 4)), 2)

    def test_bad_n_and_empty_database(self):
        with pytest.raises(ValueError):
            top_n_candidates(np.ones(3), np.ones((5, 3)), 0)
        with pytest.raises(ValueError):
            top_n_candidates(np.ones(3), np.ones((0, 3)), 2)

    def test_zero_norm_rows_score_one(self):
        db = np.array([[0.0, 0.0], [1.0, 0.0]])
        dist = global_cosine_distances(np.array([1.0, 0.0]), db)
        assert dist[0] == 1.0
        assert dist[1] == pytest.approx(0.0, abs=1e-12)
