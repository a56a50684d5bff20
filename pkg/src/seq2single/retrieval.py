"""Top-N candidate generation by global-descriptor cosine distance."""

from __future__ import annotations

import numpy as np


def global_cosine_distances(query_gd, reference_gds) -> np.ndarray:
    """Cosine distance of one query descriptor to every database descriptor.

    Pairs involving a zero-norm vector score the uninformative 1.0.
    """
    q = np.asarray(query_gd, dtype=np.float64).ravel()
    db = np.asarray(reference_gds, dtype=np.float64)
    if db.ndim == 1:
        db = db[None, :]
    if db.ndim != 2 or db.shape[1] != q.shape[0]:
        raise ValueError(f"descriptor dim mismatch: query {q.shape[0]}, database {db.shape}")
    qn = np.linalg.norm(q)
    rn = np.linalg.norm(db, axis=1)
    denom = qn * rn
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(denom > 0.0, db @ q / denom, 0.0)
    return 1.0 - cos


def top_n_candidates(query_gd, reference_gds, n: int) -> np.ndarray:
    """Indices of the n nearest database entries, ascending by (distance, index).

    Exact brute force; returns fewer than n indices only when the database is
    smaller than n.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    dist = global_cosine_distances(query_gd, reference_gds)
    if dist.size == 0:
        raise ValueError("reference database is empty")
    order = np.lexsort((np.arange(dist.size), dist))
    return order[: min(n, dist.size)].copy()
