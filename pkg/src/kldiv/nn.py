"""Exact Euclidean nearest-neighbour queries over fixed point sets.

All results are exact: a k-d tree (scipy.spatial.cKDTree) is used only to
gather candidate points, and every distance that takes part in a comparison
is recomputed with the single arithmetic expression in :func:`euclidean`.
This keeps tie decisions (points exactly on a ball boundary) consistent
between the scalar query functions and the batched helpers used by the
divergence estimators, which the tree's internal arithmetic does not
guarantee on its own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataError

# Candidate radii are inflated by one part in 1e9 before asking the tree for
# ball contents, then filtered with exact comparisons; this covers points
# that sit on the boundary but would be missed through the tree's rounding.
_RADIUS_SLACK = 1.0 + 1e-9


def euclidean(a, b) -> np.ndarray:
    """Euclidean distance between paired rows of `a` and `b`.

    Every distance comparison in this package goes through this one
    expression, so equal inputs always produce bit-equal distances.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.sqrt(((a - b) ** 2).sum(axis=-1))


@dataclass(frozen=True)
class NeighborIndex:
    """Immutable point set plus acceleration structure for exact queries."""

    points: np.ndarray
    tree: cKDTree

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def build_index(points) -> NeighborIndex:
    """Build a query index over an (N, d) point matrix."""
    pts = np.array(points, dtype=np.float64, copy=True)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
        raise DataError(f"point matrix must be (N>=1, d>=1), got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise DataError("point matrix contains non-finite values")
    pts.flags.writeable = False
    return NeighborIndex(pts, cKDTree(pts))


def _eligible_distances(index: NeighborIndex, query, exclude_exact_match: bool):
    query = np.asarray(query, dtype=np.float64).reshape(-1)
    if query.shape[0] != index.d:
        raise DataError(f"query has dimension {query.shape[0]}, index has {index.d}")
    dist = euclidean(index.points, query[None, :])
    if exclude_exact_match:
        zero = np.flatnonzero(dist == 0.0)
        if zero.size:
            dist = np.delete(dist, zero[0])  # remove one member, not all ties
    return dist

def knn_distance(index: NeighborIndex, query, k: int,
                 exclude_exact_match: bool = False) -> float:
    """Distance to the k-th nearest point (ties resolved by order statistics).

    With `exclude_exact_match`, one zero-distance point is removed before
    ranking — the "self" when the query is a member of the indexed set.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    dist = _eligible_distances(index, query, exclude_exact_match)
    if k > dist.shape[0]:
        raise ValueError(
            f"k={k} exceeds the {dist.shape[0]} eligible points in the index")
    return float(np.partition(dist, k - 1)[k - 1])


def count_within_radius(index: NeighborIndex, query, r: float,
                        exclude_exact_match: bool = False) -> int:
    """Number of eligible points at distance <= r (closed ball)."""
    if r < 0:
        raise ValueError(f"radius must be >= 0, got {r}")
    dist = _eligible_distances(index, query, exclude_exact_match)
    return int((dist <= r).sum())


def has_duplicate_points(points) -> tuple[bool, tuple[int, int] | None]:
    """Whether two rows are exactly equal; returns the first offending pair.

    "First" means the pair (i, j), i < j, whose second index j is smallest —
    the first row that repeats an earlier one when scanning top to bottom.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < 2:
        return False, None
    pts = pts + 0.0  # fold -0.0 onto +0.0: they are equal, and equidistant to everything

    order = np.lexsort(pts.T[::-1])
    srt = pts[order]
    same = (srt[1:] == srt[:-1]).all(axis=1)
    if not same.any():
        return False, None

    best = None
    run_start = 0
    for t in range(len(same)):
        if not same[t]:
            run_start = t + 1
            continue
        group = order[run_start:t + 2]
        i, j = np.partition(group, 1)[:2]
        if best is None or j < best[1]:
            best = (int(i), int(j))
    return True, best


def ball_members(index: NeighborIndex, queries: np.ndarray,
                 radii: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Indices of points within slightly inflated balls around each query.

    Returns (flat member indices, flat query-row indices, reduceat offsets).
    Membership is a superset of each exact closed ball of radius `radii[i]`;
    callers must filter with exact distance comparisons.  Every returned
    group is non-empty whenever the ball genuinely contains a point.
    """
    lists = index.tree.query_ball_point(queries, radii * _RADIUS_SLACK)
    lengths = np.fromiter((len(b) for b in lists), dtype=np.intp, count=len(lists))
    total = int(lengths.sum())
    flat = np.fromiter((j for b in lists for j in b), dtype=np.intp, count=total)
    offsets = np.zeros(len(lists), dtype=np.intp)
    np.cumsum(lengths[:-1], out=offsets[1:])
    rows = np.repeat(np.arange(len(lists), dtype=np.intp), lengths)
    return flat, rows, offsets


def knn_distances_bulk(index: NeighborIndex, queries: np.ndarray, k: int,
                       exclude_self: bool) -> np.ndarray:
    """k-th neighbour distance for many queries at once (tree arithmetic).

    With `exclude_self`, each query is assumed to be a member of the indexed
    set with no duplicates, so its unique zero distance is skipped.  Suitable
    where the distances feed arithmetic directly; comparisons against other
    distances must go through exact recomputation instead.
    """
    kk = k + 1 if exclude_self else k
    dist = index.tree.query(queries, k=[kk])[0][:, 0]
    return dist
