"""K-nearest-neighbour rankings under Euclidean distance.

Two routes to the same NeighborList shape: ``exact_neighbor_list`` is the
Theta(n^2) brute-force oracle (used once for the input space and by the
exact fitness path), ``build_hnsw``/``approx_neighbor_list`` is the
navigable-small-world surrogate used on embeddings inside the
evolutionary loop.  Ranks are 1-based; ties break by ascending id; a
point is never its own neighbour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _hnsw


@dataclass(frozen=True)
class NeighborList:
    """Per-instance ordered neighbour ids; column j holds the rank-(j+1) id."""

    ids: np.ndarray

    def __post_init__(self):
        ids = np.ascontiguousarray(self.ids, dtype=np.int32)
        if ids.ndim != 2:
            raise ValueError(f"ids must be n x K, got shape {ids.shape}")
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.ids.shape[0]

    @property
    def K(self) -> int:
        return self.ids.shape[1]


def _as_points(points) -> np.ndarray:
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"points must be 2-D, got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValueError("points contain non-finite values")
    return pts


def exact_neighbor_list(points, K: int) -> NeighborList:
    """Brute-force ranking: full pairwise distances, sorted per instance."""
    pts = _as_points(points)
    n = pts.shape[0]
    if not 1 <= K <= n - 1:
        raise ValueError(f"K must be in [1, n-1] = [1, {n - 1}], got {K}")
    ids = np.arange(n)
    out = np.empty((n, K), dtype=np.int32)
    for i in range(n):
        d2 = np.square(pts - pts[i]).sum(axis=1)
        order = np.lexsort((ids, d2))
        order = order[order != i]
        out[i] = order[:K]
    return NeighborList(out)


def full_rank_matrix(points) -> np.ndarray:
    """ranks[i, j] = rank of j among i's n-1 neighbours (1-based); diagonal 0."""
    pts = _as_points(points)
    n = pts.shape[0]
    ids = np.arange(n)
    ranks = np.zeros((n, n), dtype=np.int32)
    for i in range(n):
        d2 = np.square(pts - pts[i]).sum(axis=1)
        order = np.lexsort((ids, d2))
        order = order[order != i]
        ranks[i, order] = np.arange(1, n, dtype=np.int32)
    return ranks


def recall_at_k(exact: NeighborList, approx: NeighborList) -> float:
    """Mean per-instance overlap |exact_i & approx_i| / K."""
    if exact.ids.shape != approx.ids.shape:
        raise ValueError(f"shape mismatch: {exact.ids.shape} vs {approx.ids.shape}")
    hits = (exact.ids[:, :, None] == approx.ids[:, None, :]).any(axis=2)
    return float(hits.sum() / exact.ids.size)


@dataclass(frozen=True)
class HnswParams:
    """Graph-construction and query parameters for the approximate index."""

    M: int = 16
    ef_construction: int = 200
    ef_search: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"M must be >= 2, got {self.M}")
        if self.ef_construction < self.M:
            raise ValueError("ef_construction must be >= M")


def default_hnsw_params(K: int, seed: int = 0) -> HnswParams:
    """Library-style defaults; query beam scales with the neighbourhood size."""
    return HnswParams(M=16, ef_construction=200, ef_search=max(2 * K, 64), seed=seed)


class HnswIndex:
    """Immutable layered proximity graph over a fixed point set.

    Node levels are drawn from an exponential distribution seeded by
    ``params.seed``; together with the fixed 0..n-1 insertion order this
    makes the whole graph deterministic.  ``distance_count`` accumulates
    every point-to-point distance computed during build and queries.
    """

    def __init__(self, points, params: HnswParams):
        pts = _as_points(points)
        n = pts.shape[0]
        if n < 1:
            raise ValueError("need at least one point")
        self.points = pts
        self.params = params
        rng = np.random.default_rng(params.seed)
        mult = 1.0 / np.log(params.M)
        u = rng.random(n)
        levels = np.floor(-np.log1p(-u) * mult).astype(np.int32)
        np.minimum(levels, 30, out=levels)
        self.levels = levels
        self._counter = np.zeros(1, dtype=np.int64)
        m0 = 2 * params.M
        (self.adj0, self.adj0_d, self.deg0, self.adj_hi, self.adj_hi_d,
         self.deg_hi, self.entry, self.top) = _hnsw.build_graph(
            pts, levels, params.M, m0, params.ef_construction, self._counter)
        self.build_distance_count = int(self._counter[0])

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def distance_count(self) -> int:
        return int(self._counter[0])

    @property
    def query_distance_count(self) -> int:
        return int(self._counter[0]) - self.build_distance_count

    def neighbors_of(self, node: int, level: int = 0) -> np.ndarray:
        """Adjacency snapshot, for inspection and determinism checks."""
        if level == 0:
            return self.adj0[node, :self.deg0[node]].copy()
        return self.adj_hi[node, level - 1, :self.deg_hi[node, level - 1]].copy()

    def search(self, vector, k: int, ef_search: int | None = None,
               exclude_id: int | None = None) -> np.ndarray:
        """ids of the up-to-k approximate nearest points, (dist, id) ordered."""
        ef = max(ef_search if ef_search is not None else self.params.ef_search, k)
        q = np.ascontiguousarray(vector, dtype=np.float64)
        _, ri = _hnsw.search_knn(self.points, self.adj0, self.deg0, self.adj_hi,
                                 self.deg_hi, self.entry, self.top, q,
                                 ef + (1 if exclude_id is not None else 0),
                                 self._counter)
        if exclude_id is not None:
            ri = ri[ri != exclude_id]
        return ri[:k].astype(np.int32)


def build_hnsw(points, params: HnswParams) -> HnswIndex:
    return HnswIndex(points, params)


def approx_neighbor_list(index: HnswIndex, points, K: int,
                         ef_search: int | None = None) -> NeighborList:
    """Approximate K-neighbour ranking of every indexed point.

    ``points`` must be the matrix the index was built on (self-exclusion
    is by row id).  Requires ef_search >= K.
    """
    pts = _as_points(points)
    n = index.n
    if pts.shape != index.points.shape or not np.array_equal(pts, index.points):
        raise ValueError("points differ from the matrix the index was built on")
    if not 1 <= K <= n - 1:
        raise ValueError(f"K must be in [1, n-1] = [1, {n - 1}], got {K}")
    ef = ef_search if ef_search is not None else index.params.ef_search
    if ef < K:
        raise ValueError(f"ef_search ({ef}) must be >= K ({K})")
    ids = _hnsw.batch_self_knn(index.points, index.adj0, index.deg0, index.adj_hi,
                               index.deg_hi, index.entry, index.top, K, ef,
                               index._counter)
    return NeighborList(ids)
