"""Embedding-quality measures independent of the evolutionary fitness.

Rank-based diagnostics over exact neighbour lists: local continuity
(matching-neighbour fraction), trustworthiness (penalises intruders by
how far down the input ranking they sit), continuity (penalises missing
neighbours by their embedded rank), and their scalarisation.  All are 1
for a perfectly preserved neighbourhood and need the full n-1 rank
tables because offending ranks exceed K.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .neighbors import NeighborList, exact_neighbor_list, full_rank_matrix


def _check_match(a: NeighborList, b: NeighborList):
    if a.ids.shape != b.ids.shape:
        raise ValueError(f"neighbour lists disagree: {a.ids.shape} vs {b.ids.shape}")


def local_continuity(input_nl: NeighborList, embedded_nl: NeighborList) -> float:
    """Mean fraction of input-space neighbours retained in the embedding."""
    _check_match(input_nl, embedded_nl)
    hits = (input_nl.ids[:, :, None] == embedded_nl.ids[:, None, :]).any(axis=2)
    return float(hits.sum() / input_nl.ids.size)


def h_k(n: int, K: int) -> float:
    """Normalisation 2 / (nK(2n - 3K - 1)); defined only while positive."""
    if n < 2 or K < 1:
        raise ValueError(f"need n >= 2 and K >= 1, got n={n}, K={K}")
    denom = n * K * (2 * n - 3 * K - 1)
    if denom <= 0:
        raise ValueError(f"K={K} too large for n={n}: normalisation "
                         f"denominator {denom} <= 0")
    return 2.0 / denom


def trustworthiness(input_nl: NeighborList, embedded_nl: NeighborList,
                    full_input_ranks: np.ndarray,
                    full_embedded_ranks: np.ndarray) -> float:
    """1 - H_K * sum over intruders of (input rank - K)."""
    _check_match(input_nl, embedded_nl)
    n, K = input_nl.ids.shape
    hk = h_k(n, K)
    total = 0.0
    for i in range(n):
        intruders = np.setdiff1d(embedded_nl.ids[i], input_nl.ids[i],
                                 assume_unique=True)
        if intruders.size:
            total += float((full_input_ranks[i, intruders] - K).sum())
    return 1.0 - hk * total


def continuity(input_nl: NeighborList, embedded_nl: NeighborList,
               full_input_ranks: np.ndarray,
               full_embedded_ranks: np.ndarray) -> float:
    """1 - H_K * sum over missing neighbours of (embedded rank - K)."""
    _check_match(input_nl, embedded_nl)
    n, K = input_nl.ids.shape
    hk = h_k(n, K)
    total = 0.0
    for i in range(n):
        missing = np.setdiff1d(input_nl.ids[i], embedded_nl.ids[i],
                               assume_unique=True)
        if missing.size:
            total += float((full_embedded_ranks[i, missing] - K).sum())
    return 1.0 - hk * total


def tc_scalar(t: float, c: float, lam: float) -> float:
    """(1 - lam) * trustworthiness + lam * continuity."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    return (1.0 - lam) * t + lam * c


@dataclass(frozen=True)
class QualityReport:
    k: int
    lam: float
    local_continuity: float
    trustworthiness: float
    continuity: float
    tc_scalar: float

    def to_dict(self) -> dict:
        return {
            "local_continuity": self.local_continuity,
            "trustworthiness": self.trustworthiness,
            "continuity": self.continuity,
            "tc_scalar": self.tc_scalar,
            "k": self.k,
            "lambda": self.lam,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def quality_report(points, embedding, K: int, lam: float = 0.5) -> QualityReport:
    """All measures for an embedding of ``points``, via exact rankings."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    input_nl = exact_neighbor_list(points, K)
    embedded_nl = exact_neighbor_list(embedding, K)
    fir = full_rank_matrix(points)
    fer = full_rank_matrix(embedding)
    t = trustworthiness(input_nl, embedded_nl, fir, fer)
    c = continuity(input_nl, embedded_nl, fir, fer)
    return QualityReport(
        k=K, lam=lam,
        local_continuity=local_continuity(input_nl, embedded_nl),
        trustworthiness=t, continuity=c, tc_scalar=tc_scalar(t, c, lam),
    )
