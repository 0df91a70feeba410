"""Local-topology-preservation fitness.

For each instance the input-space K-neighbourhood is compared against
the embedded-space one.  Retained neighbours contribute a normalised
rank deviation

    deviation(r, r_hat) = |r - r_hat| / max(r, K - r)

and each missing neighbour contributes a full penalty; the weighted form
scales both by (K - r) / K so near neighbours matter most.  An
individual's fitness is the mean weighted cost over all instances
(minimised; 0 is perfect preservation).

The per-instance helpers here are the readable reference path; the whole
reduction also exists as a flat kernel (numba-compiled, with a
vectorised NumPy fallback) used inside the evolutionary loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import USE_NUMBA, jit_kernel
from .dataset import Dataset
from .neighbors import (HnswParams, NeighborList, approx_neighbor_list,
                        build_hnsw, exact_neighbor_list)
from .trees import Individual, eval_individual


@dataclass(frozen=True)
class NeighborSets:
    """Partition of instance i's neighbourhoods.

    V: ids ranked in the input space but absent from the embedded list
       (with their input ranks).
    W: ids present in both (with input and embedded ranks).
    U: ids present only in the embedded list (with embedded ranks).
    """

    K: int
    v_ids: np.ndarray
    v_ranks: np.ndarray
    w_ids: np.ndarray
    w_input_ranks: np.ndarray
    w_embedded_ranks: np.ndarray
    u_ids: np.ndarray
    u_ranks: np.ndarray


def neighbor_sets(input_nl: NeighborList, embedded_nl: NeighborList,
                  i: int) -> NeighborSets:
    """Split instance i's neighbours into missing / retained / intruding."""
    if input_nl.ids.shape != embedded_nl.ids.shape:
        raise ValueError(f"neighbour lists disagree: {input_nl.ids.shape} "
                         f"vs {embedded_nl.ids.shape}")
    K = input_nl.K
    inp = input_nl.ids[i]
    emb = embedded_nl.ids[i]
    emb_rank = {int(j): r + 1 for r, j in enumerate(emb)}
    v_ids, v_ranks = [], []
    w_ids, w_r, w_rhat = [], [], []
    for r0, j in enumerate(inp):
        j = int(j)
        r = r0 + 1
        rhat = emb_rank.get(j)
        if rhat is None:
            v_ids.append(j)
            v_ranks.append(r)
        else:
            w_ids.append(j)
            w_r.append(r)
            w_rhat.append(rhat)
    in_input = set(int(j) for j in inp)
    u_ids, u_ranks = [], []
    for r0, j in enumerate(emb):
        j = int(j)
        if j not in in_input:
            u_ids.append(j)
            u_ranks.append(r0 + 1)
    return NeighborSets(
        K,
        np.asarray(v_ids, dtype=np.int64), np.asarray(v_ranks, dtype=np.int64),
        np.asarray(w_ids, dtype=np.int64), np.asarray(w_r, dtype=np.int64),
        np.asarray(w_rhat, dtype=np.int64),
        np.asarray(u_ids, dtype=np.int64), np.asarray(u_ranks, dtype=np.int64),
    )


def deviation(r: int, r_hat: int, K: int) -> float:
    """Normalised rank displacement of a retained neighbour, in [0, 1]."""
    if not 1 <= r <= K:
        raise ValueError(f"input rank {r} out of [1, {K}]")
    if not 1 <= r_hat <= K:
        raise ValueError(f"embedded rank {r_hat} out of [1, {K}]")
    return abs(r - r_hat) / max(r, K - r)


def cost(sets: NeighborSets) -> float:
    """Missing-neighbour count plus mean deviation of retained neighbours."""
    total = float(len(sets.v_ids))
    if len(sets.w_ids) > 0:
        devs = [deviation(int(r), int(rh), sets.K)
                for r, rh in zip(sets.w_input_ranks, sets.w_embedded_ranks)]
        total += sum(devs) / len(devs)
    return total


def cost_weighted(sets: NeighborSets, K: int) -> float:
    """Cost with each neighbour weighted by (K - input_rank) / K."""
    total = 0.0
    for r in sets.v_ranks:
        total += (K - int(r)) / K
    if len(sets.w_ids) > 0:
        acc = 0.0
        for r, rh in zip(sets.w_input_ranks, sets.w_embedded_ranks):
            acc += (K - int(r)) / K * deviation(int(r), int(rh), K)
        total += acc / len(sets.w_ids)
    return total


# ---------------------------------------------------------------------------
# flat reduction over all instances

@jit_kernel
def _weighted_cost_total_loop(input_ids, embedded_ids, K):
    n = input_ids.shape[0]
    total = 0.0
    for i in range(n):
        v_sum = 0.0
        w_sum = 0.0
        w_count = 0
        for p in range(K):
            j = input_ids[i, p]
            r = p + 1
            rhat = 0
            for q in range(K):
                if embedded_ids[i, q] == j:
                    rhat = q + 1
                    break
            weight = (K - r) / K
            if rhat == 0:
                v_sum += weight
            else:
                dev = abs(r - rhat) / max(r, K - r)
                w_sum += weight * dev
                w_count += 1
        cost_i = v_sum
        if w_count > 0:
            cost_i += w_sum / w_count
        total += cost_i
    return total / n


def _weighted_cost_total_numpy(input_ids, embedded_ids, K):
    n = input_ids.shape[0]
    match = input_ids[:, :, None] == embedded_ids[:, None, :]
    rhat = (match * np.arange(1, K + 1)[None, None, :]).sum(axis=2)
    r = np.arange(1, K + 1)[None, :]
    weight = (K - r) / K
    missing = rhat == 0
    v_term = (weight * missing).sum(axis=1)
    dev = np.abs(r - rhat) / np.maximum(r, K - r)
    w_count = (~missing).sum(axis=1)
    w_sum = (weight * dev * ~missing).sum(axis=1)
    w_term = np.where(w_count > 0, w_sum / np.maximum(w_count, 1), 0.0)
    return float((v_term + w_term).sum() / n)


def weighted_cost_total(input_ids: np.ndarray, embedded_ids: np.ndarray,
                        K: int) -> float:
    """Mean weighted cost over all instances (the Individual fitness)."""
    if input_ids.shape != embedded_ids.shape:
        raise ValueError(f"neighbour lists disagree: {input_ids.shape} "
                         f"vs {embedded_ids.shape}")
    if USE_NUMBA:
        return float(_weighted_cost_total_loop(input_ids, embedded_ids, K))
    return _weighted_cost_total_numpy(input_ids, embedded_ids, K)


def fitness(ind: Individual, dataset: Dataset, input_nl: NeighborList,
            index_params: HnswParams, K: int) -> float:
    """Mean weighted cost of the individual's embedding (approximate path).

    Builds a fresh navigable-small-world index on this individual's
    embedding; indexes are never reused across individuals.
    """
    if not dataset.scaled:
        raise ValueError("dataset must be scaled before fitness evaluation")
    if input_nl.K != K:
        raise ValueError(f"input neighbour list has K={input_nl.K}, expected {K}")
    emb = eval_individual(ind, dataset)
    index = build_hnsw(emb, index_params)
    embedded_nl = approx_neighbor_list(index, emb, K, index_params.ef_search)
    return weighted_cost_total(input_nl.ids, embedded_nl.ids, K)


def fitness_exact(ind: Individual, dataset: Dataset, input_nl: NeighborList,
                  K: int) -> float:
    """As ``fitness`` but ranking the embedding by brute force (oracle path)."""
    if not dataset.scaled:
        raise ValueError("dataset must be scaled before fitness evaluation")
    if input_nl.K != K:
        raise ValueError(f"input neighbour list has K={input_nl.K}, expected {K}")
    emb = eval_individual(ind, dataset)
    embedded_nl = exact_neighbor_list(emb, K)
    return weighted_cost_total(input_nl.ids, embedded_nl.ids, K)
