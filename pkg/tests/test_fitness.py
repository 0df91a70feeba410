import numpy as np
import pytest

import oracles
from gpmal.dataset import Dataset, scale_min_max
from gpmal.fitness import (NeighborSets, _weighted_cost_total_loop,
                           _weighted_cost_total_numpy, cost, cost_weighted,
                           deviation, fitness, fitness_exact, neighbor_sets,
                           weighted_cost_total)
from gpmal.neighbors import (HnswParams, NeighborList, default_hnsw_params,
                             exact_neighbor_list)
from gpmal.trees import Individual, const, feature, func, random_tree


def nl(rows):
    return NeighborList(np.asarray(rows, dtype=np.int32))


# --- neighbour set construction ---

def test_sets_identity():
    lists = nl([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    s = neighbor_sets(lists, lists, 0)
    assert len(s.v_ids) == 0
    assert len(s.u_ids) == 0
    assert len(s.w_ids) == 3
    assert np.array_equal(s.w_input_ranks, s.w_embedded_ranks)


def test_sets_disjoint():
    a = nl([[1, 2], [0, 2], [0, 1], [0, 1], [0, 1], [0, 1]])
    b = nl([[3, 4], [3, 4], [3, 4], [4, 5], [3, 5], [3, 4]])
    s = neighbor_sets(a, b, 0)
    assert len(s.v_ids) == 2
    assert len(s.w_ids) == 0
    assert len(s.u_ids) == 2


def test_sets_hand_example():
    # input [a,b,c] = [1,2,3]; embedded [b,d,a] = [2,4,1]; K = 3
    inp = nl([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2], [0, 1, 2]])
    emb = nl([[2, 4, 1], [0, 2, 3], [0, 1, 3], [0, 1, 2], [0, 1, 2]])
    s = neighbor_sets(inp, emb, 0)
    assert s.v_ids.tolist() == [3] and s.v_ranks.tolist() == [3]
    assert s.w_ids.tolist() == [1, 2]
    assert s.w_input_ranks.tolist() == [1, 2]
    assert s.w_embedded_ranks.tolist() == [3, 1]
    assert s.u_ids.tolist() == [4] and s.u_ranks.tolist() == [2]
    # set size identities
    assert len(s.v_ids) + len(s.w_ids) == 3
    assert len(s.u_ids) + len(s.w_ids) == 3


def test_sets_shape_mismatch():
    a = nl([[1, 2], [0, 2], [0, 1]])
    b = nl([[1], [0], [0]])
    with pytest.raises(ValueError):
        neighbor_sets(a, b, 0)


# --- deviation ---

def test_deviation_zero_when_rank_kept():
    for K in (1, 5, 30):
        for r in range(1, K + 1):
            assert deviation(r, r, K) == 0.0


def test_deviation_hand_values():
    assert abs(deviation(3, 7, 30) - 4 / 27) < 1e-15
    assert deviation(1, 10, 10) == 1.0  # maximal: opposite position
    assert deviation(10, 1, 10) == 9 / 10  # denominator is max(r, K-r)


def test_deviation_bounds_random():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        K = int(rng.integers(1, 60))
        r = int(rng.integers(1, K + 1))
        r_hat = int(rng.integers(1, K + 1))
        d = deviation(r, r_hat, K)
        assert 0.0 <= d <= 1.0


def test_deviation_rank_range_errors():
    with pytest.raises(ValueError):
        deviation(0, 1, 5)
    with pytest.raises(ValueError):
        deviation(1, 6, 5)


# --- per-instance costs ---

def make_sets(input_row, embedded_row, K):
    pad_in = [[j for j in range(1, K + 1)]] * 9
    inp = nl([input_row] + pad_in)
    emb = nl([embedded_row] + pad_in)
    return neighbor_sets(inp, emb, 0)


def test_cost_identity_zero():
    s = make_sets([1, 2, 3], [1, 2, 3], 3)
    assert cost(s) == 0.0
    assert cost_weighted(s, 3) == 0.0


def test_cost_all_missing_is_K():
    s = make_sets([1, 2, 3], [4, 5, 6], 3)
    assert cost(s) == 3.0


def test_cost_hand_example():
    # V={c(3)}, W={a(1,3), b(2,1)}: 1 + (1.0 + 0.5)/2
    s = make_sets([1, 2, 3], [2, 4, 1], 3)
    assert abs(cost(s) - 1.75) < 1e-15


def test_cost_weighted_all_missing_closed_form():
    for K in (3, 10, 30):
        row = list(range(1, K + 1))
        other = list(range(K + 1, 2 * K + 1))
        pad = [row] * (2 * K + 2)
        inp = nl([row] + pad)
        emb = nl([other] + pad)
        s = neighbor_sets(inp, emb, 0)
        assert abs(cost_weighted(s, K) - (K - 1) / 2) < 1e-12
    # K=30 fixture
    assert (30 - 1) / 2 == 14.5


def test_cost_weighted_hand_example():
    s = make_sets([1, 2, 3], [2, 4, 1], 3)
    # (3-3)/3 + 1/2 * [ (2/3)*1.0 + (1/3)*0.5 ] = 5/12
    assert abs(cost_weighted(s, 3) - 5 / 12) < 1e-15


def test_cost_bounds_random_cases():
    rng = np.random.default_rng(1)
    for _ in range(500):
        K = int(rng.integers(2, 20))
        pool = list(range(1, 3 * K))
        input_row = list(rng.choice(pool, size=K, replace=False))
        embedded_row = list(rng.choice(pool, size=K, replace=False))
        s = make_sets(input_row, embedded_row, K)
        c = cost(s)
        w = cost_weighted(s, K)
        assert 0.0 <= c <= K
        assert 0.0 <= w <= (K - 1) / 2 + 1e-12


# --- flat reduction vs per-instance composition and the oracle ---

def test_weighted_total_matches_composition_and_oracle():
    rng = np.random.default_rng(2)
    for _ in range(30):
        n = int(rng.integers(6, 25))
        K = int(rng.integers(2, n - 1))
        ids = np.arange(n)
        input_ids = np.empty((n, K), dtype=np.int32)
        embedded_ids = np.empty((n, K), dtype=np.int32)
        for i in range(n):
            others = ids[ids != i]
            input_ids[i] = rng.permutation(others)[:K]
            embedded_ids[i] = rng.permutation(others)[:K]
        inp, emb = NeighborList(input_ids), NeighborList(embedded_ids)
        total = weighted_cost_total(input_ids, embedded_ids, K)
        composed = np.mean([cost_weighted(neighbor_sets(inp, emb, i), K)
                            for i in range(n)])
        oracle = oracles.weighted_cost_mean(input_ids.tolist(),
                                            embedded_ids.tolist(), K)
        assert abs(total - composed) < 1e-12
        assert abs(total - oracle) < 1e-12
        # both kernel implementations agree
        assert abs(_weighted_cost_total_loop(input_ids, embedded_ids, K)
                   - _weighted_cost_total_numpy(input_ids, embedded_ids, K)) < 1e-12


def test_unweighted_cost_oracle_agreement():
    rng = np.random.default_rng(3)
    for _ in range(50):
        K = int(rng.integers(2, 12))
        pool = list(range(1, 40))
        input_row = list(rng.choice(pool, size=K, replace=False))
        embedded_row = list(rng.choice(pool, size=K, replace=False))
        s = make_sets(input_row, embedded_row, K)
        assert abs(cost(s) - oracles.unweighted_cost(input_row, embedded_row, K)) < 1e-12


# --- end-to-end fitness ---

def scaled_dataset(rng, n, m):
    X = rng.random((n, m))
    labels = np.array(["a", "b"] * (n // 2) + ["a"] * (n % 2))
    return scale_min_max(Dataset(X, labels))


def test_identity_mapping_fitness_zero():
    rng = np.random.default_rng(4)
    data = scaled_dataset(rng, 40, 4)
    input_nl = exact_neighbor_list(data.features, 10)
    ident = Individual([feature(i) for i in range(4)])
    params = HnswParams(M=16, ef_construction=200, ef_search=40, seed=0)
    assert fitness(ident, data, input_nl, params, 10) == 0.0
    assert fitness_exact(ident, data, input_nl, 10) == 0.0


def test_constant_trees_strictly_positive():
    rng = np.random.default_rng(5)
    data = scaled_dataset(rng, 30, 3)
    input_nl = exact_neighbor_list(data.features, 5)
    collapsed = Individual([const(0.3), const(-0.2)])
    assert fitness_exact(collapsed, data, input_nl, 5) > 0.0


def test_hnsw_full_beam_matches_exact_fitness():
    rng = np.random.default_rng(6)
    data = scaled_dataset(rng, 40, 5)
    K = 10
    input_nl = exact_neighbor_list(data.features, K)
    for trial in range(20):
        ind = Individual([random_tree(rng, "grow", 2, 5, 5)
                          for _ in range(int(rng.integers(1, 4)))])
        params = HnswParams(M=16, ef_construction=200, ef_search=40,
                            seed=trial)
        f_hnsw = fitness(ind, data, input_nl, params, K)
        f_exact = fitness_exact(ind, data, input_nl, K)
        assert abs(f_hnsw - f_exact) < 1e-12


def test_fitness_exact_similarity_invariance():
    rng = np.random.default_rng(7)
    n, K = 35, 8
    pts = rng.random((n, 3))
    input_nl = exact_neighbor_list(pts, K)
    emb = rng.random((n, 2))
    base = weighted_cost_total(input_nl.ids,
                               exact_neighbor_list(emb, K).ids, K)
    for _ in range(20):
        theta = rng.uniform(0, 2 * np.pi)
        Q = np.array([[np.cos(theta), -np.sin(theta)],
                      [np.sin(theta), np.cos(theta)]])
        s = rng.uniform(0.1, 10.0)
        t = rng.uniform(-5, 5, size=2)
        emb2 = s * (emb @ Q) + t
        transformed = weighted_cost_total(input_nl.ids,
                                          exact_neighbor_list(emb2, K).ids, K)
        assert abs(base - transformed) < 1e-12


def test_fitness_exact_monotone_axis_scaling_invariance():
    rng = np.random.default_rng(8)
    data = scaled_dataset(rng, 30, 3)
    K = 6
    input_nl = exact_neighbor_list(data.features, K)
    ind = Individual([feature(0)])
    doubled = Individual([func("add", feature(0), feature(0))])
    f1 = fitness_exact(ind, data, input_nl, K)
    f2 = fitness_exact(doubled, data, input_nl, K)
    assert abs(f1 - f2) < 1e-12


def test_fitness_requires_scaled_dataset():
    rng = np.random.default_rng(9)
    X = rng.random((20, 3)) * 5
    data = Dataset(X, np.array(["a", "b"] * 10))
    input_nl = exact_neighbor_list(data.features, 5)
    ind = Individual([feature(0)])
    with pytest.raises(ValueError):
        fitness_exact(ind, data, input_nl, 5)


def test_fitness_k_mismatch_rejected():
    rng = np.random.default_rng(10)
    data = scaled_dataset(rng, 20, 3)
    input_nl = exact_neighbor_list(data.features, 5)
    ind = Individual([feature(0)])
    with pytest.raises(ValueError):
        fitness_exact(ind, data, input_nl, 6)
