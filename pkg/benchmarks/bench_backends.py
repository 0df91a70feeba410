#!/usr/bin/env python3
"""Time the hot kernels under the numba backend and the numpy fallback.

Runs itself in two subprocesses (GPMAL_BACKEND=numba / numpy) so each
process compiles and selects its backend cleanly, then prints a small
table.  Usage: python benchmarks/bench_backends.py [n] [dim] [K]
"""

import os
import subprocess
import sys
import time


def measure(n: int, dim: int, K: int) -> None:
    import numpy as np

    from gpmal._backend import active_backend
    from gpmal.fitness import weighted_cost_total
    from gpmal.neighbors import (approx_neighbor_list, build_hnsw,
                                 default_hnsw_params, exact_neighbor_list)

    rng = np.random.default_rng(0)
    pts = rng.random((n, dim))
    params = default_hnsw_params(K, seed=1)

    # warm-up (JIT compilation under numba)
    index = build_hnsw(pts[: min(n, 64)], params)
    approx_neighbor_list(index, pts[: min(n, 64)],
                         min(K, min(n, 64) - 1), params.ef_search)

    t0 = time.perf_counter()
    index = build_hnsw(pts, params)
    t1 = time.perf_counter()
    nl = approx_neighbor_list(index, pts, K, params.ef_search)
    t2 = time.perf_counter()
    exact = exact_neighbor_list(pts, K)
    t3 = time.perf_counter()
    weighted_cost_total(exact.ids, nl.ids, K)
    t4 = time.perf_counter()

    print(f"backend={active_backend():>5}  n={n} dim={dim} K={K}")
    print(f"  graph build      {1000 * (t1 - t0):9.1f} ms "
          f"({index.build_distance_count} dists)")
    print(f"  batch query      {1000 * (t2 - t1):9.1f} ms "
          f"({index.query_distance_count} dists)")
    print(f"  exact ranking    {1000 * (t3 - t2):9.1f} ms")
    print(f"  rank-cost total  {1000 * (t4 - t3):9.1f} ms")


def main() -> int:
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    dim = int(sys.argv[2]) if len(sys.argv) > 2 else 8
    K = int(sys.argv[3]) if len(sys.argv) > 3 else 30
    if os.environ.get("GPMAL_BENCH_CHILD"):
        measure(n, dim, K)
        return 0
    for backend in ("numba", "numpy"):
        env = dict(os.environ, GPMAL_BACKEND=backend, GPMAL_BENCH_CHILD="1")
        subprocess.run([sys.executable, __file__, str(n), str(dim), str(K)],
                       env=env, check=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
