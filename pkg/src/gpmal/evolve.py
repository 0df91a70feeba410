"""Generational evolution: init, tournament selection, variation, elitism.

Fitness is evaluated once per individual and cached (elite copies carry
their cache), with the embedded-space index seed derived from
(run seed, generation, slot) so a cached value can never be contradicted
by a re-evaluation.  Within a generation evaluations are independent;
set GPMAL_THREADS>1 to run them on a thread pool (results are identical
regardless of schedule).
"""

from __future__ import annotations

import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .dataset import Dataset
from .fitness import fitness, fitness_exact
from .neighbors import HnswParams, default_hnsw_params, exact_neighbor_list
from .trees import (Individual, crossover_all_pairs, eval_individual,
                    mutate_single_tree, random_tree)


@dataclass(frozen=True)
class EvolutionConfig:
    d: int
    population_size: int = 100
    generations: int = 1000
    crossover_rate: float = 0.80
    mutation_rate: float = 0.20
    elitism_count: int = 10
    K: int = 30
    min_depth: int = 2
    max_depth: int = 14
    init_depth_min: int = 2
    init_depth_max: int = 6
    tournament_size: int = 7
    seed: int = 0
    hnsw: HnswParams | None = None
    exact_fitness: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if abs(self.crossover_rate + self.mutation_rate - 1.0) > 1e-12:
            raise ValueError("crossover_rate + mutation_rate must equal 1.0")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError("elitism_count must be in [0, population_size)")
        if not 2 <= self.min_depth <= self.max_depth:
            raise ValueError("need 2 <= min_depth <= max_depth")
        if not (self.min_depth <= self.init_depth_min <= self.init_depth_max
                <= self.max_depth):
            raise ValueError("initial depth ramp must fit inside the depth bounds")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def hnsw_params(self) -> HnswParams:
        return self.hnsw if self.hnsw is not None else evolve_hnsw_params(self.K)


def evolve_hnsw_params(K: int, ef_search: int | None = None) -> HnswParams:
    """Index parameters for the evolutionary loop.

    Leaner construction beam than the stand-alone index default: the loop
    rebuilds an index per evaluation and recall at these K/ef levels is
    unaffected (see benchmarks).
    """
    params = replace(default_hnsw_params(K), ef_construction=80)
    if ef_search is not None:
        params = replace(params, ef_search=ef_search)
    return params


@dataclass
class RunResult:
    best: Individual
    best_fitness: float
    history: list[tuple[float, float]]
    embedding: np.ndarray
    config_echo: dict
    seed: int


def initialize_population(config: EvolutionConfig, m: int, rng) -> list[Individual]:
    """Ramped half-and-half: per tree, random target depth and grow/full."""
    population = []
    for _ in range(config.population_size):
        trees = []
        for _ in range(config.d):
            target = int(rng.integers(config.init_depth_min, config.init_depth_max + 1))
            method = "full" if rng.random() < 0.5 else "grow"
            trees.append(random_tree(rng, method, config.min_depth, target, m))
        population.append(Individual(trees))
    return population


def tournament_select(population, fitnesses, rng, tournament_size: int) -> Individual:
    """Minimum-fitness member of ``tournament_size`` draws with replacement.

    Ties go to the earliest-sampled candidate.
    """
    if not population:
        raise ValueError("empty population")
    best = None
    best_fit = np.inf
    for _ in range(tournament_size):
        i = int(rng.integers(0, len(population)))
        if fitnesses[i] < best_fit:
            best_fit = fitnesses[i]
            best = population[i]
    return best


def _worker_count() -> int:
    raw = os.environ.get("GPMAL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _hnsw_seed(run_seed: int, generation: int, index: int) -> int:
    return int(np.random.SeedSequence((run_seed, generation, index))
               .generate_state(1)[0])


def evolve(config: EvolutionConfig, dataset: Dataset,
           progress=None) -> RunResult:
    """Run the full generational loop and return the best-ever individual.

    ``progress`` defaults to a per-generation line on stderr:
    ``gen,best_fitness,mean_fitness,elapsed_ms``.
    """
    if not dataset.scaled:
        raise ValueError("dataset must be scaled before evolving")
    n, m = dataset.features.shape
    if config.K > n - 1:
        raise ValueError(f"K={config.K} needs at least {config.K + 1} instances, "
                         f"dataset has {n}")
    if progress is None:
        progress = lambda line: print(line, file=sys.stderr)

    base_hnsw = config.hnsw_params()
    input_nl = exact_neighbor_list(dataset.features, config.K)
    rng = np.random.default_rng(config.seed)
    workers = _worker_count()
    t0 = time.perf_counter()

    def evaluate(pop: list[Individual], generation: int):
        todo = [(slot, ind) for slot, ind in enumerate(pop)
                if ind.cached_fitness is None]

        def run_one(item):
            slot, ind = item
            if config.exact_fitness:
                ind.cached_fitness = fitness_exact(ind, dataset, input_nl, config.K)
            else:
                params = replace(base_hnsw,
                                 seed=_hnsw_seed(config.seed, generation, slot))
                ind.cached_fitness = fitness(ind, dataset, input_nl, params,
                                             config.K)

        if workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(run_one, todo))
        else:
            for item in todo:
                run_one(item)

    population = initialize_population(config, m, rng)
    history: list[tuple[float, float]] = []
    best_ever: Individual | None = None
    best_ever_fit = np.inf

    for generation in range(config.generations + 1):
        if generation > 0:
            fits = [ind.cached_fitness for ind in population]
            order = sorted(range(len(population)), key=lambda i: (fits[i], i))
            offspring = [population[i].copy()
                         for i in order[:config.elitism_count]]
            while len(offspring) < config.population_size:
                if rng.random() < config.crossover_rate:
                    p1 = tournament_select(population, fits, rng,
                                           config.tournament_size)
                    p2 = tournament_select(population, fits, rng,
                                           config.tournament_size)
                    c1, c2 = crossover_all_pairs(p1, p2, rng, config.min_depth,
                                                 config.max_depth)
                    offspring.append(c1)
                    if len(offspring) < config.population_size:
                        offspring.append(c2)
                else:
                    parent = tournament_select(population, fits, rng,
                                               config.tournament_size)
                    offspring.append(mutate_single_tree(parent, rng, m,
                                                        config.min_depth,
                                                        config.max_depth))
            population = offspring

        evaluate(population, generation)
        fits = [ind.cached_fitness for ind in population]
        gen_best = min(fits)
        gen_mean = float(np.mean(fits))
        history.append((gen_best, gen_mean))
        if gen_best < best_ever_fit:
            best_ever_fit = gen_best
            best_ever = population[fits.index(gen_best)].copy()
        elapsed_ms = int((time.perf_counter() - t0) * 1000)
        progress(f"{generation},{gen_best},{gen_mean},{elapsed_ms}")

    return RunResult(
        best=best_ever,
        best_fitness=best_ever_fit,
        history=history,
        embedding=eval_individual(best_ever, dataset),
        config_echo=asdict(replace(config, hnsw=base_hnsw)),
        seed=config.seed,
    )
