"""
Genetic algorithm baseline for the binary layout problem.

Bitstring individuals, tournament selection, uniform crossover, bit-flip
mutation and elitism. Infeasible individuals get a death penalty (fitness
-inf) and are never evaluated. The population is seeded with random feasible
layouts.
"""

import logging
import math
import time

import numpy as np
from tqdm import tqdm

from src.solvers.problem import LayoutProblem
from src.solvers.results import GaSettings, IterationRecord, SolveResult, Termination

logger = logging.getLogger(__name__)


def feasible_mask(population: np.ndarray, problem: LayoutProblem) -> np.ndarray:
    """Row-wise binary feasibility of a (P, N) 0/1 population"""
    constraints = problem.constraints
    counts = population.sum(axis=1)
    crowding = np.einsum("pj,pj->p", population, (constraints.adjacency @ population.T).T)
    return (counts >= constraints.n_min) & (counts <= constraints.n_max) & (crowding == 0)


def random_feasible_layout(rng: np.random.Generator, problem: LayoutProblem, adjacency: np.ndarray) -> np.ndarray:
    """Random sequential placement of a uniformly drawn turbine count, respecting spacing"""
    constraints = problem.constraints
    target = int(rng.integers(constraints.n_min, constraints.n_max + 1))
    layout = np.zeros(problem.n_sites)
    blocked = np.zeros(problem.n_sites, dtype=bool)
    placed = 0
    for site in rng.permutation(problem.n_sites):
        if placed >= target:
            break
        if blocked[site]:
            continue
        layout[site] = 1.0
        blocked |= adjacency[site]
        placed += 1
    return layout


def _evaluate(population: np.ndarray, problem: LayoutProblem):
    fitness = np.full(population.shape[0], -np.inf)
    feasible = feasible_mask(population, problem)
    if np.any(feasible):
        fitness[feasible] = problem.binary_aep_batch(population[feasible])
    return fitness, int(feasible.sum())


def _tournament(rng: np.random.Generator, fitness: np.ndarray, n_winners: int, size: int) -> np.ndarray:
    entrants = rng.integers(0, fitness.size, size=(n_winners, size))
    # argmax picks the first entrant on ties
    return entrants[np.arange(n_winners), np.argmax(fitness[entrants], axis=1)]


def ga_solve(problem: LayoutProblem, settings: GaSettings, progress: bool = False) -> SolveResult:
    start = time.perf_counter()
    rng = np.random.default_rng(settings.seed)
    n = problem.n_sites
    pop_size = settings.population_size
    mutation_rate = settings.mutation_rate if settings.mutation_rate is not None else 1.0 / n
    adjacency = problem.constraints.adjacency.toarray().astype(bool)

    population = np.array([random_feasible_layout(rng, problem, adjacency) for _ in range(pop_size)])
    fitness, evaluations = _evaluate(population, problem)

    history = []
    best_value = -np.inf
    best_layout = None
    stall = 0
    termination = Termination.MAX_GENERATIONS
    generation = 0

    bar = tqdm(range(1, settings.max_generations + 1), desc="GA", disable=not progress)
    for generation in bar:
        order = np.argsort(-fitness, kind="stable")
        gen_best = fitness[order[0]]
        previous = best_value
        if gen_best > best_value:
            best_value = gen_best
            best_layout = population[order[0]].copy()

        history.append(IterationRecord(iteration=generation, q=math.nan,
                                       aep_gwh=float(best_value) if np.isfinite(best_value) else math.nan,
                                       max_violation=0.0 if np.isfinite(best_value) else math.inf,
                                       step_norm=math.nan))
        logger.debug(f"GA generation {generation}: best {best_value:.4f} GWh, "
                     f"{int(np.isfinite(fitness).sum())}/{pop_size} feasible")
        bar.set_postfix(best=f"{best_value:.3f}")

        if np.isfinite(previous) and best_value - previous <= settings.function_tolerance * max(1.0, abs(previous)):
            stall += 1
        else:
            stall = 0
        if stall >= settings.stall_generations:
            termination = Termination.STALL
            break
        if generation == settings.max_generations:
            break

        n_offspring = pop_size - settings.elite_count
        parents_a = _tournament(rng, fitness, n_offspring, settings.tournament_size)
        parents_b = _tournament(rng, fitness, n_offspring, settings.tournament_size)
        cross = rng.random(n_offspring) < settings.crossover_rate
        genes_from_b = (rng.random((n_offspring, n)) < 0.5) & cross[:, None]
        offspring = np.where(genes_from_b, population[parents_b], population[parents_a])
        flips = rng.random((n_offspring, n)) < mutation_rate
        offspring = np.where(flips, 1.0 - offspring, offspring)

        offspring_fitness, offspring_evaluations = _evaluate(offspring, problem)
        evaluations += offspring_evaluations
        elites = order[:settings.elite_count]
        population = np.vstack([population[elites], offspring])
        fitness = np.concatenate([fitness[elites], offspring_fitness])

    elapsed = time.perf_counter() - start

    if best_layout is None:
        logger.warning("❌ GA found no feasible layout")
        return SolveResult(
            solver="ga", rho=np.zeros(n), selected=np.zeros(n, dtype=int), aep_gwh=math.nan,
            iterations=generation, evaluations=evaluations, termination=Termination.INFEASIBLE,
            wall_seconds=elapsed, feasible=False, history=history,
        )

    logger.info(f"GA finished ({termination}) after {generation} generations: "
                f"{int(best_layout.sum())} turbines, AEP {best_value:.3f} GWh")
    return SolveResult(
        solver="ga",
        rho=best_layout.copy(),
        selected=best_layout.astype(int),
        aep_gwh=float(best_value),
        iterations=generation,
        evaluations=evaluations,
        termination=termination,
        wall_seconds=elapsed,
        feasible=True,
        history=history,
    )
