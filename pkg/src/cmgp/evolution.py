"""Steady-state genetic algorithm over fixed-length genomes.

Selection keeps the best ``num_parents_mating`` individuals unchanged (they
are also the elites); the rest of the next generation is made of single-point
crossovers of consecutive parent pairs followed by additive random mutation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .expression import count_state_variables, to_expression
from .program import (
    INVALID_FITNESS,
    InvalidProgramError,
    NUM_SAMPLES,
    clamp_genes,
    evaluate_population,
    random_genomes,
)

FitnessFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class EvolutionConfig:
    num_genes: int = 5
    num_individuals: int = 50
    num_generations: int = 20
    num_parents_mating: int = 20
    mutation_probability: float = 0.1
    mutation_min: float = -10.0
    mutation_max: float = 10.0

    def __post_init__(self):
        for name in ("num_genes", "num_individuals", "num_generations", "num_parents_mating"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.num_parents_mating > self.num_individuals:
            raise ValueError("num_parents_mating cannot exceed num_individuals")
        if not 0.0 <= self.mutation_probability <= 1.0:
            raise ValueError("mutation_probability must lie in [0, 1]")
        if self.mutation_min > self.mutation_max:
            raise ValueError("mutation_min must not exceed mutation_max")


@dataclass
class Population:
    genomes: np.ndarray
    fitness: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.genomes)

    def best(self) -> np.ndarray:
        if self.fitness is None:
            raise ValueError("population has not been evaluated")
        return self.genomes[int(np.argmax(self.fitness))].copy()


@dataclass
class EvolveResult:
    population: Population
    best: np.ndarray
    best_fitness: float
    trace: list[float] = field(default_factory=list)  # best fitness after each generation, index 0 = initial


def init_population(config: EvolutionConfig, rng: np.random.Generator) -> Population:
    return Population(random_genomes(rng, config.num_individuals, config.num_genes))


# -- fitness -------------------------------------------------------------------

def state_usage(genomes: np.ndarray, state_dim: int) -> np.ndarray:
    """Fraction of state dimensions each genome reads (its most likely decode)."""
    out = np.zeros(len(genomes))
    for i, g in enumerate(genomes):
        try:
            out[i] = count_state_variables(to_expression(g, state_dim)) / state_dim
        except InvalidProgramError:
            out[i] = np.nan
    return out


def population_fitness(genomes, states, targets, rng: np.random.Generator, n_samples: int = NUM_SAMPLES) -> np.ndarray:
    """``(1 - mse) * usage`` for every genome; invalid programs get ``INVALID_FITNESS``.

    ``targets`` holds one improved action per state for the action dimension
    these genomes control. Program outputs are compared unclipped.
    """
    genomes = np.atleast_2d(genomes)
    states = np.atleast_2d(states)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if len(states) != len(targets):
        raise ValueError("states and targets must have the same batch length")
    means, invalid = evaluate_population(genomes, states, rng, n_samples)
    mse = np.mean((means - targets[None, :]) ** 2, axis=1)
    usage = state_usage(genomes, states.shape[1])
    fitness = (1.0 - mse) * usage
    bad = invalid | np.isnan(usage) | ~np.isfinite(fitness)
    fitness[bad] = INVALID_FITNESS
    return fitness


def fitness(genome, states, targets, rng: np.random.Generator, n_samples: int = NUM_SAMPLES) -> float:
    return float(population_fitness([genome], states, targets, rng, n_samples)[0])


def critic_fitness_fn(states, targets, rng: np.random.Generator, n_samples: int = NUM_SAMPLES) -> FitnessFn:
    """Fitness against fixed improved actions; never touches an environment."""
    def fn(genomes: np.ndarray) -> np.ndarray:
        return population_fitness(genomes, states, targets, rng, n_samples)
    return fn


# -- operators -------------------------------------------------------------------

def sss_select(fitness: np.ndarray, num_parents: int) -> np.ndarray:
    """Indices of the ``num_parents`` fittest individuals, ties to the lower index."""
    order = np.argsort(-np.asarray(fitness), kind="stable")
    return order[:num_parents]


def single_point_crossover(parent_a, parent_b, rng: np.random.Generator, point: int | None = None) -> np.ndarray:
    parent_a = np.asarray(parent_a)
    parent_b = np.asarray(parent_b)
    if parent_a.shape != parent_b.shape:
        raise ValueError("parents must have the same length")
    n = len(parent_a)
    if point is None:
        point = int(rng.integers(1, n)) if n > 1 else 0
    return np.concatenate([parent_a[:point], parent_b[point:]])


def random_mutation(genome, rng: np.random.Generator, config: EvolutionConfig) -> np.ndarray:
    genome = np.array(genome, dtype=np.float64)
    mask = rng.random(genome.shape) < config.mutation_probability
    deltas = rng.uniform(config.mutation_min, config.mutation_max, genome.shape)
    genome[mask] += deltas[mask]
    return clamp_genes(genome)


def make_offspring(parents: np.ndarray, n: int, config: EvolutionConfig, rng: np.random.Generator) -> np.ndarray:
    k = len(parents)
    children = np.empty((n, parents.shape[1]))
    for i in range(n):
        child = single_point_crossover(parents[i % k], parents[(i + 1) % k], rng)
        children[i] = random_mutation(child, rng, config)
    return children


def evolve(
    population: Population,
    fitness_fn: FitnessFn,
    config: EvolutionConfig,
    rng: np.random.Generator,
    should_stop: Callable[[], bool] | None = None,
) -> EvolveResult:
    """Run ``config.num_generations`` generations against one fitness context.

    The whole population is re-scored first (the context is new); afterwards
    elites keep their score, so the best fitness never decreases. ``should_stop``
    is polled between generations.
    """
    genomes = np.array(population.genomes, dtype=np.float64)
    scores = np.asarray(fitness_fn(genomes), dtype=np.float64)
    trace = [float(scores.max())]
    n_children = config.num_individuals - config.num_parents_mating

    for _ in range(config.num_generations):
        if should_stop is not None and should_stop():
            break
        chosen = sss_select(scores, config.num_parents_mating)
        parents, parent_scores = genomes[chosen], scores[chosen]
        if n_children > 0:
            children = make_offspring(parents, n_children, config, rng)
            child_scores = np.asarray(fitness_fn(children), dtype=np.float64)
            genomes = np.vstack([parents, children])
            scores = np.concatenate([parent_scores, child_scores])
        else:
            genomes, scores = parents, parent_scores
        trace.append(float(scores.max()))

    best = int(np.argmax(scores))
    return EvolveResult(Population(genomes, scores), genomes[best].copy(), float(scores[best]), trace)

