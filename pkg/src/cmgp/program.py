"""Genome encoding and stochastic execution of postfix programs.

A genome is a short vector of real genes. Each gene is cast to a token with a
noisy floor: negative bins select an operator, non-negative bins push a
literal whose sign is drawn at run time. Programs run on a stack that starts
out holding the observed state repeated many times, and their output is the
top of the stack averaged over several stochastic decodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import kernels
from .operators import NUM_OPERATORS, OPERATORS, apply_operator

STACK_REPEATS = 20
NUM_SAMPLES = 10
LITERAL_MAX = 10.0
GENE_LOW = -float(NUM_OPERATORS)  # exclusive
GENE_HIGH = LITERAL_MAX  # inclusive
INVALID_FITNESS = -1e6


class InvalidProgramError(Exception):
    """Raised when a program underflows its stack."""


@dataclass(frozen=True)
class Literal:
    magnitude: float

    def __str__(self) -> str:
        return f"±{self.magnitude!r}"


@dataclass(frozen=True)
class Op:
    index: int

    def __str__(self) -> str:
        return OPERATORS[self.index].name


Token = Union[Literal, Op]


def decode_gene(g: float, offset: float = 0.0) -> Token:
    """Cast gene ``g`` to a token given a cast offset in [-0.5, 0.5).

    An offset of 0 gives the most likely token, which is what listings use.
    """
    code = math.floor(g + offset)
    if code >= 0:
        return Literal(abs(g))
    return Op(min(-code - 1, NUM_OPERATORS - 1))


def sample_token(g: float, rng: np.random.Generator) -> Token:
    return decode_gene(g, rng.random() - 0.5)


def deterministic_tokens(genome: Sequence[float]) -> list[Token]:
    return [decode_gene(float(g)) for g in genome]


def gene_for(token: Token) -> float:
    """Gene value that always decodes to ``token`` (bin centre for operators)."""
    if isinstance(token, Literal):
        return float(token.magnitude)
    return -token.index - 0.5


def encode(tokens: Sequence[Token]) -> np.ndarray:
    return np.array([gene_for(t) for t in tokens], dtype=np.float64)


def prefilled_stack(state: Sequence[float]) -> list[float]:
    """Initial stack: the state vector pushed ``STACK_REPEATS`` times, x[0] first."""
    return [float(x) for x in state] * STACK_REPEATS


def execute_tokens(tokens: Sequence[Token], state: Sequence[float], signs: Sequence[float]) -> float:
    """Run a decoded program once. ``signs[i]`` is the sign used if token i is a literal."""
    stack = prefilled_stack(state)
    for token, sign in zip(tokens, signs):
        if isinstance(token, Literal):
            stack.append(sign * token.magnitude)
            continue
        arity = OPERATORS[token.index].arity
        if len(stack) < arity:
            raise InvalidProgramError(f"stack underflow at {OPERATORS[token.index].name}")
        operands = [stack.pop() for _ in range(arity)]
        stack.append(apply_operator(token.index, operands))
    if not stack:
        raise InvalidProgramError("empty stack at end of program")
    return stack[-1]


def execute_once(genome: Sequence[float], state: Sequence[float], rng: np.random.Generator) -> float:
    """One stochastic execution: sample every token and literal sign, then run."""
    n = len(genome)
    offsets = rng.random(n) - 0.5
    signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    tokens = [decode_gene(float(g), float(u)) for g, u in zip(genome, offsets)]
    return execute_tokens(tokens, state, signs)


def draw_noise(rng: np.random.Generator, n_pop: int, n_states: int, n_samples: int, n_genes: int):
    """Cast offsets and literal sign flips for a batched run."""
    shape = (n_pop, n_states, n_samples, n_genes)
    offsets = rng.random(shape) - 0.5
    negate = rng.random(shape) < 0.5
    return offsets, negate


def evaluate_population(genomes, states, rng: np.random.Generator, n_samples: int = NUM_SAMPLES, backend=None):
    """Average output of each genome on each state.

    Returns ``(means, invalid)`` with shapes (P, N) and (P,); rows flagged
    invalid hold zeros.
    """
    genomes = np.atleast_2d(np.asarray(genomes, dtype=np.float64))
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    offsets, negate = draw_noise(rng, genomes.shape[0], states.shape[0], n_samples, genomes.shape[1])
    means, invalid = kernels.run_population(genomes, states, offsets, negate, backend=backend)
    return means, invalid.astype(bool)


def evaluate(genome, state, rng: np.random.Generator, n_samples: int = NUM_SAMPLES) -> float:
    """Mean of ``n_samples`` stochastic executions of one genome on one state.

    The value is not clipped to the action range; see ``policy_action``.
    """
    means, invalid = evaluate_population([genome], [state], rng, n_samples)
    if invalid[0]:
        raise InvalidProgramError("stack underflow")
    return float(means[0, 0])


def policy_action(genomes, state, rng: np.random.Generator, low=-1.0, high=1.0, n_samples: int = NUM_SAMPLES) -> np.ndarray:
    """One program per action dimension, evaluated and clipped to the action box."""
    action = np.array([evaluate(g, state, rng, n_samples) for g in genomes])
    return np.clip(action, low, high)


def random_genomes(rng: np.random.Generator, n: int, num_genes: int) -> np.ndarray:
    """Genes i.i.d. uniform on the half-open gene space ]GENE_LOW, GENE_HIGH]."""
    return GENE_HIGH - rng.random((n, num_genes)) * (GENE_HIGH - GENE_LOW)


def clamp_genes(genes: np.ndarray) -> np.ndarray:
    return np.clip(genes, np.nextafter(GENE_LOW, 0.0), GENE_HIGH)
