"""Vectorised numpy implementation of the batched program interpreter.

Used when the compiled extension is unavailable. All (state, sample) pairs of
one genome run in lock-step: at each gene the stochastic cast can only land in
two adjacent bins, so every step is at most two masked numpy operations.
"""
from __future__ import annotations

import numpy as np

from .operators import ARITIES, DBL_MAX, EXP_CLAMP, NUM_OPERATORS, RECIPROCAL_DEFAULT, RECIPROCAL_EPS

STACK_REPEATS = 20


def _reciprocal(a):
    out = np.full_like(a, RECIPROCAL_DEFAULT)
    big = np.abs(a) > RECIPROCAL_EPS
    np.divide(1.0, a, out=out, where=big)
    return out


def _exp(a):
    return np.exp(np.minimum(a, EXP_CLAMP))


def _sqrt(a):
    return np.sqrt(np.maximum(a, 0.0))


def _sat(a):
    return np.clip(a, -DBL_MAX, DBL_MAX)


_VECTOR_OPS = (
    np.abs,
    lambda a: -np.abs(a),
    np.sin,
    lambda a: -np.sin(a),
    np.cos,
    lambda a: -np.cos(a),
    _exp,
    lambda a: -_exp(a),
    _sqrt,
    lambda a: -_sqrt(a),
    np.negative,
    lambda a, b: _sat(a + b),
    lambda a, b: _sat(a * b),
    lambda t, a, b: np.where(t > 0.0, a, b),
    np.maximum,
    np.minimum,
    lambda a: a.copy(),
    _reciprocal,
    np.trunc,
)
assert len(_VECTOR_OPS) == NUM_OPERATORS


def run_population(genomes, states, offsets, negate):
    """Run every genome on every state for every noise sample.

    ``offsets[p, n, s, g]`` is the uniform cast offset in [-0.5, 0.5) for gene
    ``g`` and ``negate[p, n, s, g]`` flips a literal's sign. Returns the
    per-state mean over samples, shape (P, N), and an invalid flag per genome.
    """
    genomes = np.ascontiguousarray(genomes, dtype=np.float64)
    states = np.ascontiguousarray(states, dtype=np.float64)
    n_pop, n_genes = genomes.shape
    n_states, state_dim = states.shape
    n_samples = offsets.shape[2]
    m = n_states * n_samples
    depth = STACK_REPEATS * state_dim
    cap = depth + n_genes

    means = np.zeros((n_pop, n_states))
    invalid = np.zeros(n_pop, dtype=np.uint8)
    cols = np.arange(m)
    prefill = np.repeat(np.tile(states, (1, STACK_REPEATS)), n_samples, axis=0).T

    for p in range(n_pop):
        stack = np.empty((cap, m))
        stack[:depth] = prefill
        sp = np.full(m, depth, dtype=np.int64)
        off = offsets[p].reshape(m, n_genes)
        neg = negate[p].reshape(m, n_genes)
        bad = False
        for j in range(n_genes):
            g = genomes[p, j]
            o = np.floor(g + off[:, j]).astype(np.int64)
            for code in np.unique(o):
                idx = cols[o == code]
                top = sp[idx]
                if code >= 0:
                    stack[top, idx] = np.where(neg[idx, j], -abs(g), abs(g))
                    sp[idx] = top + 1
                    continue
                op = min(-code - 1, NUM_OPERATORS - 1)
                arity = ARITIES[op]
                if top.min() < arity:
                    bad = True
                    break
                args = [stack[top - 1 - k, idx] for k in range(arity)]
                stack[top - arity, idx] = _VECTOR_OPS[op](*args)
                sp[idx] = top - arity + 1
            if bad:
                break
        if bad or sp.min() == 0:
            invalid[p] = 1
            continue
        result = stack[sp - 1, cols].reshape(n_states, n_samples)
        acc = result[:, 0].copy()
        for s in range(1, n_samples):
            acc += result[:, s]
        means[p] = acc / n_samples
    return means, invalid
