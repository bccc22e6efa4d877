"""Operator set available to evolved programs.

Every operator is total: inputs outside the natural domain map to a fixed
default so that any genome produces a finite value. The ordering of
``OPERATORS`` defines the gene -> operator mapping and must not change
between releases (genomes saved by one version are replayed by another).
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Callable, Sequence

DBL_MAX = sys.float_info.max
EXP_CLAMP = 10.0
RECIPROCAL_EPS = 0.05
RECIPROCAL_DEFAULT = 20.0


def _sat(x: float) -> float:
    if x > DBL_MAX:
        return DBL_MAX
    if x < -DBL_MAX:
        return -DBL_MAX
    return x


def _exp(a: float) -> float:
    return math.exp(min(a, EXP_CLAMP))


def _sqrt(a: float) -> float:
    return math.sqrt(a) if a >= 0.0 else 0.0


def _reciprocal(a: float) -> float:
    if abs(a) <= RECIPROCAL_EPS:
        return RECIPROCAL_DEFAULT
    return 1.0 / a


def _select(test: float, a: float, b: float) -> float:
    return a if test > 0.0 else b


@dataclass(frozen=True)
class Operator:
    name: str
    arity: int
    fn: Callable[..., float]

    def __str__(self) -> str:
        return self.name


# Version 1 of the table. Append only.
OPERATORS: tuple[Operator, ...] = (
    Operator("abs", 1, lambda a: abs(a)),
    Operator("-abs", 1, lambda a: -abs(a)),
    Operator("sin", 1, math.sin),
    Operator("-sin", 1, lambda a: -math.sin(a)),
    Operator("cos", 1, math.cos),
    Operator("-cos", 1, lambda a: -math.cos(a)),
    Operator("exp", 1, _exp),
    Operator("-exp", 1, lambda a: -_exp(a)),
    Operator("sqrt", 1, _sqrt),
    Operator("-sqrt", 1, lambda a: -_sqrt(a)),
    Operator("neg", 1, lambda a: -a),
    Operator("+", 2, lambda a, b: _sat(a + b)),
    Operator("*", 2, lambda a, b: _sat(a * b)),
    Operator("select", 3, _select),
    Operator("max", 2, max),
    Operator("min", 2, min),
    Operator("id", 1, lambda a: a),
    Operator("reciprocal", 1, _reciprocal),
    Operator("trunc", 1, lambda a: float(math.trunc(a))),
)
NUM_OPERATORS = len(OPERATORS)
OPERATOR_INDEX = {op.name: i for i, op in enumerate(OPERATORS)}
ARITIES = tuple(op.arity for op in OPERATORS)


def apply_operator(op: int, operands: Sequence[float]) -> float:
    """Apply operator ``op`` to operands given in pop order.

    ``operands[0]`` is the value popped first (the former top of stack). For
    ``select`` that is the test, followed by the value returned when the test
    is positive and the value returned otherwise.
    """
    operator = OPERATORS[op]
    if len(operands) != operator.arity:
        raise ValueError(
            f"{operator.name} takes {operator.arity} operands, got {len(operands)}"
        )
    return float(operator.fn(*operands))
