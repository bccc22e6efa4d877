"""Constant propagation for program trees over a box of state values.

Every subtree gets an abstract value: a list of intervals, one per sign
assignment of the sampled-sign literals it contains (collapsed to their hull
when there are too many). Subtrees that do not read the state and evaluate to
the same number under every sign assignment are folded into a constant, and
``select`` nodes whose test is provably positive (or provably not) are
replaced by the branch that is always taken. Interval bounds are rounded
outwards so these decisions stay sound under floating point.
"""
from __future__ import annotations

import itertools
import math
from typing import Sequence

from .expression import Apply, Constant, Expr, StateVar, evaluate_expression, walk
from .operators import (
    DBL_MAX,
    EXP_CLAMP,
    OPERATORS,
    RECIPROCAL_DEFAULT,
    RECIPROCAL_EPS,
)

Interval = tuple[float, float]
MAX_CASES = 64
MAX_ENUMERATED_SIGNS = 10
_ULPS = 4


def _widen(lo: float, hi: float, ulps: int = _ULPS) -> Interval:
    for _ in range(ulps):
        lo = math.nextafter(lo, -math.inf)
        hi = math.nextafter(hi, math.inf)
    return max(lo, -DBL_MAX), min(hi, DBL_MAX)


def _sat(x: float) -> float:
    return max(-DBL_MAX, min(DBL_MAX, x))


def _periodic(lo: float, hi: float, fn, peak: float, trough: float) -> Interval:
    # fn has period 2*pi, maximum 1 at peak + 2k*pi, minimum -1 at trough + 2k*pi
    if hi - lo >= 2 * math.pi:
        return -1.0, 1.0
    a, b = fn(lo), fn(hi)
    low, high = min(a, b), max(a, b)

    def hits(x0: float) -> bool:
        k = math.ceil((lo - x0) / (2 * math.pi) - 1e-9)
        return x0 + 2 * math.pi * k <= hi + 1e-9

    if hits(peak):
        high = 1.0
    if hits(trough):
        low = -1.0
    return _widen(low, high)


def _reciprocal(lo: float, hi: float) -> Interval:
    parts: list[float] = []
    if lo <= RECIPROCAL_EPS and hi >= -RECIPROCAL_EPS:
        parts.append(RECIPROCAL_DEFAULT)
    if hi > RECIPROCAL_EPS:
        parts += [1.0 / hi, 1.0 / max(lo, RECIPROCAL_EPS)]
    if lo < -RECIPROCAL_EPS:
        parts += [1.0 / lo, 1.0 / min(hi, -RECIPROCAL_EPS)]
    return _widen(min(parts), max(parts))


def _unary(name: str, lo: float, hi: float) -> Interval:
    if name in ("abs", "-abs"):
        if lo >= 0:
            r = (lo, hi)
        elif hi <= 0:
            r = (-hi, -lo)
        else:
            r = (0.0, max(-lo, hi))
        return r if name == "abs" else (-r[1], -r[0])
    if name in ("sin", "-sin"):
        r = _periodic(lo, hi, math.sin, math.pi / 2, -math.pi / 2)
        return r if name == "sin" else (-r[1], -r[0])
    if name in ("cos", "-cos"):
        r = _periodic(lo, hi, math.cos, 0.0, math.pi)
        return r if name == "cos" else (-r[1], -r[0])
    if name in ("exp", "-exp"):
        r = _widen(math.exp(min(lo, EXP_CLAMP)), math.exp(min(hi, EXP_CLAMP)))
        return r if name == "exp" else (-r[1], -r[0])
    if name in ("sqrt", "-sqrt"):
        r = _widen(math.sqrt(max(lo, 0.0)), math.sqrt(max(hi, 0.0)))
        r = (max(r[0], 0.0), r[1])
        return r if name == "sqrt" else (-r[1], -r[0])
    if name == "neg":
        return -hi, -lo
    if name == "id":
        return lo, hi
    if name == "reciprocal":
        return _reciprocal(lo, hi)
    if name == "trunc":
        return float(math.trunc(lo)), float(math.trunc(hi))
    raise KeyError(name)


def _apply_interval(op: int, args: Sequence[Interval]) -> Interval:
    name = OPERATORS[op].name
    if len(args) == 1:
        return _unary(name, *args[0])
    if name == "+":
        return _widen(_sat(args[0][0] + args[1][0]), _sat(args[0][1] + args[1][1]), 1)
    if name == "*":
        (a, b), (c, d) = args
        prods = [_sat(a * c), _sat(a * d), _sat(b * c), _sat(b * d)]
        return _widen(min(prods), max(prods), 1)
    if name == "max":
        return max(args[0][0], args[1][0]), max(args[0][1], args[1][1])
    if name == "min":
        return min(args[0][0], args[1][0]), min(args[0][1], args[1][1])
    if name == "select":
        test, a, b = args
        if test[0] > 0:
            return a
        if test[1] <= 0:
            return b
        return min(a[0], b[0]), max(a[1], b[1])
    raise KeyError(name)


def _hull(cases: Sequence[Interval]) -> Interval:
    return min(c[0] for c in cases), max(c[1] for c in cases)


def _reads_state(expr: Expr) -> bool:
    return any(isinstance(n, StateVar) for n in walk(expr))


def _free_slots(expr: Expr) -> list[int]:
    return [n.slot for n in walk(expr) if isinstance(n, Constant) and not n.sign_fixed]


def _fold_constant(expr: Expr) -> tuple[Expr, list[Interval]] | None:
    """Concrete values of a state-free subtree under every sign assignment."""
    slots = _free_slots(expr)
    if len(slots) > MAX_ENUMERATED_SIGNS:
        return None
    values = set()
    for signs in itertools.product((1.0, -1.0), repeat=len(slots)):
        values.add(evaluate_expression(expr, (), dict(zip(slots, signs))))
    if len(values) == 1:
        (v,) = values
        return Constant(v), [(v, v)]
    return expr, sorted((v, v) for v in values)


def _normalize_domain(domain, state_dim: int) -> list[Interval]:
    lo_hi = list(domain)
    if len(lo_hi) == 2 and all(isinstance(v, (int, float)) for v in lo_hi):
        return [(float(lo_hi[0]), float(lo_hi[1]))] * state_dim
    return [(float(lo), float(hi)) for lo, hi in lo_hi]


def _simplify(expr: Expr, box: Sequence[Interval]) -> tuple[Expr, list[Interval]]:
    if isinstance(expr, Constant):
        if expr.sign_fixed or expr.value == 0:
            return expr, [(expr.value, expr.value)]
        return expr, [(-expr.value, -expr.value), (expr.value, expr.value)]
    if isinstance(expr, StateVar):
        return expr, [box[expr.index]]

    results = [_simplify(c, box) for c in expr.children]
    children = tuple(r[0] for r in results)
    cases = [r[1] for r in results]

    if OPERATORS[expr.op].name == "select":
        test = cases[0]
        if all(lo > 0 for lo, _ in test):
            return results[1]
        if all(hi <= 0 for _, hi in test):
            return results[2]

    node = Apply(expr.op, children)
    if not _reads_state(node):
        folded = _fold_constant(node)
        if folded is not None:
            return folded

    n_combos = math.prod(len(c) for c in cases)
    if n_combos > MAX_CASES:
        cases = [[_hull(c)] for c in cases]
    out = [_apply_interval(expr.op, combo) for combo in itertools.product(*cases)]
    if len(out) > MAX_CASES:
        out = [_hull(out)]
    return node, out


def simplify(expr: Expr, domain=(-1.0, 1.0), state_dim: int | None = None) -> Expr:
    """Fold constants and dead ``select`` branches given state bounds.

    ``domain`` is either one ``(lo, hi)`` pair shared by every state dimension
    or a sequence of per-dimension pairs.
    """
    if state_dim is None:
        used = [n.index for n in walk(expr) if isinstance(n, StateVar)]
        state_dim = max(used, default=-1) + 1
    box = _normalize_domain(domain, state_dim)
    return _simplify(expr, box)[0]


def interval_of(expr: Expr, domain=(-1.0, 1.0), state_dim: int | None = None) -> Interval:
    """Sound enclosure of the values ``expr`` takes on the domain box."""
    if state_dim is None:
        used = [n.index for n in walk(expr) if isinstance(n, StateVar)]
        state_dim = max(used, default=-1) + 1
    box = _normalize_domain(domain, state_dim)
    return _hull(_simplify(expr, box)[1])
