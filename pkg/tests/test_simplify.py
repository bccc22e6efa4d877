import itertools
from pathlib import Path

import numpy as np
import pytest

from cmgp.expression import Apply, Constant, StateVar, parse_expression, parse_listing, render, render_listing, \
    to_expression, walk
from cmgp.operators import OPERATORS
from cmgp.program import random_genomes
from cmgp.simplify import interval_of, simplify

FIXTURES = Path(__file__).parent / "fixtures"
BOX = (-1.0, 1.0)


def grid(lo=-1.0, hi=1.0, n=20):
    xs = np.linspace(lo, hi, n)
    return np.array(list(itertools.product(xs, xs)))


def np_eval(expr, X, signs):
    """Vectorised tree evaluation over rows of X; independent of the package's operator code."""
    if isinstance(expr, Constant):
        v = expr.value if expr.sign_fixed else signs[expr.slot] * expr.value
        return np.full(len(X), v)
    if isinstance(expr, StateVar):
        return X[:, expr.index].astype(float)
    c = [np_eval(ch, X, signs) for ch in expr.children]
    name = OPERATORS[expr.op].name
    big = np.finfo(float).max
    with np.errstate(all="ignore"):
        table = {
            "abs": lambda: np.abs(c[0]), "-abs": lambda: -np.abs(c[0]),
            "sin": lambda: np.sin(c[0]), "-sin": lambda: -np.sin(c[0]),
            "cos": lambda: np.cos(c[0]), "-cos": lambda: -np.cos(c[0]),
            "exp": lambda: np.exp(np.minimum(c[0], 10)), "-exp": lambda: -np.exp(np.minimum(c[0], 10)),
            "sqrt": lambda: np.sqrt(np.maximum(c[0], 0)), "-sqrt": lambda: -np.sqrt(np.maximum(c[0], 0)),
            "neg": lambda: -c[0], "id": lambda: c[0], "trunc": lambda: np.trunc(c[0]),
            "reciprocal": lambda: np.where(np.abs(c[0]) <= 0.05, 20.0, 1.0 / np.where(c[0] == 0, 1, c[0])),
            "+": lambda: np.clip(c[0] + c[1], -big, big), "*": lambda: np.clip(c[0] * c[1], -big, big),
            "max": lambda: np.maximum(c[0], c[1]), "min": lambda: np.minimum(c[0], c[1]),
            "select": lambda: np.where(c[0] > 0, c[1], c[2]),
        }
        return table[name]()


def slots(expr):
    return sorted({n.slot for n in walk(expr) if isinstance(n, Constant) and not n.sign_fixed})


@pytest.mark.parametrize("n", [2, 4])
def test_listing_reproduced_verbatim(n):
    raw = parse_listing((FIXTURES / f"listing_{n}_raw.txt").read_text())
    want = (FIXTURES / f"listing_{n}_simplified.txt").read_text().strip()
    got = render_listing([simplify(e, BOX, 2) for e in raw])
    assert " ".join(got.split()) == " ".join(want.split())


def test_listing_without_foldable_parts_is_unchanged():
    raw = parse_listing((FIXTURES / "listing_3_raw.txt").read_text())
    want = (FIXTURES / "listing_3_simplified.txt").read_text().strip()
    assert render_listing([simplify(e, BOX, 2) for e in raw]) == want


def test_select_on_truncated_state_is_live():
    # trunc(x[1]) > 0 never holds on [-1, 1), but x[1] = 1 reaches it, and the
    # else branch differs from x[0] elsewhere, so the select must stay
    raw = parse_listing((FIXTURES / "listing_1_raw.txt").read_text())[0]
    folded = parse_listing((FIXTURES / "listing_1_simplified.txt").read_text())[0]
    ours = simplify(raw, BOX, 2)
    point = np.array([[-1.0, -0.5]])
    assert np_eval(raw, point, {})[0] == pytest.approx(-np.exp(-np.sin(-0.5)))
    assert np_eval(folded, point, {})[0] != pytest.approx(np_eval(raw, point, {})[0])
    X = grid()
    np.testing.assert_allclose(np_eval(ours, X, {}), np_eval(raw, X, {}), rtol=0, atol=1e-9)


def test_constant_folding():
    e = simplify(parse_expression("(sin(2.0) + 3.0)"))
    assert e == Constant(np.sin(2.0) + 3.0)
    assert abs(e.value - 3.9093) < 1e-4
    # a literal with a run-time sign cannot fold to one number
    assert render(simplify(parse_expression("(sin(±2.0) + 3.0)"))) == "sin(±2.0) + 3.0"
    # but abs removes the sign
    assert simplify(parse_expression("abs(±2.5)")) == Constant(2.5)


def test_dead_branches():
    assert render(simplify(parse_expression("(x[0] if exp(x[1]) > 0 else x[1])"))) == "x[0]"
    assert render(simplify(parse_expression("(x[0] if -abs(x[1]) > 0 else x[1])"))) == "x[1]"
    assert render(simplify(parse_expression("(x[0] if x[1] > 0 else ±2.0)"))) == "x[0] if x[1] > 0 else ±2.0"
    # test only decided on the narrower domain
    assert render(simplify(parse_expression("(x[0] if x[1] > 0 else x[1])"), (0.5, 1.0))) == "x[0]"


def test_per_dimension_domain():
    e = parse_expression("(x[0] if x[1] > 0 else ±3.0)")
    assert render(simplify(e, [(-1, 1), (0.1, 1)])) == "x[0]"
    assert render(simplify(e, [(0.1, 1), (-1, 1)])) == "x[0] if x[1] > 0 else ±3.0"


def test_random_programs_agree_with_their_simplified_forms():
    rng = np.random.default_rng(2024)
    X = grid()
    changed = 0
    for genome in random_genomes(rng, 1000, 5):
        expr = to_expression(genome, 2)
        simple = simplify(expr, BOX, 2)
        changed += render(simple) != render(expr)
        free = slots(expr)
        choices = list(itertools.product([-1.0, 1.0], repeat=len(free)))
        if len(choices) > 8:
            choices = [choices[i] for i in rng.choice(len(choices), 8, replace=False)]
        for signs in choices:
            sd = dict(zip(free, signs))
            a, b = np_eval(expr, X, sd), np_eval(simple, X, sd)
            assert np.all(np.abs(a - b) < 1e-9), (render(expr), render(simple), sd)
    assert changed > 50  # the check is not vacuous


def test_simplify_is_idempotent():
    rng = np.random.default_rng(7)
    for genome in random_genomes(rng, 500, 5):
        once = simplify(to_expression(genome, 2), BOX, 2)
        assert simplify(once, BOX, 2) == once


def test_interval_encloses_values():
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, (500, 2))
    for genome in random_genomes(rng, 300, 5):
        expr = to_expression(genome, 2)
        lo, hi = interval_of(expr, BOX, 2)
        free = slots(expr)
        for signs in itertools.product([-1.0, 1.0], repeat=min(len(free), 3)):
            sd = dict(zip(free, list(signs) + [1.0] * len(free)))
            v = np_eval(expr, X, sd)
            assert np.all((v >= lo) & (v <= hi))


def test_apply_arity_is_checked():
    with pytest.raises(ValueError):
        Apply(0, (StateVar(0), StateVar(1)))
