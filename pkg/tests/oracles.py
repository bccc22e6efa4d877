"""Independent reference computations used by several test modules.

Nothing here imports the package's execution code; the operator table is
restated from first principles so that disagreements surface as failures.
"""
import itertools
import math

import numpy as np

OP_NAMES = ["abs", "-abs", "sin", "-sin", "cos", "-cos", "exp", "-exp", "sqrt", "-sqrt", "neg",
            "+", "*", "select", "max", "min", "id", "reciprocal", "trunc"]
ARITY = {"+": 2, "*": 2, "max": 2, "min": 2, "select": 3}


def ref_apply(name, ops):
    """``ops`` in pop order (ops[0] was on top)."""
    a = ops[0]
    big = 1.7976931348623157e308
    table = {
        "abs": lambda: abs(a), "-abs": lambda: -abs(a),
        "sin": lambda: math.sin(a), "-sin": lambda: -math.sin(a),
        "cos": lambda: math.cos(a), "-cos": lambda: -math.cos(a),
        "exp": lambda: math.exp(min(a, 10.0)), "-exp": lambda: -math.exp(min(a, 10.0)),
        "sqrt": lambda: math.sqrt(a) if a >= 0 else 0.0, "-sqrt": lambda: -math.sqrt(a) if a >= 0 else 0.0,
        "neg": lambda: -a, "id": lambda: a,
        "reciprocal": lambda: 20.0 if abs(a) <= 0.05 else 1.0 / a,
        "trunc": lambda: float(math.trunc(a)) if math.isfinite(a) else a,
        "+": lambda: max(-big, min(big, a + ops[1])),
        "*": lambda: max(-big, min(big, a * ops[1])),
        "max": lambda: max(a, ops[1]), "min": lambda: min(a, ops[1]),
        "select": lambda: ops[1] if a > 0 else ops[2],
    }
    return table[name]()


def ref_run(tokens, state):
    """tokens: list of ("lit", signed value) or ("op", name). Returns None on underflow."""
    stack = [float(v) for v in state] * 20
    for kind, val in tokens:
        if kind == "lit":
            stack.append(val)
            continue
        k = ARITY.get(val, 1)
        if len(stack) < k:
            return None
        ops = [stack.pop() for _ in range(k)]
        stack.append(ref_apply(val, ops))
    return stack[-1] if stack else None


def gene_bins(g):
    """(probability, code) pairs of floor(g + u), u ~ U(-0.5, 0.5)."""
    lo = g - 0.5
    k = math.floor(lo)
    p = (k + 1) - lo
    out = [(p, k)]
    if p < 1.0:
        out.append((1.0 - p, k + 1))
    return out


def code_token(code, g):
    if code >= 0:
        return ("lit", abs(g))
    return ("op", OP_NAMES[min(-code - 1, 18)])


def exact_expectation(genome, state):
    """Exact mean output over every cast and sign outcome."""
    total = 0.0
    for combo in itertools.product(*[gene_bins(g) for g in genome]):
        prob = math.prod(p for p, _ in combo)
        tokens = [code_token(c, g) for (_, c), g in zip(combo, genome)]
        lits = [i for i, t in enumerate(tokens) if t[0] == "lit"]
        for signs in itertools.product([-1.0, 1.0], repeat=len(lits)):
            toks = list(tokens)
            for i, s in zip(lits, signs):
                toks[i] = ("lit", s * toks[i][1])
            v = ref_run(toks, state)
            if v is None:
                return None
            total += prob * 0.5 ** len(lits) * v
    return total


def conditional_expectations(genome, state, index):
    """Expected output given each possible code of gene ``index``."""
    out = {}
    for p, code in gene_bins(genome[index]):
        others = list(genome)
        # pin the gene to the centre of its bin so it always casts to ``code``
        others[index] = code + 0.5
        out[code] = exact_expectation(others, state)
    return out


def brute_mlp(weights, biases, x, output="linear"):
    """Straight-line loops, no matrix products."""
    h = [list(row) for row in np.asarray(x, dtype=np.float64)]
    for layer, (w, b) in enumerate(zip(weights, biases)):
        w = np.asarray(w)
        new = []
        for row in h:
            z = []
            for j in range(w.shape[1]):
                s = float(b[j])
                for i in range(w.shape[0]):
                    s += row[i] * float(w[i, j])
                z.append(s)
            if layer < len(weights) - 1:
                z = [max(v, 0.0) for v in z]
            elif output == "tanh":
                z = [math.tanh(v) for v in z]
            new.append(z)
        h = new
    return np.array(h)
