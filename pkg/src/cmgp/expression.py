"""Expression trees for evolved programs.

Trees come from replaying a genome's most likely token sequence on a symbolic
stack. They are used for listings ("a[0] = ..."), for counting which state
variables a program reads, and as the input of the simplifier. Children of an
``Apply`` node are kept in pop order: ``children[0]`` was on top of the stack.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Sequence, Union

from .operators import OPERATOR_INDEX, OPERATORS, apply_operator
from .program import (
    STACK_REPEATS,
    InvalidProgramError,
    Literal,
    Op,
    Token,
    deterministic_tokens,
)


@dataclass(frozen=True)
class Constant:
    value: float
    sign_fixed: bool = True
    slot: Optional[int] = None  # gene position, for literals whose sign is sampled


@dataclass(frozen=True)
class StateVar:
    index: int


@dataclass(frozen=True)
class Apply:
    op: int
    children: tuple["Expr", ...]

    def __post_init__(self):
        if len(self.children) != OPERATORS[self.op].arity:
            raise ValueError(f"{OPERATORS[self.op].name} needs {OPERATORS[self.op].arity} children")


Expr = Union[Constant, StateVar, Apply]


def tokens_to_expression(tokens: Sequence[Token], state_dim: int) -> Expr:
    stack: list[Expr] = [StateVar(i) for i in range(state_dim)] * STACK_REPEATS
    for slot, token in enumerate(tokens):
        if isinstance(token, Literal):
            stack.append(Constant(token.magnitude, sign_fixed=False, slot=slot))
            continue
        arity = OPERATORS[token.index].arity
        if len(stack) < arity:
            raise InvalidProgramError(f"stack underflow at {OPERATORS[token.index].name}")
        stack.append(Apply(token.index, tuple(stack.pop() for _ in range(arity))))
    if not stack:
        raise InvalidProgramError("empty stack at end of program")
    return stack[-1]


def to_expression(genome: Sequence[float], state_dim: int) -> Expr:
    """Tree of the genome's most likely decode (cast offset 0 for every gene)."""
    return tokens_to_expression(deterministic_tokens(genome), state_dim)


def walk(expr: Expr) -> Iterator[Expr]:
    yield expr
    if isinstance(expr, Apply):
        for child in expr.children:
            yield from walk(child)


def state_variables(expr: Expr) -> set[int]:
    return {node.index for node in walk(expr) if isinstance(node, StateVar)}


def count_state_variables(expr: Expr) -> int:
    return len(state_variables(expr))


def serialize(expr: Expr) -> list[Token]:
    """Postfix tokens that rebuild ``expr``; state leaves come from the prefilled stack."""
    out: list[Token] = []

    def emit(node: Expr) -> None:
        if isinstance(node, StateVar):
            return
        if isinstance(node, Constant):
            out.append(Literal(abs(node.value)))
            return
        for child in reversed(node.children):
            emit(child)
        out.append(Op(node.op))

    emit(expr)
    return out


def evaluate_expression(expr: Expr, state: Sequence[float], signs: Mapping[int, float] | None = None) -> float:
    """Evaluate a tree. Unfixed literals take ``signs[slot]`` (default +1)."""
    if isinstance(expr, Constant):
        if expr.sign_fixed or signs is None:
            return expr.value
        return signs.get(expr.slot, 1.0) * expr.value
    if isinstance(expr, StateVar):
        return float(state[expr.index])
    return apply_operator(expr.op, [evaluate_expression(c, state, signs) for c in expr.children])


# -- rendering ---------------------------------------------------------------

_INFIX = {"+", "*"}
_CALL2 = {"max", "min"}


def _render(expr: Expr) -> str:
    if isinstance(expr, Constant):
        text = repr(float(expr.value))
        return text if expr.sign_fixed else f"±{text}"
    if isinstance(expr, StateVar):
        return f"x[{expr.index}]"
    name = OPERATORS[expr.op].name
    args = [_render(c) for c in expr.children]
    if name in _INFIX:
        return f"({args[0]} {name} {args[1]})"
    if name in _CALL2:
        return f"{name}({args[0]}, {args[1]})"
    if name == "select":
        return f"({args[1]} if {args[0]} > 0 else {args[2]})"
    return f"{name}({args[0]})"


def render(expr: Expr) -> str:
    """Infix text; the outermost parentheses of a binary or select root are dropped."""
    text = _render(expr)
    if isinstance(expr, Apply) and (OPERATORS[expr.op].name in _INFIX or OPERATORS[expr.op].name == "select"):
        text = text[1:-1]
    return text


def render_listing(exprs: Sequence[Expr]) -> str:
    return "\n".join(f"a[{i}] = {render(e)}" for i, e in enumerate(exprs))


# -- parsing -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>±?-?(?:\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|inf))"
    r"|(?P<var>x\[\d+\])"
    r"|(?P<name>-?[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<punct>[()+*,>])"
    r")"
)


class ParseError(ValueError):
    pass


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected input at {pos}: {text[pos:pos + 20]!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.slot = 0

    def peek(self, k: int = 0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else (None, None)

    def take(self, value: str | None = None):
        kind, val = self.peek()
        if kind is None or (value is not None and val != value):
            raise ParseError(f"expected {value!r}, got {val!r}")
        self.i += 1
        return kind, val

    def parse(self) -> Expr:
        expr = self.cond()
        if self.i != len(self.toks):
            raise ParseError(f"trailing input {self.peek()[1]!r}")
        return expr

    def cond(self) -> Expr:
        first = self.primary()
        kind, val = self.peek()
        if kind == "name" and val == "if":
            self.take()
            test = self.primary()
            self.take(">")
            zero = self.take()[1]
            if float(zero) != 0.0:
                raise ParseError("select test must compare against 0")
            self.take("else")
            other = self.primary()
            return Apply(OPERATOR_INDEX["select"], (test, first, other))
        if val in _INFIX:
            self.take()
            right = self.primary()
            return Apply(OPERATOR_INDEX[val], (first, right))
        return first

    def primary(self) -> Expr:
        kind, val = self.take()
        if kind == "num":
            fixed = not val.startswith("±")
            value = float(val.lstrip("±"))
            if fixed:
                return Constant(value)
            slot, self.slot = self.slot, self.slot + 1
            return Constant(value, sign_fixed=False, slot=slot)
        if kind == "var":
            return StateVar(int(val[2:-1]))
        if val == "(":
            inner = self.cond()
            self.take(")")
            return inner
        if kind == "name" and val in OPERATOR_INDEX:
            op = OPERATOR_INDEX[val]
            self.take("(")
            args = [self.cond()]
            while self.peek()[1] == ",":
                self.take()
                args.append(self.cond())
            self.take(")")
            if len(args) != OPERATORS[op].arity:
                raise ParseError(f"{val} takes {OPERATORS[op].arity} arguments")
            return Apply(op, tuple(args))
        raise ParseError(f"unexpected token {val!r}")


def parse_expression(text: str) -> Expr:
    """Parse the infix form produced by ``render``."""
    return _Parser(text).parse()


_LINE_RE = re.compile(r"^\s*a\[(\d+)\]\s*=\s*(.+?)\s*$")


def parse_listing(text: str) -> list[Expr]:
    """Parse lines of the form ``a[i] = <expr>``; blank lines are ignored."""
    exprs: dict[int, Expr] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        m = _LINE_RE.match(line)
        if not m:
            raise ParseError(f"not a program line: {line!r}")
        exprs[int(m.group(1))] = parse_expression(m.group(2))
    if sorted(exprs) != list(range(len(exprs))) or not exprs:
        raise ParseError("listing must define a[0], a[1], ... without gaps")
    return [exprs[i] for i in range(len(exprs))]
