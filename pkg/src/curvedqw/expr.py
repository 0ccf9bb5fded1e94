"""Arithmetic expressions over ``t, x, y`` used for metric components.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?        # right-associative
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Evaluation goes through numpy so the same tree evaluates scalars and grids.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

VARIABLES = ("t", "x", "y")
FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "tanh": np.tanh,
}


class ExpressionError(ValueError):
    """Raised for malformed expressions; ``offset`` is the character index."""

    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} (at offset {offset})")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str):
    pos = 0
    tokens = []
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExpressionError(f"unexpected character {source[bad]!r}", bad, source)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, value, offset = self.advance()
        if value != text or kind != "op":
            found = value or "end of input"
            raise ExpressionError(f"expected {text!r}, found {found!r}", offset, self.source)

    def parse(self) -> Node:
        node = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected token {value!r}", offset, self.source)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, value, offset = self.advance()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if value not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {value!r}", offset, self.source)
                self.advance()
                arg = self.expr()
                kind2, value2, offset2 = self.peek()
                if kind2 == "op" and value2 == ",":
                    raise ExpressionError(
                        f"function {value!r} takes exactly 1 argument", offset2, self.source
                    )
                self.expect(")")
                return Call(value, arg)
            if value in FUNCTIONS:
                raise ExpressionError(
                    f"function {value!r} takes exactly 1 argument", offset, self.source
                )
            if value not in VARIABLES:
                raise ExpressionError(
                    f"unknown identifier {value!r} (allowed: t, x, y)", offset, self.source
                )
            return Var(value)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = value or "end of input"
        raise ExpressionError(f"unexpected token {found!r}", offset, self.source)


def parse_metric_expression(source: str) -> Node:
    """Parse ``source`` into an expression tree.

    >>> evaluate(parse_metric_expression("1+0.3*sin(x)"), x=0.0)
    1.0
    """
    if not isinstance(source, str):
        raise TypeError("expression source must be a string")
    return _Parser(source).parse()


def evaluate(node: Node, t=0.0, x=0.0, y=0.0):
    """Evaluate ``node``; arguments may be scalars or broadcastable arrays."""
    env = {"t": t, "x": x, "y": y}
    return _eval(node, env)


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, env))
    a = _eval(node.left, env)
    b = _eval(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return np.true_divide(a, b)
    return np.power(a, b)


def to_source(node: Node) -> str:
    """Print ``node`` fully parenthesised; re-parsing gives an equal tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    return f"({to_source(node.left)}{node.op}{to_source(node.right)})"


def variables(node: Node) -> set:
    """Names of the variables ``node`` depends on."""
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, Call):
        return variables(node.arg)
    return variables(node.left) | variables(node.right)


class MetricExpression:
    """A parsed expression together with its source text."""

    __slots__ = ("source", "tree")

    def __init__(self, source: str):
        self.source = source
        self.tree = parse_metric_expression(source)

    def __call__(self, t=0.0, x=0.0, y=0.0):
        with np.errstate(all="ignore"):
            return evaluate(self.tree, t, x, y)

    @property
    def depends_on_time(self) -> bool:
        return "t" in variables(self.tree)

    def __repr__(self):
        return f"MetricExpression({self.source!r})"
