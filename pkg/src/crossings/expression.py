"""Recursive-descent parser for covariance / curve / spectral-density expressions.

Grammar (unary minus binds looser than ``^``, so ``-tau^2`` is ``-(tau^2)``)::

    expr   := term {("+"|"-") term}
    term   := unary {("*"|"/") unary}
    unary  := "-" unary | power
    power  := atom ["^" unary]
    atom   := number | variable | func "(" expr ")" | "(" expr ")"
    func   := exp | log | sin | cos | sqrt
"""
from __future__ import annotations

import operator
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from . import jets

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")


class ExpressionError(ValueError):
    """Base class for parse/evaluation problems of user expressions."""


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, text: str, pos: int):
        self.text = text
        self.pos = pos
        self.reason = message
        caret = " " * pos + "^"
        super().__init__(f"{message} at position {pos}\n  {text}\n  {caret}")


class UnknownIdentifierError(ExpressionSyntaxError):
    pass


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


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


# -- tokenizer ---------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionSyntaxError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, variables):
        self.text = text
        self.variables = tuple(variables)
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value:
            what = "end of input" if kind == "end" else repr(val)
            raise ExpressionSyntaxError(f"expected {value!r}, found {what}", self.text, pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {val!r}", self.text, pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "id":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in self.variables:
                return Var(val)
            raise UnknownIdentifierError(f"unknown identifier {val!r}", self.text, pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(val)
        raise ExpressionSyntaxError(f"unexpected {what}", self.text, pos)


def parse(text: str, variables=("tau",)) -> Node:
    """Parse ``text`` into an AST; raise :class:`ExpressionSyntaxError` with a position."""
    return _Parser(text, variables).parse()


def to_string(node: Node) -> str:
    """Fully parenthesized rendering; ``parse(to_string(n)) == n``."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_string(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_string(node.left)} {node.op} {to_string(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_string(node.arg)})"
    raise TypeError(node)


def free_variables(node: Node) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return free_variables(node.arg)
    if isinstance(node, Call):
        return free_variables(node.arg)
    return free_variables(node.left) | free_variables(node.right)


# -- evaluation ----------------------------------------------------------------

NUMPY_FUNCS: Mapping[str, Callable] = {
    "exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos, "sqrt": np.sqrt,
    "num": np.float64, "pow": np.power,
}

def _jet_or_numpy(jet_fn, np_fn):
    return lambda a: jet_fn(a) if isinstance(a, jets.TaylorJet4) else np_fn(a)


def _jet_pow(a, b):
    if isinstance(a, jets.TaylorJet4):
        return a ** b
    if isinstance(b, jets.TaylorJet4):
        return b.__rpow__(float(a))
    return np.power(a, b)


JET_FUNCS: Mapping[str, Callable] = {
    "exp": _jet_or_numpy(jets.exp, np.exp), "log": _jet_or_numpy(jets.log, np.log),
    "sin": _jet_or_numpy(jets.sin, np.sin), "cos": _jet_or_numpy(jets.cos, np.cos),
    "sqrt": _jet_or_numpy(jets.sqrt, np.sqrt), "num": np.float64, "pow": _jet_pow,
}


def evaluate(node: Node, env: Mapping, funcs: Mapping[str, Callable] = NUMPY_FUNCS):
    """Evaluate with a pluggable function table (numpy, jets, mpmath, ...).

    Besides the five functions the table may provide ``num`` (literal
    constructor) and ``pow``.
    """
    if isinstance(node, Num):
        return funcs.get("num", float)(node.value)
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.arg, env, funcs)
    if isinstance(node, Call):
        return funcs[node.func](evaluate(node.arg, env, funcs))
    a = evaluate(node.left, env, funcs)
    b = evaluate(node.right, env, funcs)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return funcs.get("pow", operator.pow)(a, b)


def evaluate_numpy(node: Node, **env):
    with np.errstate(all="ignore"):
        return evaluate(node, env, NUMPY_FUNCS)


def evaluate_jet(node: Node, var: str, x) -> jets.TaylorJet4:
    """Taylor jet of the expression in ``var`` at ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        out = evaluate(node, {var: jets.TaylorJet4.variable(x)}, JET_FUNCS)
    if not isinstance(out, jets.TaylorJet4):
        out = jets.TaylorJet4.constant(out, x)
    return out
