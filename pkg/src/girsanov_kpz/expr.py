"""Arithmetic expressions for user-defined fields.

Grammar, loosest binding first::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | NAME | NAME '(' args ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so ``-2^2``
is ``-(2^2) = -4`` while ``2^-1`` is ``0.5``.  Variables are ``t`` and
``x1`` .. ``x8``; ``pi`` and ``e`` are folded to literals at parse time.

Evaluation interprets the tree with numpy, so ``x`` may carry any leading
batch shape.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import KPZLabError

MAX_DIM = 8


class ExprError(KPZLabError):
    pass


class ExprSyntaxError(ExprError):
    """Malformed text; ``offset`` is a byte offset into the UTF-8 source."""

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        exp = ""
        if self.expected:
            exp = "; expected one of " + ", ".join(sorted(self.expected))
        super().__init__(f"{message} at offset {offset}{exp}")


class UnknownIdentifier(ExprError):
    def __init__(self, name, offset):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at offset {offset}")


class ArityError(ExprError):
    def __init__(self, name, expected, got, offset):
        self.name = name
        self.offset = offset
        super().__init__(
            f"{name}() takes {expected} argument(s), got {got} (offset {offset})"
        )


class DomainError(ExprError, ArithmeticError):
    pass


class UnboundVariable(ExprError):
    pass


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
    args: tuple


Node = Union[Num, Var, Neg, BinOp, Call]

FUNCTIONS = {
    "sin": 1, "cos": 1, "exp": 1, "log": 1, "sqrt": 1,
    "tanh": 1, "abs": 1, "min": 2, "max": 2, "pow": 2,
}
CONSTANTS = {"pi": math.pi, "e": math.e}
DEFAULT_NAMES = ("t",) + tuple(f"x{i}" for i in range(1, MAX_DIM + 1))

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # "num", "name", "op", "end"
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    # Offsets are reported in bytes of the UTF-8 encoding.
    boff = lambda i: len(text[:i].encode("utf-8"))  # noqa: E731
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(
                f"unexpected character {text[start]!r}",
                boff(start),
                {"number", "identifier", "operator", "'('", "')'", "','"},
            )
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), boff(m.start(kind))))
        pos = m.end()
    toks.append(_Tok("end", "", len(text.encode("utf-8"))))
    return toks


_OPERAND_START = {"number", "identifier", "'('", "'-'"}


class _Parser:
    def __init__(self, text, names):
        self.toks = _tokenize(text)
        self.i = 0
        self.names = names

    def peek(self):
        return self.toks[self.i]

    def advance(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def at_op(self, *ops):
        tok = self.peek()
        return tok.kind == "op" and tok.text in ops

    def expect_op(self, op, expected):
        tok = self.peek()
        if not (tok.kind == "op" and tok.text == op):
            raise ExprSyntaxError(_describe(tok), tok.offset, expected)
        return self.advance()

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(
                _describe(tok), tok.offset,
                {"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"},
            )
        return node

    def expr(self):
        node = self.term()
        while self.at_op("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.at_op("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.at_op("-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.at_op("^"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.advance()
        if tok.kind == "num":
            value = float(tok.text)
            if not math.isfinite(value):
                raise ExprSyntaxError("numeric literal overflows", tok.offset)
            return Num(value)
        if tok.kind == "name":
            if self.at_op("("):
                return self.call(tok)
            if tok.text in CONSTANTS:
                return Num(CONSTANTS[tok.text])
            if tok.text in FUNCTIONS:
                raise ExprSyntaxError(
                    f"function {tok.text!r} used without arguments",
                    self.peek().offset, {"'('"},
                )
            if tok.text not in self.names:
                raise UnknownIdentifier(tok.text, tok.offset)
            return Var(tok.text)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")", {"')'", "'+'", "'-'", "'*'", "'/'", "'^'"})
            return node
        raise ExprSyntaxError(_describe(tok), tok.offset, _OPERAND_START)

    def call(self, name_tok):
        name = name_tok.text
        if name not in FUNCTIONS:
            raise UnknownIdentifier(name, name_tok.offset)
        self.expect_op("(", {"'('"})
        args = []
        if not self.at_op(")"):
            args.append(self.expr())
            while self.at_op(","):
                self.advance()
                args.append(self.expr())
        self.expect_op(")", {"')'", "','"})
        if len(args) != FUNCTIONS[name]:
            raise ArityError(name, FUNCTIONS[name], len(args), name_tok.offset)
        return Call(name, tuple(args))


def _describe(tok):
    if tok.kind == "end":
        return "unexpected end of input"
    return f"unexpected token {tok.text!r}"


def parse(text: str, dim: int = MAX_DIM, extra_names=()) -> Node:
    """Parse ``text`` into an immutable AST.

    ``dim`` limits the admissible state variables to ``x1`` .. ``x{dim}``;
    ``extra_names`` admits further variable names (e.g. ``r`` for a
    structure function).
    """
    names = {"t"} | {f"x{i}" for i in range(1, dim + 1)} | set(extra_names)
    return _Parser(text, names).parse()


def to_text(node: Node) -> str:
    """Print ``node`` fully parenthesised; ``parse(to_text(n)) == n``."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_text(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def variables(node: Node) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    return set().union(*(variables(a) for a in node.args))


def _check(value, what):
    if np.any(np.isnan(value)):
        raise DomainError(f"{what} is undefined for the given arguments")
    return value


def _lookup(name, env):
    if name in env:
        return env[name]
    if name.startswith("x") and name[1:].isdigit() and "x" in env:
        x = np.asarray(env["x"], dtype=float)
        k = int(name[1:])
        if 1 <= k <= x.shape[-1]:
            return x[..., k - 1]
    raise UnboundVariable(f"variable {name!r} is not bound")


def evaluate(node: Node, env: dict):
    """Evaluate ``node``; ``env`` maps ``t`` and ``x`` (array, last axis is
    the component) or individual names to values.

    Raises DomainError instead of returning NaN.
    """
    with np.errstate(all="ignore"):
        return _eval(node, env)


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return _lookup(node.name, env)
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        op = node.op
        if op == "+":
            return _check(np.add(a, b), "sum")
        if op == "-":
            return _check(np.subtract(a, b), "difference")
        if op == "*":
            return _check(np.multiply(a, b), "product")
        if op == "/":
            if np.any(np.asarray(b) == 0):
                raise DomainError("division by zero")
            return _check(np.divide(a, b), "quotient")
        return _check(np.power(np.asarray(a, dtype=float), b), "power")
    args = [_eval(a, env) for a in node.args]
    f = node.func
    if f == "log":
        if np.any(np.asarray(args[0]) <= 0):
            raise DomainError("log of a non-positive argument")
        return np.log(args[0])
    if f == "sqrt":
        if np.any(np.asarray(args[0]) < 0):
            raise DomainError("sqrt of a negative argument")
        return np.sqrt(args[0])
    if f == "pow":
        return _check(np.power(np.asarray(args[0], dtype=float), args[1]), "pow")
    fn = {
        "sin": np.sin, "cos": np.cos, "exp": np.exp, "tanh": np.tanh,
        "abs": np.abs, "min": np.minimum, "max": np.maximum,
    }[f]
    return _check(fn(*args), f)


def compile_field(node: Node):
    """Wrap an AST as ``f(t, x) -> array`` broadcast to the batch shape of x."""

    def field(t, x):
        x = np.asarray(x, dtype=float)
        value = evaluate(node, {"t": t, "x": x})
        shape = np.broadcast_shapes(np.shape(t), x.shape[:-1])
        return np.broadcast_to(np.asarray(value, dtype=float), shape).copy()

    return field
