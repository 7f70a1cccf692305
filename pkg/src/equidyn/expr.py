"""A small analytic-expression language for the functional parameters.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := power (('*' | '/') power)*
    power  := unary ('^' integer)?
    unary  := '-' unary | atom
    atom   := number | 'pi' | name | func '(' expr ')' | 'pow' '(' expr ',' integer ')'
            | '(' expr ')'

``func`` is one of sin, cos, sinh, cosh, abs, sqrt, exp. Exponents are
integer literals with an optional sign. Unary minus binds tighter than
``^``, so ``-x^2`` is ``(-x)^2``; write ``-(x^2)`` or ``-pow(x, 2)`` for
the other reading. Numbers are decimal (``12``, ``0.5``, ``.5``, ``1e-3``).

Evaluation is vectorized: bindings may be floats or numpy arrays of a
common shape. Singular operations raise :class:`ExprEvalError` pointing at
the offending sub-expression instead of producing NaN or Inf.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Union

import numpy as np

from .errors import ExprEvalError, ExprSyntaxError

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "exp": np.exp,
}
CONSTANTS = {"pi": math.pi}


# --------------------------------------------------------------------------
# syntax tree

@dataclass(frozen=True)
class Num:
    value: float
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


Node = Union[Num, Var, Neg, BinOp, Call, Pow]


@dataclass(frozen=True)
class ParamExpr:
    """A parsed expression together with its source text and free variables."""

    source: str
    ast: Node = field(repr=False)
    free_vars: frozenset[str] = field(repr=False)

    def __str__(self) -> str:
        return self.source

    def is_constant(self) -> bool:
        return not self.free_vars


# --------------------------------------------------------------------------
# tokenizer

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "name", "op", "end"
    text: str
    start: int
    end: int


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


def tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while True:
        while pos < len(source) and source[pos].isspace():
            pos += 1
        if pos == len(source):
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}",
                                  _byte_offset(source, pos), source)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(_Token(kind, m.group(kind), _byte_offset(source, start),
                             _byte_offset(source, m.end())))
        pos = m.end()
    # Errors at end of input point at the last byte of the final token.
    last = tokens[-1].end - 1 if tokens else 0
    tokens.append(_Token("end", "", last, last))
    return tokens


# --------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: _Token | None = None):
        tok = tok or self.tok
        return ExprSyntaxError(message, tok.start, self.source)

    def advance(self) -> _Token:
        tok = self.tok
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        if self.tok.kind == "op" and self.tok.text == text:
            return self.advance()
        found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
        raise self.error(f"expected {text!r}, found {found}")

    def at(self, *ops: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in ops

    def parse(self) -> Node:
        if self.tok.kind == "end":
            raise self.error("empty expression")
        node = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.at("+", "-"):
            op = self.advance().text
            right = self.term()
            node = BinOp(op, node, right, (node.span[0], right.span[1]))
        return node

    def term(self) -> Node:
        node = self.power()
        while self.at("*", "/"):
            op = self.advance().text
            right = self.power()
            node = BinOp(op, node, right, (node.span[0], right.span[1]))
        return node

    def power(self) -> Node:
        node = self.unary()
        if self.at("^"):
            self.advance()
            k, end = self.integer()
            node = Pow(node, k, (node.span[0], end))
        return node

    def integer(self) -> tuple[int, int]:
        sign = 1
        if self.at("-"):
            self.advance()
            sign = -1
        tok = self.tok
        if tok.kind != "num":
            raise self.error("pow exponent must be an integer literal")
        value = float(tok.text)
        if not value.is_integer():
            raise self.error("pow exponent must be an integer literal")
        self.advance()
        return sign * int(value), tok.end

    def unary(self) -> Node:
        if self.at("-"):
            start = self.advance().start
            operand = self.unary()
            return Neg(operand, (start, operand.span[1]))
        return self.atom()

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text), (tok.start, tok.end))
        if tok.kind == "name":
            self.advance()
            if self.at("("):
                return self.call(tok)
            if tok.text in FUNCTIONS or tok.text == "pow":
                raise self.error(f"function {tok.text!r} needs an argument list", tok)
            if tok.text in CONSTANTS:
                return Num(CONSTANTS[tok.text], (tok.start, tok.end))
            return Var(tok.text, (tok.start, tok.end))
        if self.at("("):
            start = self.advance().start
            node = self.expr()
            end = self.expect(")").end
            return replace(node, span=(start, end))
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise self.error(f"expected a value, found {found}")

    def call(self, name: _Token) -> Node:
        if name.text not in FUNCTIONS and name.text != "pow":
            raise self.error(f"unknown function {name.text!r}", name)
        self.expect("(")
        arg = self.expr()
        if name.text == "pow":
            self.expect(",")
            k, _ = self.integer()
            end = self.expect(")").end
            return Pow(arg, k, (name.start, end))
        end = self.expect(")").end
        return Call(name.text, arg, (name.start, end))


def free_variables(node: Node) -> frozenset[str]:
    if isinstance(node, Var):
        return frozenset([node.name])
    if isinstance(node, Num):
        return frozenset()
    if isinstance(node, BinOp):
        return free_variables(node.left) | free_variables(node.right)
    if isinstance(node, Neg):
        return free_variables(node.operand)
    if isinstance(node, Call):
        return free_variables(node.arg)
    return free_variables(node.base)


def parse(source: str | float | int) -> ParamExpr:
    """Parse expression text. Plain numbers are accepted as constants."""
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        source = repr(float(source))
    if not isinstance(source, str):
        raise ExprSyntaxError("expression must be text or a number", 0, str(source))
    ast = _Parser(source).parse()
    return ParamExpr(source, ast, free_variables(ast))


def constant(value: float) -> ParamExpr:
    return parse(float(value))


# --------------------------------------------------------------------------
# printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 4
    if isinstance(node, Num) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return 4
    return 5


def to_source(node: Node | ParamExpr) -> str:
    """Print a tree so that parsing the text yields the same tree."""
    if isinstance(node, ParamExpr):
        node = node.ast
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        return "-" + (f"({inner})" if _prec(node.operand) < 4 else inner)
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Pow):
        return f"pow({to_source(node.base)}, {node.exponent})"
    p = _PREC[node.op]
    left, right = to_source(node.left), to_source(node.right)
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


# --------------------------------------------------------------------------
# evaluation

Bindings = Mapping[str, "float | np.ndarray"]


def _check_finite(value, node: Node, what: str):
    if not np.all(np.isfinite(value)):
        raise ExprEvalError(f"{what} produced a non-finite value", node.span)
    return value


def _eval(node: Node, env: Bindings):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            value = env[node.name]
        except KeyError:
            raise ExprEvalError(f"unbound variable {node.name!r}", node.span) from None
        return _check_finite(value, node, f"variable {node.name!r}")
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            out = a + b
        elif node.op == "-":
            out = a - b
        elif node.op == "*":
            out = a * b
        else:
            if np.any(np.asarray(b) == 0):
                raise ExprEvalError("division by zero", node.span)
            out = a / b
        return _check_finite(out, node, f"operator {node.op!r}")
    if isinstance(node, Call):
        a = _eval(node.arg, env)
        if node.func == "sqrt" and np.any(np.asarray(a) < 0):
            raise ExprEvalError("sqrt of a negative number", node.span)
        return _check_finite(FUNCTIONS[node.func](a), node, node.func)
    base = _eval(node.base, env)
    if node.exponent < 0:
        if np.any(np.asarray(base) == 0):
            raise ExprEvalError("division by zero in negative power", node.span)
        out = 1.0 / np.asarray(base, dtype=float) ** (-node.exponent)
    else:
        out = np.asarray(base, dtype=float) ** node.exponent
    return _check_finite(out, node, "pow")


def evaluate(e: ParamExpr | Node, bindings) -> "float | np.ndarray":
    """Evaluate against a mapping of names to values, or an InvariantFrame.

    Scalars come back as ``float``; array bindings give an array of the
    broadcast shape.
    """
    env = bindings.as_dict() if hasattr(bindings, "as_dict") else bindings
    node = e.ast if isinstance(e, ParamExpr) else e
    with np.errstate(all="ignore"):
        out = _eval(node, env)
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out
