"""Arithmetic expressions and comparison predicates for flows, guards and resets.

Grammar (left-associative, whitespace-insensitive)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := number | ident | 'exp' '(' expr ')' | '(' expr ')' | '-' factor

A predicate is ``true`` or a conjunction of comparisons joined by ``and``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at column {pos + 1}")
        self.pos = pos


class NumericError(ArithmeticError):
    """Expression evaluation failed (division by zero, overflow)."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Exp:
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Exp]

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|&&|[-+*/()<>])
""", re.VERBOSE)

RESERVED = frozenset({"exp", "and", "true"})


def tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value:
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)

    def finish(self):
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if text == "exp":
            self.expect("(")
            node = self.expr()
            self.expect(")")
            return Exp(node)
        if kind == "ident" and text not in RESERVED:
            return Var(text)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if text == "-":
            return Neg(self.factor())
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"expected a number, variable or '(', found {found}", pos)


def parse_expr(text: str) -> Expr:
    p = _Parser(text)
    node = p.expr()
    p.finish()
    return node


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    return free_vars(e.arg)


def evaluate(e: Expr, env: Mapping[str, float]) -> float:
    try:
        return _eval(e, env)
    except ZeroDivisionError:
        raise NumericError("division by zero") from None
    except OverflowError:
        raise NumericError("overflow in exp") from None


def _eval(e, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, Exp):
        return math.exp(_eval(e.arg, env))
    a, b = _eval(e.left, env), _eval(e.right, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    return a / b


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def format_number(x: float) -> str:
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def to_str(e: Expr) -> str:
    """Print with the fewest parentheses that parse back to the same tree."""
    return _fmt(e, 0)


def _fmt(e, ctx: int) -> str:
    if isinstance(e, Num):
        return format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Exp):
        return f"exp({_fmt(e.arg, 0)})"
    if isinstance(e, Neg):
        return "-" + _fmt(e.arg, 3)
    prec = _PREC[e.op]
    s = f"{_fmt(e.left, prec)} {e.op} {_fmt(e.right, prec + 1)}"
    return f"({s})" if prec < ctx else s


def _py(e, names: Mapping[str, str]) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return names[e.name]
    if isinstance(e, Neg):
        return f"(-{_py(e.arg, names)})"
    if isinstance(e, Exp):
        return f"_exp({_py(e.arg, names)})"
    return f"({_py(e.left, names)} {e.op} {_py(e.right, names)})"


def compile_tuple(exprs: Sequence[Expr], argnames: Sequence[str]) -> Callable[..., tuple]:
    """Compile ``exprs`` into ``f(*args) -> tuple`` with positional ``argnames``.

    Raises :class:`NumericError` at call time on division by zero/overflow.
    """
    names = {n: f"_a{i}" for i, n in enumerate(argnames)}
    missing = set().union(*(free_vars(e) for e in exprs)) - set(names) if exprs else set()
    if missing:
        raise KeyError(f"undeclared variables {sorted(missing)}")
    body = ", ".join(_py(e, names) for e in exprs)
    src = f"lambda {', '.join(names.values())}: ({body}{',' if len(exprs) == 1 else ''})"
    raw = eval(src, {"_exp": math.exp})

    def f(*args):
        try:
            return raw(*args)
        except ZeroDivisionError:
            raise NumericError("division by zero") from None
        except OverflowError:
            raise NumericError("overflow in exp") from None

    return f


@dataclass(frozen=True)
class Comparison:
    lhs: Expr
    op: str
    rhs: Expr

    def margin_expr(self) -> Expr:
        """Non-negative (positive for strict ops) exactly when the comparison holds."""
        if self.op in ("<=", "<"):
            return BinOp("-", self.rhs, self.lhs)
        return BinOp("-", self.lhs, self.rhs)

    @property
    def strict(self) -> bool:
        return self.op in ("<", ">")


@dataclass(frozen=True)
class Predicate:
    """Conjunction of comparisons; the empty conjunction is ``true``."""

    atoms: tuple[Comparison, ...] = ()

    def holds(self, env: Mapping[str, float], slack: float = 0.0) -> bool:
        for c in self.atoms:
            m = evaluate(c.margin_expr(), env)
            if m < -slack or (c.strict and m <= -slack):
                return False
        return True

    def free_vars(self) -> set[str]:
        return set().union(*(free_vars(c.lhs) | free_vars(c.rhs) for c in self.atoms))

    def __str__(self):
        if not self.atoms:
            return "true"
        return " and ".join(f"{to_str(c.lhs)} {c.op} {to_str(c.rhs)}" for c in self.atoms)


TRUE = Predicate()


def parse_predicate(text: str) -> Predicate:
    p = _Parser(text)
    if p.peek()[1] == "true":
        p.take()
        p.finish()
        return TRUE
    atoms = []
    while True:
        lhs = p.expr()
        kind, op, pos = p.take()
        if op not in ("<=", ">=", "<", ">"):
            found = "end of input" if kind == "end" else repr(op)
            raise ExprSyntaxError(f"expected a comparison operator, found {found}", pos)
        atoms.append(Comparison(lhs, op, p.expr()))
        if p.peek()[1] not in ("and", "&&"):
            break
        p.take()
    p.finish()
    return Predicate(tuple(atoms))


def compile_predicate(pred: Predicate, argnames: Sequence[str]) -> Callable[..., bool]:
    """Compile to ``f(*args, slack=0.0) -> bool``."""
    if not pred.atoms:
        return lambda *args, slack=0.0: True
    margins = compile_tuple([c.margin_expr() for c in pred.atoms], argnames)
    strict = [c.strict for c in pred.atoms]

    def f(*args, slack=0.0):
        for m, s in zip(margins(*args), strict):
            if m < -slack or (s and m <= -slack):
                return False
        return True

    return f
