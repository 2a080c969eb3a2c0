"""Tiny arithmetic expression language used by configs and the CLI.

Grammar (EBNF)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = "-" , unary | power ;
    power   = atom , [ "^" , unary ] ;           (* right associative *)
    atom    = number | name | call | "(" , expr , ")" ;
    call    = func , "(" , expr , { "," , expr } , ")" ;
    number  = digits , [ "." , [digits] ] , [ ("e" | "E") , ["+" | "-"] , digits ]
            | "." , digits , [ exponent ] ;
    name    = "t" | "x" | "y" | "z" ;
    func    = "abs" | "min" | "max" | "exp" | "log" | "sqrt" ;

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.
Evaluation works elementwise on numpy arrays as well as on floats.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

VARIABLES = frozenset("txyz")

# name -> (min arity, max arity)
FUNCTIONS = {
    "abs": (1, 1),
    "min": (2, None),
    "max": (2, None),
    "exp": (1, 1),
    "log": (1, 1),
    "sqrt": (1, 1),
}


class ExprError(ValueError):
    """Parse-time problem, carrying the byte offset into the source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ExprDomainError(ArithmeticError):
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

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


def _tokenize(source: str):
    pos = 0
    tokens = []
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            bad = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ExprError(f"unexpected character {source[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, allowed: frozenset):
        self.tokens = _tokenize(source)
        self.i = 0
        self.allowed = allowed

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, value, offset = self.take()
        if value != text or kind != "op":
            found = value or "end of input"
            raise ExprError(f"expected {text!r}, found {found!r}", offset)

    def parse(self) -> Node:
        node = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected {value!r}", offset)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, value, offset = self.take()
        if kind == "num":
            value = float(value)
            if not np.isfinite(value):
                raise ExprError("number literal overflows", offset)
            return Num(value)
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                return self.call(value, offset)
            if value in FUNCTIONS:
                raise ExprError(f"function {value!r} needs arguments", offset)
            if value not in VARIABLES:
                raise ExprError(f"unknown variable {value}", offset)
            if value not in self.allowed:
                raise ExprError(f"variable {value} not allowed here", offset)
            return Var(value)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprError(f"unexpected {value or 'end of input'!r}", offset)

    def call(self, name, offset) -> Node:
        if name not in FUNCTIONS:
            raise ExprError(f"unknown function {name}", offset)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        lo, hi = FUNCTIONS[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ExprError(f"wrong number of arguments to {name}", offset)
        return Call(name, tuple(args))


def parse(source: str, allowed_vars=VARIABLES) -> Node:
    """Parse ``source`` into an AST, accepting only ``allowed_vars``."""
    return _Parser(source, frozenset(allowed_vars)).parse()


def variables(node: Node) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Call):
        return set().union(*(variables(a) for a in node.args))
    return set()


def to_text(node: Node) -> str:
    """Canonical, fully parenthesized source text."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)}{node.op}{to_text(node.right)})"
    return f"{node.func}({','.join(to_text(a) for a in node.args)})"


def _check(ok, message):
    if not np.all(ok):
        raise ExprDomainError(message)


def _eval(node: Node, env):
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return np.negative(_eval(node.operand, env))
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return np.add(a, b)
        if node.op == "-":
            return np.subtract(a, b)
        if node.op == "*":
            return np.multiply(a, b)
        if node.op == "/":
            _check(b != 0, "division by zero")
            return np.divide(a, b)
        _check(~((a == 0) & (b < 0)), "zero raised to a negative power")
        _check((a >= 0) | (np.floor(b) == b), "negative base with fractional exponent")
        with np.errstate(over="ignore"):
            return np.power(a, b)
    args = [_eval(a, env) for a in node.args]
    if node.func == "abs":
        return np.abs(args[0])
    if node.func == "min":
        out = args[0]
        for a in args[1:]:
            out = np.minimum(out, a)
        return out
    if node.func == "max":
        out = args[0]
        for a in args[1:]:
            out = np.maximum(out, a)
        return out
    if node.func == "exp":
        with np.errstate(over="ignore"):
            return np.exp(args[0])
    if node.func == "log":
        _check(args[0] > 0, "log of a non-positive number")
        return np.log(args[0])
    _check(args[0] >= 0, "sqrt of a negative number")
    return np.sqrt(args[0])


def evaluate(node: Node, bindings: Mapping[str, object]):
    """Evaluate ``node``; bindings may be floats or numpy arrays.

    Returns a float when every binding is scalar, otherwise an array.
    Raises ExprDomainError instead of producing inf or nan.
    """
    needed = variables(node)
    missing = needed - set(bindings)
    if missing:
        raise KeyError(f"unbound variables: {sorted(missing)}")
    env = {k: np.asarray(v, dtype=np.float64) for k, v in bindings.items()}
    finite_in = all(np.all(np.isfinite(env[k])) for k in needed)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = _eval(node, env)
    if finite_in:
        _check(np.isfinite(out), "non-finite result")
    if np.ndim(out) == 0:
        return float(out)
    return out


class Compiled:
    """A parsed expression bound to its source text; callable by keyword."""

    def __init__(self, source: str, allowed_vars=VARIABLES):
        self.source = source
        self.ast = parse(source, allowed_vars)

    def __call__(self, **bindings):
        return evaluate(self.ast, bindings)

    def __repr__(self):
        return f"Compiled({self.source!r})"
