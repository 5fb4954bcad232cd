"""Expression mini-language for field components.

Grammar (precedence from loosest to tightest)::

    expr    = term   { ("+" | "-") term } ;
    term    = unary  { ("*" | "/") unary } ;
    unary   = ("-" | "+") unary | power ;
    power   = primary [ "^" unary ] ;
    primary = number | name | name "(" expr { "," expr } ")" | "(" expr ")" ;

so ``-x1^2`` is ``-(x1^2)`` and ``^`` associates to the right. Names are the
variables ``x1`` .. ``xn``, the constants ``pi`` and ``e``, and the functions
listed in ``FUNCTIONS``.
"""

from dataclasses import dataclass
import math
import re

import numpy as np

from ..errors import EvaluationError, ExprError

def _bump(t):
    # exp(-1/(1-t)) for t < 1, exactly zero from t = 1 on
    t = np.asarray(t, dtype=float)
    inside = t < 1
    out = np.zeros(t.shape)
    out[inside] = np.exp(-1.0 / (1.0 - t[inside]))
    return out if out.ndim else float(out)


FUNCTIONS = {
    "exp": (1, np.exp),
    "log": (1, np.log),
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "tanh": (1, np.tanh),
    "sqrt": (1, np.sqrt),
    "abs": (1, np.abs),
    "atan2": (2, np.arctan2),
    "bump": (1, _bump),
}
CONSTANTS = {"pi": math.pi, "e": math.e}

_BINARY = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power}
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written in the source


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source):
    pos = 0
    tokens = []
    while True:
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            stripped = len(source[pos:]) - len(source[pos:].lstrip())
            if pos + stripped >= len(source):
                break
            raise ExprError(f"unexpected character {source[pos + stripped]!r}",
                            _byte_offset(source, pos + stripped))
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), _byte_offset(source, m.start(kind))))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(source, len(source))))
    return tokens


def _byte_offset(source, index):
    return len(source[:index].encode("utf-8"))


class _Parser:
    def __init__(self, source, n):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.n = n

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        kind, value, offset = self.peek()
        if value != text or kind != "op":
            found = "end of input" if kind == "end" else repr(value)
            raise ExprError(f"expected {text!r}, found {found}", offset)
        return self.take()

    def parse(self):
        node = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected {value!r}", offset)
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
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and value == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        kind, value, offset = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(value, offset)
            if value in CONSTANTS:
                return Num(CONSTANTS[value])
            m = re.fullmatch(r"x([1-9]\d*)", value)
            if m:
                idx = int(m.group(1))
                if self.n is not None and idx > self.n:
                    raise ExprError(f"variable {value} exceeds dimension {self.n}", offset)
                return Var(idx)
            raise ExprError(f"unknown identifier {value!r}", offset)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise ExprError(f"expected an operand, found {found}", offset)

    def call(self, name, offset):
        if name not in FUNCTIONS:
            raise ExprError(f"unknown function {name!r}", offset)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == "," and self.peek()[0] == "op":
            self.take()
            args.append(self.expr())
        self.expect(")")
        arity = FUNCTIONS[name][0]
        if len(args) != arity:
            raise ExprError(f"{name} takes {arity} argument(s), got {len(args)}", offset)
        return Call(name, tuple(args))


def parse_expr(source, n=None):
    """Parse ``source`` into an AST.

    With ``n`` given, variables beyond ``x{n}`` are rejected.
    """
    return _Parser(source, n).parse()


def max_variable(node):
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Num):
        return 0
    if isinstance(node, Neg):
        return max_variable(node.operand)
    if isinstance(node, BinOp):
        return max(max_variable(node.left), max_variable(node.right))
    return max((max_variable(a) for a in node.args), default=0)


def to_source(node):
    """Print an AST back to source with only the parentheses it needs."""
    return _print(node, 0)


def _print(node, parent_prec, right=False):
    if isinstance(node, Num):
        text = repr(node.value)
        return f"({text})" if node.value < 0 else text
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(_print(a, 0) for a in node.args)})"
    if isinstance(node, Neg):
        inner = _print(node.operand, _PREC["neg"])
        text = f"-{inner}"
        return f"({text})" if parent_prec > _PREC["neg"] else text
    prec = _PREC[node.op]
    if node.op == "^":
        left = _print(node.left, prec + 1)
        right_s = _print(node.right, _PREC["neg"])
    else:
        left = _print(node.left, prec)
        right_s = _print(node.right, prec + 1)
    text = f"{left} {node.op} {right_s}" if prec < 4 else f"{left}^{right_s}"
    return f"({text})" if prec < parent_prec else text


def compile_expr(node):
    """Turn an AST into a vectorized function of points with shape (..., n)."""

    def build(nd):
        if isinstance(nd, Num):
            value = nd.value
            return lambda x: np.full(x.shape[:-1], value)
        if isinstance(nd, Var):
            i = nd.index - 1
            return lambda x: x[..., i]
        if isinstance(nd, Neg):
            f = build(nd.operand)
            return lambda x: -f(x)
        if isinstance(nd, BinOp):
            fl, fr, op = build(nd.left), build(nd.right), _BINARY[nd.op]
            return lambda x: op(fl(x), fr(x))
        fn = FUNCTIONS[nd.name][1]
        args = [build(a) for a in nd.args]
        return lambda x: fn(*(a(x) for a in args))

    return build(node)


class Expression:
    """Parsed, compiled expression. Calling it evaluates at points (..., n)
    and raises :class:`EvaluationError` on non-finite results."""

    def __init__(self, source, n=None):
        self.ast = parse_expr(source, n) if isinstance(source, str) else source
        self.source = source if isinstance(source, str) else to_source(source)
        self.n = n
        self._fn = compile_expr(self.ast)

    def __repr__(self):
        return f"Expression({self.source!r})"

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        with np.errstate(all="ignore"):
            out = np.asarray(self._fn(points), dtype=float)
        if not np.all(np.isfinite(out)):
            bad = np.argwhere(~np.isfinite(out))[0]
            point = points[tuple(bad)] if points.ndim > 1 else points
            raise EvaluationError(f"{self.source!r} is not finite at {np.asarray(point).tolist()}",
                                  point)
        return out
