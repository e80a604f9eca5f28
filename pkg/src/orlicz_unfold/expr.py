"""A tiny arithmetic expression language for test functions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := number | var | const | func '(' expr ')' | '(' expr ')' | '-' factor

Variables are ``x0 .. x{d-1}`` and ``y0 .. y{d-1}`` (plain ``x``/``y`` when
``d == 1``), constants are ``pi`` and ``e``, functions are ``sin``, ``cos``
and ``exp``. Evaluation is vectorised over numpy arrays.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

from ._validation import ParseError

__all__ = ["parse_expression", "Expression", "Num", "Var", "Neg", "BinOp", "Call"]

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*(),]))"
)


@dataclass(frozen=True)
class Num:
    value: float

    def eval(self, env):
        return self.value


@dataclass(frozen=True)
class Var:
    kind: str  # 'x' or 'y'
    index: int

    def eval(self, env):
        coords = env.get(self.kind)
        if coords is None:
            raise ParseError(f"variable {self.kind}{self.index} is not available here")
        return coords[self.index]


@dataclass(frozen=True)
class Neg:
    arg: object

    def eval(self, env):
        return -self.arg.eval(env)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object

    def eval(self, env):
        a, b = self.left.eval(env), self.right.eval(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        return a * b


@dataclass(frozen=True)
class Call:
    func: str
    arg: object

    def eval(self, env):
        return FUNCTIONS[self.func](self.arg.eval(env))


@dataclass(frozen=True)
class Expression:
    """Parsed expression with its source text and dimension."""

    source: str
    dim: int
    root: object

    def variables(self):
        found = set()
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Var):
                found.add((node.kind, node.index))
            elif isinstance(node, (Neg, Call)):
                stack.append(node.arg)
            elif isinstance(node, BinOp):
                stack.extend((node.left, node.right))
        return found

    def uses(self, kind):
        return any(k == kind for k, _ in self.variables())

    def __call__(self, x=None, y=None):
        """Evaluate with coordinate sequences ``x`` and/or ``y`` (length ``dim`` each)."""
        env = {}
        if x is not None:
            env["x"] = list(x)
        if y is not None:
            env["y"] = list(y)
        return np.asarray(self.root.eval(env), dtype=float)


class _Parser:
    def __init__(self, src, dim):
        self.src = src
        self.dim = dim
        self.tokens = self._tokenize(src)
        self.pos = 0

    @staticmethod
    def _tokenize(src):
        tokens = []
        i = 0
        while i < len(src):
            if src[i].isspace():
                i += 1
                continue
            m = _TOKEN.match(src, i)
            if m is None or m.end() == i:
                raise ParseError(f"unexpected character {src[i]!r}", i)
            kind = m.lastgroup
            start = m.start(kind)
            tokens.append((kind, m.group(kind), start))
            i = m.end()
        tokens.append(("end", "", len(src)))
        return tokens

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text, off = self.take()
        if text != value or kind == "end":
            raise ParseError(f"expected {value!r}, found {text or 'end of input'!r}", off)

    def parse(self):
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", off)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            node = BinOp("*", node, self.factor())
        return node

    def factor(self):
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "op" and text == "-":
            return Neg(self.factor())
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if text in FUNCTIONS:
                return self.call(text, off)
            if text in CONSTANTS:
                return Num(CONSTANTS[text])
            return self.variable(text, off)
        raise ParseError(f"unexpected {text or 'end of input'!r}", off)

    def call(self, name, off):
        kind, text, pos = self.peek()
        if text != "(":
            raise ParseError(f"function {name!r} takes exactly 1 argument in parentheses", off)
        self.take()
        arg = self.expr()
        kind, text, pos = self.peek()
        if text == ",":
            raise ParseError(f"function {name!r} takes exactly 1 argument", pos)
        self.expect(")")
        return Call(name, arg)

    def variable(self, name, off):
        m = re.fullmatch(r"([xy])(\d*)", name)
        if m:
            kind, digits = m.groups()
            if digits == "" and self.dim == 1:
                return Var(kind, 0)
            if digits and int(digits) < self.dim:
                return Var(kind, int(digits))
        raise ParseError(f"unknown variable {name!r} for dimension {self.dim}", off)


def parse_expression(src, dim):
    """Parse ``src`` into an :class:`Expression` over ``dim`` coordinates."""
    if not src or not src.strip():
        raise ParseError("empty expression", 0)
    if dim < 1:
        raise ParseError(f"dimension must be positive, got {dim}")
    return Expression(src, dim, _Parser(src, dim).parse())
