"""Recursive-descent parser for custom diagonal metric coefficients.

Grammar: real literals, coordinate identifiers x1..x{n-1} and t, operators
+ - * / ^ (caret is right-associative exponentiation), parentheses, and the
functions sin cos exp log sqrt pow.  Whitespace is ignored.  Parse errors
carry the offending position and the expected token classes.
"""

from __future__ import annotations

import math
import re

from .errors import ExpressionParseError

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

FUNCTIONS = {
    "sin": (1, math.sin),
    "cos": (1, math.cos),
    "exp": (1, math.exp),
    "log": (1, math.log),
    "sqrt": (1, math.sqrt),
    "pow": (2, lambda a, b: a ** b),
}


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ExpressionParseError(
                f"unexpected character {stripped[0]!r}",
                len(text) - len(stripped),
                ("number", "identifier", "operator"))
        pos = m.end()
        if m.group("num") is not None:
            tokens.append(("num", float(text[m.start("num"):m.end()]), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    """Pratt-free recursive descent over the token list."""

    def __init__(self, text, names):
        self.text = text
        self.tokens = _tokenize(text)
        self.names = names  # identifier -> coordinate index
        self.idx = 0

    def peek(self):
        return self.tokens[self.idx]

    def advance(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect_op(self, symbol):
        kind, value, pos = self.peek()
        if kind != "op" or value != symbol:
            raise ExpressionParseError(
                f"found {value!r}" if value is not None else "unexpected end of input",
                pos, (repr(symbol),))
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExpressionParseError(
                f"trailing input {value!r}", pos, ("operator", "end of input"))
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                rhs = self.term()
                node = (("add" if value == "+" else "sub"), node, rhs)
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                rhs = self.unary()
                node = (("mul" if value == "*" else "div"), node, rhs)
            else:
                return node

    def unary(self):
        kind, value, _ = self.peek()
        if kind == "op" and value in "+-":
            self.advance()
            node = self.unary()
            return node if value == "+" else ("neg", node)
        return self.power()

    def power(self):
        base = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            # right-associative: a^b^c = a^(b^c)
            return ("pow", base, self.unary())
        return base

    def atom(self):
        kind, value, pos = self.peek()
        if kind == "num":
            self.advance()
            return ("const", value)
        if kind == "ident":
            self.advance()
            nkind, nvalue, _ = self.peek()
            if nkind == "op" and nvalue == "(":
                if value not in FUNCTIONS:
                    raise ExpressionParseError(
                        f"unknown function {value!r}", pos,
                        tuple(sorted(FUNCTIONS)))
                arity, _ = FUNCTIONS[value]
                self.advance()
                args = [self.expr()]
                while len(args) < arity:
                    self.expect_op(",")
                    args.append(self.expr())
                self.expect_op(")")
                return ("call", value, args)
            if value not in self.names:
                raise ExpressionParseError(
                    f"unknown identifier {value!r}", pos,
                    tuple(sorted(self.names)))
            return ("var", self.names[value])
        if kind == "op" and value == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionParseError(
            f"found {value!r}" if value is not None else "unexpected end of input",
            pos, ("number", "identifier", "'('"))


def _evaluate(node, x):
    op = node[0]
    if op == "const":
        return node[1]
    if op == "var":
        return float(x[node[1]])
    if op == "neg":
        return -_evaluate(node[1], x)
    if op == "add":
        return _evaluate(node[1], x) + _evaluate(node[2], x)
    if op == "sub":
        return _evaluate(node[1], x) - _evaluate(node[2], x)
    if op == "mul":
        return _evaluate(node[1], x) * _evaluate(node[2], x)
    if op == "div":
        return _evaluate(node[1], x) / _evaluate(node[2], x)
    if op == "pow":
        return _evaluate(node[1], x) ** _evaluate(node[2], x)
    if op == "call":
        _, fn = FUNCTIONS[node[1]]
        return fn(*(_evaluate(arg, x) for arg in node[2]))
    raise AssertionError(f"unhandled node {op}")


def coordinate_names(dimension):
    """Identifier map x1..x{n-1}, t for an n-dimensional chart."""
    names = {f"x{i + 1}": i for i in range(dimension - 1)}
    names["t"] = dimension - 1
    return names


def compile_expression(text, dimension):
    """Parse one expression into a callable of the coordinate array."""
    tree = _Parser(text, coordinate_names(dimension)).parse()

    def fn(x):
        return _evaluate(tree, x)

    return fn


def compile_diagonal_metric(coefficients, dimension):
    """Compile n coefficient expressions into a diagonal metric evaluator."""
    import numpy as np

    if len(coefficients) != dimension:
        raise ExpressionParseError(
            f"need {dimension} coefficients, got {len(coefficients)}", 0)
    fns = [compile_expression(text, dimension) for text in coefficients]

    def metric(x):
        return np.diag([fn(x) for fn in fns])

    return metric
