"""Arithmetic expressions over the plate coordinates x1, x2.

Grammar (standard precedence, ``^`` binds tighter than unary minus and is
right-associative)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | "pi" | "x1" | "x2" | FUNC "(" expr ")" | "(" expr ")"
    FUNC   := "cos" | "sin" | "exp"

Parsed expressions compile to numpy closures evaluated on (N, 2) point arrays.
"""

import re
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np

from platelimit.exceptions import ExpressionError

Evaluator = Callable[[np.ndarray], np.ndarray]

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)

FUNCTIONS = {"cos": np.cos, "sin": np.sin, "exp": np.exp}
VARIABLES = {"x1": 0, "x2": 1}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    position = 0
    while position < len(text):
        if text[position:].strip() == "":
            break
        match = _TOKEN.match(text, position)
        if match is None or match.end() == position:
            offset = len(text[position:]) - len(text[position:].lstrip())
            raise ExpressionError(text, position + offset, f"unexpected character {text[position + offset]!r}")
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append(Token(kind, match.group(kind), start))
        position = match.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.index = 0
        self.uses_coordinates = False

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.current
        self.index += 1
        return token

    def error(self, message: str, token: Token = None) -> ExpressionError:
        token = token or self.current
        return ExpressionError(self.text, token.position, message)

    def expect(self, op: str) -> None:
        if self.current.text != op:
            found = self.current.text or "end of expression"
            raise self.error(f"expected {op!r}, found {found!r}")
        self.advance()

    def parse(self) -> Evaluator:
        node = self.expr()
        if self.current.kind != "end":
            raise self.error(f"unexpected {self.current.text!r}")
        return node

    def expr(self) -> Evaluator:
        node = self.term()
        while self.current.text in ("+", "-"):
            op = self.advance().text
            rhs = self.term()
            node = _binary(np.add if op == "+" else np.subtract, node, rhs)
        return node

    def term(self) -> Evaluator:
        node = self.unary()
        while self.current.text in ("*", "/"):
            op = self.advance().text
            rhs = self.unary()
            node = _binary(np.multiply if op == "*" else np.divide, node, rhs)
        return node

    def unary(self) -> Evaluator:
        if self.current.text in ("+", "-"):
            op = self.advance().text
            operand = self.unary()
            if op == "+":
                return operand
            return lambda p: np.negative(operand(p))
        return self.power()

    def power(self) -> Evaluator:
        base = self.atom()
        if self.current.text == "^":
            self.advance()
            exponent = self.unary()
            return _binary(np.power, base, exponent)
        return base

    def atom(self) -> Evaluator:
        token = self.current
        if token.kind == "number":
            self.advance()
            value = float(token.text)
            return lambda p: np.full(len(p), value)
        if token.kind == "name":
            self.advance()
            if token.text == "pi":
                return lambda p: np.full(len(p), np.pi)
            if token.text in VARIABLES:
                self.uses_coordinates = True
                column = VARIABLES[token.text]
                return lambda p: np.asarray(p[:, column], dtype=float)
            if token.text in FUNCTIONS:
                func = FUNCTIONS[token.text]
                if self.current.text != "(":
                    raise self.error(f"function {token.text!r} needs parenthesised arguments")
                self.advance()
                argument = self.expr()
                self.expect(")")
                return lambda p: func(argument(p))
            raise self.error(f"unknown name {token.text!r}", token)
        if token.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = token.text or "end of expression"
        raise self.error(f"expected a number, name or '(' but found {found!r}", token)


def _binary(op, lhs: Evaluator, rhs: Evaluator) -> Evaluator:
    return lambda p: op(lhs(p), rhs(p))


@dataclass(frozen=True)
class Expression:
    """A parsed expression; immutable and safe to share."""

    text: str
    uses_coordinates: bool = field(compare=False)
    _evaluate: Evaluator = field(compare=False, repr=False)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        with np.errstate(all="ignore"):
            return self._evaluate(points)

    def __str__(self) -> str:
        return self.text


def parse_expression(text: str) -> Expression:
    """Parse ``text`` or raise :class:`ExpressionError` with the failing position."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError(str(text), 0, "empty expression")
    parser = _Parser(text)
    evaluator = parser.parse()
    return Expression(text, parser.uses_coordinates, evaluator)


def evaluate_checked(expression: Expression, points: np.ndarray, what: str = "expression") -> np.ndarray:
    """Evaluate and reject non-finite results, naming the first offending point."""
    values = expression(points)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        x1, x2 = np.atleast_2d(points)[bad[0]]
        raise ExpressionError(
            expression.text, 0, f"{what} is not finite at (x1={x1:.6g}, x2={x2:.6g})"
        )
    return values

