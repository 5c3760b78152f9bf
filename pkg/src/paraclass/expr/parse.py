"""Pratt parser for the coefficient grammar.

    expr   := expr ('+'|'-'|'*'|'/') expr | expr '^' expr | '-' expr
            | NAME '(' expr ')' | NAME | INT | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so
``-x^2`` is ``-(x^2)`` while ``x^-2`` is ``x^(-2)``.  Exponents must fold
to rational constants.
"""

from __future__ import annotations

import re
from fractions import Fraction

from ..errors import DomainError, ParseError
from . import core
from .core import CONST, Expr

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),])|(?P<bad>\S))"
)

PARSE_FUNCTIONS = ("exp", "ln", "sin", "cos", "sqrt", "root5")

# binding powers
_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30


class _Tok:
    __slots__ = ("kind", "text", "offset")

    def __init__(self, kind, text, offset):
        self.kind, self.text, self.offset = kind, text, offset


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:  # only trailing whitespace left
            break
        offset = len(text[: m.start(m.lastgroup)].encode("utf-8"))
        kind = m.lastgroup
        value = m.group(kind)
        if kind == "bad":
            raise ParseError(f"unexpected character {value!r}", offset)
        if kind == "num" and not value.isdigit():
            raise ParseError(f"malformed rational {value!r} (use integers or p/q)", offset)
        toks.append(_Tok(kind, value, offset))
        pos = m.end()
    toks.append(_Tok("end", "", len(text.encode("utf-8"))))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text or tok.kind != "op":
            got = tok.text or "end of input"
            raise ParseError(f"expected {text!r}, got {got!r}", tok.offset)
        return tok

    def expression(self, rbp: int = 0) -> Expr:
        tok = self.next()
        left = self.nud(tok)
        while True:
            op = self.peek()
            if op.kind != "op" or op.text not in _BP or _BP[op.text] <= rbp:
                return left
            self.next()
            left = self.led(op, left)

    def nud(self, tok: _Tok) -> Expr:
        if tok.kind == "num":
            return core.const(int(tok.text))
        if tok.kind == "name":
            name = tok.text
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "(":
                if name not in PARSE_FUNCTIONS:
                    raise ParseError(f"unknown identifier {name!r}", tok.offset)
                self.next()
                arg = self.expression()
                self.expect(")")
                try:
                    return core.func(name, arg)
                except DomainError as exc:
                    raise ParseError(str(exc), tok.offset) from None
            if name in PARSE_FUNCTIONS:
                raise ParseError(f"unknown identifier {name!r}", tok.offset)
            if name in core.VARIABLES:
                return core.var(name)
            return core.param(name)
        if tok.kind == "op":
            if tok.text == "(":
                inner = self.expression()
                self.expect(")")
                return inner
            if tok.text == "-":
                return core.mul(-1, self.expression(_UNARY_BP))
            if tok.text == "+":
                return self.expression(_UNARY_BP)
        got = tok.text or "end of input"
        raise ParseError(f"unexpected {got!r}", tok.offset)

    def led(self, op: _Tok, left: Expr) -> Expr:
        if op.text == "^":
            # right associative; the exponent may carry its own unary minus
            right = self.expression(_BP["^"] - 1)
            if right.kind != CONST:
                raise ParseError("exponent must be a rational constant", op.offset)
            try:
                return core.power(left, right.value)
            except DomainError as exc:
                raise ParseError(str(exc), op.offset) from None
        right = self.expression(_BP[op.text])
        if op.text == "+":
            return core.add(left, right)
        if op.text == "-":
            return core.add(left, core.mul(-1, right))
        if op.text == "*":
            return core.mul(left, right)
        if right is core.ZERO:
            kind = "malformed rational" if left.kind == CONST else "division by zero"
            raise ParseError(f"{kind}: zero denominator", op.offset)
        return core.mul(left, core.power(right, -1))


def parse(text: str) -> Expr:
    """Parse ``text`` into a canonical expression."""
    p = _Parser(text)
    if p.peek().kind == "end":
        raise ParseError("empty expression", 0)
    e = p.expression()
    tok = p.peek()
    if tok.kind != "end":
        raise ParseError(f"unexpected {tok.text!r}", tok.offset)
    return e


def parse_rational(text: str) -> Fraction:
    e = parse(text)
    if e.kind != CONST:
        raise ParseError("expected a rational constant", 0)
    return e.value
