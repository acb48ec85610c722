"""Operator-expression language for complex Hamiltonians.

Grammar (no implicit multiplication):

    expr   := ['-'] term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := base ('^' uint)?
    base   := 'x' | 'p' | 'i' | number | ident | 'exp' '(' expr ')' | '(' expr ')'

`x` and `p` are the canonical position/momentum symbols, `i` is the
imaginary unit, and any other identifier is a free parameter that must be
bound to a complex value before the expression is closed.  Exponents are
non-negative integer literals; numbers are plain decimals (`digits[.digits]`,
no exponent notation).

The pipeline is tokenize -> parse -> bind -> canonicalize.  The closed
canonical form is an :class:`OperatorExpr`: an ordered sum of terms, each a
complex coefficient times an ordered word over {x, p, exp(...)}.  Operator
order is never rearranged (x*p and p*x stay distinct words) and powers are
expanded, so `x^3` is stored as the word (X, X, X).
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Iterable, Mapping, Union

__all__ = [
    "BadExponent",
    "ExpFactor",
    "ExpressionError",
    "InvalidCharacter",
    "MalformedNumber",
    "OperatorExpr",
    "Primitive",
    "Term",
    "Token",
    "TokenKind",
    "UnbalancedParen",
    "UnboundIdentifier",
    "UnexpectedToken",
    "bind",
    "canonicalize",
    "parse",
    "parse_hamiltonian",
    "to_source",
    "tokenize",
]

RESERVED = frozenset({"x", "p", "i", "exp"})


# ---------------------------------------------------------------------------
# errors

class ExpressionError(ValueError):
    """Base class for lexing/parsing/binding failures."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


class InvalidCharacter(ExpressionError):
    pass


class MalformedNumber(ExpressionError):
    pass


class UnexpectedToken(ExpressionError):
    pass


class UnbalancedParen(ExpressionError):
    pass


class BadExponent(ExpressionError):
    pass


class UnboundIdentifier(ExpressionError):
    def __init__(self, name: str, position: int | None = None):
        super().__init__(f"unbound identifier '{name}'", position)
        self.name = name


# ---------------------------------------------------------------------------
# tokens

class TokenKind(Enum):
    IDENT = "ident"
    NUMBER = "number"
    PLUS = "plus"
    MINUS = "minus"
    STAR = "star"
    CARET = "caret"
    LPAREN = "lparen"
    RPAREN = "rparen"
    EXPKW = "expkw"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    position: int


_PUNCT = {
    "+": TokenKind.PLUS,
    "-": TokenKind.MINUS,
    "*": TokenKind.STAR,
    "^": TokenKind.CARET,
    "(": TokenKind.LPAREN,
    ")": TokenKind.RPAREN,
}


def tokenize(source: str) -> list[Token]:
    """Lex `source` into tokens; whitespace separates but is not emitted.

    `exp` lexes as the EXPKW keyword, every other letter run as IDENT.
    """
    tokens: list[Token] = []
    pos = 0
    n = len(source)
    while pos < n:
        ch = source[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch in _PUNCT:
            tokens.append(Token(_PUNCT[ch], ch, pos))
            pos += 1
            continue
        if ch.isdigit():
            start = pos
            while pos < n and source[pos].isdigit():
                pos += 1
            if pos < n and source[pos] == ".":
                pos += 1
                if pos >= n or not source[pos].isdigit():
                    raise MalformedNumber(
                        f"malformed number at offset {start}: missing digits after '.'",
                        start,
                    )
                while pos < n and source[pos].isdigit():
                    pos += 1
            if pos < n and source[pos] == ".":
                raise MalformedNumber(
                    f"malformed number at offset {start}: '{source[start:pos + 1]}'",
                    start,
                )
            tokens.append(Token(TokenKind.NUMBER, source[start:pos], start))
            continue
        if ch.isalpha():
            start = pos
            while pos < n and source[pos].isalpha():
                pos += 1
            lexeme = source[start:pos]
            kind = TokenKind.EXPKW if lexeme == "exp" else TokenKind.IDENT
            tokens.append(Token(kind, lexeme, start))
            continue
        raise InvalidCharacter(f"invalid character {ch!r} at offset {pos}", pos)
    return tokens


# ---------------------------------------------------------------------------
# raw syntax tree (pre-binding)

@dataclass(frozen=True)
class Scalar:
    value: complex


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class OpSymbol:
    which: "Primitive"


@dataclass(frozen=True)
class SumNode:
    children: tuple["Node", ...]


@dataclass(frozen=True)
class ProdNode:
    children: tuple["Node", ...]


@dataclass(frozen=True)
class PowNode:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class ExpNode:
    argument: "Node"


Node = Union[Scalar, Param, OpSymbol, SumNode, ProdNode, PowNode, ExpNode]


# ---------------------------------------------------------------------------
# canonical form

class Primitive(Enum):
    X = "x"
    P = "p"


@dataclass(frozen=True)
class ExpFactor:
    """Operator exponential exp(body) as a word factor; body is canonical."""

    body: "OperatorExpr"


Factor = Union[Primitive, ExpFactor]


@dataclass(frozen=True)
class Term:
    coeff: complex
    word: tuple[Factor, ...]


@dataclass(frozen=True)
class OperatorExpr:
    """Ordered sum of complex-coefficient operator words (canonical form)."""

    terms: tuple[Term, ...]

    def is_scalar(self) -> bool:
        return all(not t.word for t in self.terms)


# ---------------------------------------------------------------------------
# recursive-descent parser

class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: TokenKind) -> Token:
        tok = self.peek()
        if tok is None or tok.kind is not kind:
            where = "end of input" if tok is None else f"'{tok.lexeme}' at offset {tok.position}"
            if kind is TokenKind.RPAREN:
                raise UnbalancedParen(f"expected ')' but found {where}",
                                      None if tok is None else tok.position)
            raise UnexpectedToken(f"expected {kind.value} but found {where}",
                                  None if tok is None else tok.position)
        return self.advance()

    def parse_expr(self) -> Node:
        children: list[Node] = []
        negate_first = False
        tok = self.peek()
        if tok is not None and tok.kind is TokenKind.MINUS:
            self.advance()
            negate_first = True
        first = self.parse_term()
        if negate_first:
            first = ProdNode((Scalar(-1.0 + 0j), first))
        children.append(first)
        while True:
            tok = self.peek()
            if tok is None or tok.kind not in (TokenKind.PLUS, TokenKind.MINUS):
                break
            op = self.advance()
            term = self.parse_term()
            if op.kind is TokenKind.MINUS:
                term = ProdNode((Scalar(-1.0 + 0j), term))
            children.append(term)
        return children[0] if len(children) == 1 else SumNode(tuple(children))

    def parse_term(self) -> Node:
        factors = [self.parse_factor()]
        while True:
            tok = self.peek()
            if tok is None or tok.kind is not TokenKind.STAR:
                break
            self.advance()
            factors.append(self.parse_factor())
        return factors[0] if len(factors) == 1 else ProdNode(tuple(factors))

    def parse_factor(self) -> Node:
        base = self.parse_base()
        tok = self.peek()
        if tok is not None and tok.kind is TokenKind.CARET:
            caret = self.advance()
            exp_tok = self.peek()
            if exp_tok is None:
                raise BadExponent(
                    f"missing exponent after '^' at offset {caret.position}", caret.position)
            if exp_tok.kind is TokenKind.MINUS:
                raise BadExponent(
                    f"negative exponent at offset {exp_tok.position}", exp_tok.position)
            if exp_tok.kind is not TokenKind.NUMBER:
                raise BadExponent(
                    f"exponent must be an integer literal, found '{exp_tok.lexeme}' "
                    f"at offset {exp_tok.position}", exp_tok.position)
            if "." in exp_tok.lexeme:
                raise BadExponent(
                    f"fractional exponent '{exp_tok.lexeme}' at offset {exp_tok.position}",
                    exp_tok.position)
            self.advance()
            return PowNode(base, int(exp_tok.lexeme))
        return base

    def parse_base(self) -> Node:
        tok = self.peek()
        if tok is None:
            raise UnexpectedToken("unexpected end of input")
        if tok.kind is TokenKind.NUMBER:
            self.advance()
            return Scalar(complex(float(tok.lexeme)))
        if tok.kind is TokenKind.IDENT:
            self.advance()
            if tok.lexeme == "x":
                return OpSymbol(Primitive.X)
            if tok.lexeme == "p":
                return OpSymbol(Primitive.P)
            if tok.lexeme == "i":
                return Scalar(1j)
            return Param(tok.lexeme)
        if tok.kind is TokenKind.EXPKW:
            self.advance()
            self.expect(TokenKind.LPAREN)
            body = self.parse_expr()
            self.expect(TokenKind.RPAREN)
            return ExpNode(body)
        if tok.kind is TokenKind.LPAREN:
            self.advance()
            inner = self.parse_expr()
            self.expect(TokenKind.RPAREN)
            return inner
        if tok.kind is TokenKind.RPAREN:
            raise UnbalancedParen(
                f"unmatched ')' at offset {tok.position}", tok.position)
        raise UnexpectedToken(
            f"unexpected '{tok.lexeme}' at offset {tok.position}", tok.position)


def parse(tokens: list[Token]) -> Node:
    """Parse a token stream into a raw (possibly parameterized) syntax tree."""
    if not tokens:
        raise UnexpectedToken("empty expression")
    parser = _Parser(tokens)
    tree = parser.parse_expr()
    trailing = parser.peek()
    if trailing is not None:
        if trailing.kind is TokenKind.RPAREN:
            raise UnbalancedParen(
                f"unmatched ')' at offset {trailing.position}", trailing.position)
        raise UnexpectedToken(
            f"unexpected '{trailing.lexeme}' at offset {trailing.position}",
            trailing.position)
    return tree


# ---------------------------------------------------------------------------
# binding and canonicalization

def bind(expr: Node | OperatorExpr, params: Mapping[str, complex] | None = None) -> OperatorExpr:
    """Substitute parameter values and return the closed canonical form.

    Scalar-only subexpressions (including scalar-valued exp(...)) fold into
    term coefficients.  Raises UnboundIdentifier if a parameter remains free
    and ValueError for binding keys that are reserved or not identifiers.
    """
    params = dict(params or {})
    for key in params:
        if not (key.isalpha() and key.isascii()):
            raise ValueError(f"parameter name {key!r} is not a valid identifier")
        if key in RESERVED:
            raise ValueError(f"parameter name {key!r} is reserved")
    if isinstance(expr, OperatorExpr):
        return canonicalize(expr)
    return canonicalize(_substitute(expr, params))


def _substitute(node: Node, params: Mapping[str, complex]) -> Node:
    if isinstance(node, Param):
        if node.name not in params:
            raise UnboundIdentifier(node.name)
        return Scalar(complex(params[node.name]))
    if isinstance(node, SumNode):
        return SumNode(tuple(_substitute(c, params) for c in node.children))
    if isinstance(node, ProdNode):
        return ProdNode(tuple(_substitute(c, params) for c in node.children))
    if isinstance(node, PowNode):
        return PowNode(_substitute(node.base, params), node.exponent)
    if isinstance(node, ExpNode):
        return ExpNode(_substitute(node.argument, params))
    return node


def canonicalize(expr: Node | OperatorExpr) -> OperatorExpr:
    """Flatten a closed expression to an ordered sum of coefficient*word terms.

    Idempotent on canonical input.  Factor order is preserved exactly (the
    word for x*p differs from p*x), powers are expanded, and terms whose
    coefficient is exactly zero are dropped.
    """
    if isinstance(expr, OperatorExpr):
        terms = tuple(t for t in expr.terms if t.coeff != 0)
        return OperatorExpr(terms)
    terms = tuple(t for t in _flatten(expr) if t.coeff != 0)
    return OperatorExpr(terms)


def _flatten(node: Node) -> list[Term]:
    if isinstance(node, Scalar):
        return [Term(node.value, ())]
    if isinstance(node, OpSymbol):
        return [Term(1.0 + 0j, (node.which,))]
    if isinstance(node, Param):
        raise UnboundIdentifier(node.name)
    if isinstance(node, SumNode):
        out: list[Term] = []
        for child in node.children:
            out.extend(_flatten(child))
        return out
    if isinstance(node, ProdNode):
        acc = [Term(1.0 + 0j, ())]
        for child in node.children:
            rhs = _flatten(child)
            acc = [
                Term(a.coeff * b.coeff, a.word + b.word)
                for a in acc
                for b in rhs
            ]
        return acc
    if isinstance(node, PowNode):
        if node.exponent == 0:
            return [Term(1.0 + 0j, ())]
        acc = base = _flatten(node.base)
        for _ in range(node.exponent - 1):
            acc = [
                Term(a.coeff * b.coeff, a.word + b.word)
                for a in acc
                for b in base
            ]
        return acc
    if isinstance(node, ExpNode):
        body = OperatorExpr(tuple(t for t in _flatten(node.argument) if t.coeff != 0))
        if body.is_scalar():
            value = sum((t.coeff for t in body.terms), 0j)
            return [Term(cmath.exp(value), ())]
        return [Term(1.0 + 0j, (ExpFactor(body),))]
    raise TypeError(f"not an expression node: {node!r}")


def parse_hamiltonian(source: str, params: Mapping[str, complex] | None = None) -> OperatorExpr:
    """tokenize + parse + bind in one step; the usual entry point."""
    return bind(parse(tokenize(source)), params)


# ---------------------------------------------------------------------------
# pretty-printing (inverse of parse_hamiltonian on canonical forms)

def _format_real(value: float) -> str:
    # grammar numbers are plain decimals, so scientific notation must be
    # expanded; Decimal(repr(v)) keeps the shortest exact round-trip digits
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    text = repr(value)
    if "e" in text or "E" in text:
        return format(Decimal(text), "f")
    return text


def _format_coeff(coeff: complex) -> str | None:
    """Scalar prefix for a non-empty word; None means coefficient one."""
    if coeff.imag == 0:
        if coeff.real == 1:
            return None
        return _format_real(coeff.real)
    if coeff.real == 0:
        if coeff.imag == 1:
            return "i"
        return f"{_format_real(coeff.imag)}*i"
    sign = "+" if coeff.imag >= 0 else "-"
    return f"({_format_real(coeff.real)}{sign}{_format_real(abs(coeff.imag))}*i)"


def _format_word(word: Iterable[Factor]) -> str:
    pieces: list[str] = []
    run: tuple[Factor, int] | None = None
    for factor in tuple(word) + (None,):  # type: ignore[operator]
        if run is not None and factor == run[0]:
            run = (run[0], run[1] + 1)
            continue
        if run is not None:
            base, count = run
            if isinstance(base, Primitive):
                text = base.value
            else:
                text = f"exp({to_source(base.body)})"
            pieces.append(text if count == 1 else f"{text}^{count}")
        run = (factor, 1) if factor is not None else None
    return "*".join(pieces)


def to_source(expr: OperatorExpr) -> str:
    """Render a canonical expression; reparsing reproduces it exactly."""
    if not expr.terms:
        return "0"
    rendered: list[tuple[bool, str]] = []
    for term in expr.terms:
        coeff = term.coeff
        negative = coeff.real < 0 or (coeff.real == 0 and coeff.imag < 0)
        if negative:
            coeff = -coeff
        prefix = _format_coeff(coeff)
        if term.word:
            body = _format_word(term.word)
            text = body if prefix is None else f"{prefix}*{body}"
        else:
            text = prefix if prefix is not None else "1"
        rendered.append((negative, text))
    first_neg, first_text = rendered[0]
    out = ("-" if first_neg else "") + first_text
    for negative, text in rendered[1:]:
        out += (" - " if negative else " + ") + text
    return out
