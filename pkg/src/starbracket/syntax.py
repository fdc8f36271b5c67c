"""Text and JSON forms of phase-space expressions.

Grammar (``^`` binds tightest, then unary minus, then ``* /``, then ``+ -``;
all binary operators associate to the left)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' INT)*
    atom   := INT | NAME | '(' expr ')'

Names are ``i``, ``hbar``, ``s``, ``u`` and ``x<k>``, ``p<k>`` with
``1 <= k <= N``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from gmpy2 import mpq

from .ring import (
    Context,
    DivisionByZero,
    GaussianRational,
    Monomial,
    PhaseExpr,
    Poly,
    RingError,
    divide,
)

JSON_SCHEMA_VERSION = 1


class ParseError(ValueError):
    def __init__(self, message: str, text: str = "", pos: int = 0):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.column = col


_TOKEN = re.compile(r"\s*(?:(?P<int>[0-9]+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    end = len(text)
    while pos < end:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        if kind is None:
            break
        tokens.append(Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


# AST nodes ---------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Const:
    name: str  # i, hbar, s, u


@dataclass(frozen=True)
class Var:
    name: str  # x<k> or p<k>


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


class _Parser:
    def __init__(self, text: str, ctx: Context):
        self.text = text
        self.ctx = ctx
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def fail(self, msg, tok=None):
        tok = tok or self.tok
        raise ParseError(msg, self.text, tok.pos)

    def take(self, kind, text=None) -> Token:
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            got = t.text or "end of input"
            self.fail(f"expected {want!r}, found {got!r}")
        self.i += 1
        return t

    def parse(self):
        if self.tok.kind == "end":
            self.fail("empty expression")
        node = self.expr()
        if self.tok.kind != "end":
            self.fail(f"unexpected {self.tok.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take("op").text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.take("op").text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.take("op")
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        while self.tok.kind == "op" and self.tok.text == "^":
            self.take("op")
            if self.tok.kind != "int":
                self.fail("exponent must be a non-negative integer literal")
            node = BinOp("^", node, Num(int(self.take("int").text)))
        return node

    def atom(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return Num(int(t.text))
        if t.kind == "name":
            self.i += 1
            if t.text in ("i", "hbar", "s", "u"):
                return Const(t.text)
            m = re.fullmatch(r"([xp])([0-9]+)", t.text)
            if m is None:
                self.fail(f"unknown identifier {t.text!r}", t)
            k = int(m.group(2))
            if not 1 <= k <= self.ctx.n:
                self.fail(f"index {k} out of range 1..{self.ctx.n} in {t.text!r}", t)
            return Var(f"{m.group(1)}{k}")
        if t.kind == "op" and t.text == "(":
            self.i += 1
            node = self.expr()
            self.take("op", ")")
            return node
        self.fail(f"unexpected {t.text or 'end of input'!r}")


def parse_ast(text: str, ctx: Context):
    if not isinstance(text, str):
        raise ParseError("input is not text")
    return _Parser(text, ctx).parse()


def lower(node, ctx: Context) -> PhaseExpr:
    """Evaluate an AST into a PhaseExpr."""
    if isinstance(node, Num):
        return PhaseExpr.const(ctx, node.value)
    if isinstance(node, Const):
        return {
            "i": PhaseExpr.i,
            "hbar": PhaseExpr.hbar,
            "s": PhaseExpr.s,
            "u": PhaseExpr.u,
        }[node.name](ctx)
    if isinstance(node, Var):
        return PhaseExpr.var(ctx, node.name)
    if isinstance(node, Neg):
        return -lower(node.operand, ctx)
    left = lower(node.left, ctx)
    if node.op == "^":
        return left ** node.right.value
    right = lower(node.right, ctx)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    return divide(left, right)


def parse(text: str, ctx: Context) -> PhaseExpr:
    """Parse text into a PhaseExpr; raises ParseError on any malformed input."""
    node = parse_ast(text, ctx)
    try:
        return lower(node, ctx)
    except DivisionByZero:
        raise ParseError("division by zero", text, 0) from None
    except RingError as exc:
        raise ParseError(str(exc), text, 0) from None


# rendering -----------------------------------------------------------------


def _monomial_text(ctx: Context, m: Monomial) -> str:
    parts = []
    if m.hbar_exp:
        parts.append("hbar" + (f"^{m.hbar_exp}" if m.hbar_exp > 1 else ""))
    for a, e in enumerate(m.x_exp, 1):
        if e:
            parts.append(f"x{a}" + (f"^{e}" if e > 1 else ""))
    for a, e in enumerate(m.p_exp, 1):
        if e:
            parts.append(f"p{a}" + (f"^{e}" if e > 1 else ""))
    if m.s_exp:
        parts.append("s")
    return "*".join(parts)


def _rational_text(q: Fraction) -> str:
    """Unsigned magnitude; fractions are parenthesized."""
    q = abs(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"({q.numerator}/{q.denominator})"


def _term_text(coef: GaussianRational, mono: str) -> tuple[str, str]:
    """(sign, body) for one term."""
    re_, im = coef.re, coef.im
    if re_ and im:
        inner_sign = "-" if im < 0 else "+"
        re_txt = f"{re_.numerator}/{re_.denominator}" if re_.denominator != 1 else str(re_.numerator)
        coef_txt = f"({re_txt} {inner_sign} {_rational_text(im)}*i)"
        return "+", coef_txt + (f"*{mono}" if mono else "")
    value = re_ if re_ else im
    sign = "-" if value < 0 else "+"
    factors = []
    if abs(value) != 1:
        factors.append(_rational_text(value))
    if im:
        factors.append("i")
    if mono:
        factors.append(mono)
    if not factors:
        factors.append("1")
    return sign, "*".join(factors)


def render_poly(poly: Poly) -> str:
    items = poly.items()
    if not items:
        return "0"
    out = []
    for j, (mono, coef) in enumerate(items):
        sign, body = _term_text(coef, _monomial_text(poly.ctx, mono))
        if j == 0:
            out.append(("-" if sign == "-" else "") + body)
        else:
            out.append(f" {sign} {body}")
    return "".join(out)


def render(f: PhaseExpr, format: str = "text") -> str:
    if format == "json":
        import json

        return json.dumps(to_json(f), separators=(",", ":"))
    if format != "text":
        raise ValueError(f"unknown format {format!r}")
    num = render_poly(f.numer)
    if f.is_polynomial() or f.is_zero():
        return num
    if len(f.numer) > 1:
        num = f"({num})"
    return f"{num}/({render_poly(f.denom)})"


def _poly_json(poly: Poly) -> list:
    rows = []
    for mono, coef in poly.items():
        rows.append(
            [
                str(coef.re),
                str(coef.im),
                list(mono.x_exp),
                list(mono.p_exp),
                mono.hbar_exp,
                mono.s_exp,
            ]
        )
    return rows


def to_json(f: PhaseExpr) -> dict:
    return {
        "schemaVersion": JSON_SCHEMA_VERSION,
        "n": f.ctx.n,
        "numer": _poly_json(f.numer),
        "denom": _poly_json(f.denom),
    }


def _poly_terms(ctx: Context, rows, allow_s_i: bool) -> dict:
    terms: dict = {}
    i_bit = 1 << ctx.i_shift
    for row in rows:
        re_s, im_s, xe, pe, he, se = row
        key = Monomial(tuple(xe), tuple(pe), int(he), int(se)).key(ctx)
        re_, im = Fraction(re_s), Fraction(im_s)
        if not allow_s_i and (im or se):
            raise ValueError("denominator must be free of s and i")
        if re_:
            terms[key] = mpq(re_.numerator, re_.denominator)
        if im:
            terms[key | i_bit] = mpq(im.numerator, im.denominator)
    return terms


def from_json(data: dict, ctx: Context | None = None) -> PhaseExpr:
    if ctx is None:
        ctx = Context(int(data["n"]))
    num = _poly_terms(ctx, data["numer"], True)
    den = _poly_terms(ctx, data["denom"], False)
    if den == {0: mpq(1)}:
        return PhaseExpr(ctx, num)
    return PhaseExpr.from_terms(ctx, num, den)
