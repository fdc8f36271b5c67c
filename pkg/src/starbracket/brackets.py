"""Poisson, star, Moyal, classical and quantum Nambu, trace and Dirac brackets."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

from gmpy2 import mpq

from . import kernels as K
from .kernels import FIELD_MASK
from .ring import (
    Context,
    ContextMismatch,
    DivisionByZero,
    NonPolynomialMomentumDenominator,
    PhaseExpr,
    RingError,
    _make_denom,
    _mul,
    divide,
    sum_fractions,
)

QNB_MAX_ARITY = 6


class BracketError(RingError):
    pass


def _ctx_of(*exprs) -> Context:
    ctx = exprs[0].ctx
    for e in exprs[1:]:
        if e.ctx != ctx:
            raise ContextMismatch(f"N={e.ctx.n} mixed with N={ctx.n}")
    return ctx


def _raw_product(ctx, a: PhaseExpr, b: PhaseExpr):
    """Numerator/denominator of ``a*b`` without cancellation."""
    num = _mul(ctx, a._num, b._num)
    if a._den.is_one:
        return num, b._den
    if b._den.is_one:
        return num, a._den
    exps = dict(a._den.factors)
    for f, e in b._den.factors:
        exps[f] = exps.get(f, 0) + e
    return num, _make_denom(a._den.mono + b._den.mono, exps)


def _times_i_hbar_power(ctx, num: dict, m: int, coef) -> dict:
    """``coef * (i hbar)^m * num`` on packed keys."""
    i_bit = 1 << ctx.i_shift
    sign = -1 if m % 4 in (2, 3) else 1
    odd = m % 2 == 1
    out = {}
    for k, c in num.items():
        v = c * coef * sign
        kk = k + m
        if odd:
            if kk & i_bit:
                kk -= i_bit
                v = -v
            else:
                kk += i_bit
        out[kk] = v
    return out


class _Derivatives:
    """Memoized mixed partials ``d_x^alpha d_p^beta f``."""

    def __init__(self, f: PhaseExpr):
        self.f = f
        self.n = f.ctx.n
        zero = (0,) * self.n
        self.memo = {(zero, zero): f}

    def get(self, alpha: tuple, beta: tuple) -> PhaseExpr:
        key = (alpha, beta)
        got = self.memo.get(key)
        if got is not None:
            return got
        for a in range(self.n - 1, -1, -1):
            if alpha[a]:
                prev = alpha[:a] + (alpha[a] - 1,) + alpha[a + 1 :]
                base = self.get(prev, beta)
                val = base if base.is_zero() else base.derive(f"x{a + 1}")
                break
        else:
            for a in range(self.n - 1, -1, -1):
                if beta[a]:
                    prev = beta[:a] + (beta[a] - 1,) + beta[a + 1 :]
                    base = self.get(alpha, prev)
                    val = base if base.is_zero() else base.derive(f"p{a + 1}")
                    break
        self.memo[key] = val
        return val


def _check_star_args(*exprs):
    for e in exprs:
        if e.has_p_denominator():
            raise NonPolynomialMomentumDenominator(
                "star products need denominators free of momenta"
            )


def _star_parts(f: PhaseExpr, g: PhaseExpr, parity: int | None, fd=None, gd=None):
    """Terms of the bidifferential series; ``parity`` keeps only odd/even orders."""
    ctx = f.ctx
    n = ctx.n
    deg_f = f.p_degrees()
    deg_g = g.p_degrees()
    fd = fd or _Derivatives(f)
    gd = gd or _Derivatives(g)
    parts = []
    alphas = list(itertools.product(*[range(d + 1) for d in deg_g]))
    betas = list(itertools.product(*[range(d + 1) for d in deg_f]))
    for alpha in alphas:
        sa = sum(alpha)
        for beta in betas:
            order = sa + sum(beta)
            if parity is not None and order % 2 != parity:
                continue
            left = fd.get(alpha, beta)
            if left.is_zero():
                continue
            right = gd.get(beta, alpha)
            if right.is_zero():
                continue
            coef = Fraction(1, 2**order)
            for a in range(n):
                coef /= math.factorial(alpha[a]) * math.factorial(beta[a])
            if sum(beta) % 2:
                coef = -coef
            num, den = _raw_product(ctx, left, right)
            parts.append((_times_i_hbar_power(ctx, num, order, mpq(coef.numerator, coef.denominator)), den))
    return parts


def star(f: PhaseExpr, g: PhaseExpr) -> PhaseExpr:
    """Moyal star product, summed exactly (finite for momentum-polynomial input)."""
    ctx = _ctx_of(f, g)
    _check_star_args(f, g)
    if f.is_zero() or g.is_zero():
        return PhaseExpr.zero(ctx)
    return sum_fractions(ctx, _star_parts(f, g, None))


def star_chain(*args: PhaseExpr) -> PhaseExpr:
    result = args[0]
    for a in args[1:]:
        result = star(result, a)
    return result


def _divide_i_hbar(ctx, num: dict) -> dict:
    """``num / (i hbar)``; every term must carry hbar."""
    i_bit = 1 << ctx.i_shift
    out = {}
    for k, c in num.items():
        if not k & FIELD_MASK:
            raise BracketError("commutator has an hbar-free term")
        kk = k - 1
        # 1/i = -i
        if kk & i_bit:
            out[kk - i_bit] = c
        else:
            out[kk + i_bit] = -c
    return out


def commutator(f: PhaseExpr, g: PhaseExpr) -> PhaseExpr:
    """``f*g - g*f`` (star), i.e. twice the odd part of the series."""
    ctx = _ctx_of(f, g)
    _check_star_args(f, g)
    if f.is_zero() or g.is_zero():
        return PhaseExpr.zero(ctx)
    parts = [({k: 2 * c for k, c in num.items()}, den) for num, den in _star_parts(f, g, 1)]
    return sum_fractions(ctx, parts)


def moyal(f: PhaseExpr, g: PhaseExpr) -> PhaseExpr:
    """Moyal bracket ``(f*g - g*f) / (i hbar)``."""
    c = commutator(f, g)
    if c.is_zero():
        return c
    return PhaseExpr(c.ctx, _divide_i_hbar(c.ctx, c._num), c._den)


def poisson(f: PhaseExpr, g: PhaseExpr) -> PhaseExpr:
    ctx = _ctx_of(f, g)
    parts = []
    for xa, pa in ctx.canonical_pairs:
        fx = f.derive(xa)
        gp = g.derive(pa)
        if not fx.is_zero() and not gp.is_zero():
            parts.append(_raw_product(ctx, fx, gp))
        fp = f.derive(pa)
        gx = g.derive(xa)
        if not fp.is_zero() and not gx.is_zero():
            num, den = _raw_product(ctx, fp, gx)
            parts.append(({k: -c for k, c in num.items()}, den))
    return sum_fractions(ctx, parts)


# ---------------------------------------------------------------------------
# classical Nambu brackets


def _determinant(ctx, rows: list[list[PhaseExpr]]) -> PhaseExpr:
    """Laplace expansion along rows, memoized on the remaining column set."""
    size = len(rows)
    memo: dict[int, PhaseExpr] = {}

    def det(r: int, mask: int) -> PhaseExpr:
        if r == size:
            return PhaseExpr.one(ctx)
        got = memo.get(mask)
        if got is not None:
            return got
        parts = []
        pos = 0
        for c in range(size):
            if not mask >> c & 1:
                continue
            entry = rows[r][c]
            sign = -1 if pos % 2 else 1
            pos += 1
            if entry.is_zero():
                continue
            minor = det(r + 1, mask & ~(1 << c))
            if minor.is_zero():
                continue
            num, den = _raw_product(ctx, entry, minor)
            if sign < 0:
                num = {k: -v for k, v in num.items()}
            parts.append((num, den))
        val = sum_fractions(ctx, parts)
        memo[mask] = val
        return val

    return det(0, (1 << size) - 1)


def jacobian(args: list[PhaseExpr], pairs: list[int]) -> list[list[PhaseExpr]]:
    """Rows d(arg)/d(x_c, p_c) for the 1-based pair indices in ``pairs``."""
    return [[a.derive(v) for c in pairs for v in (f"x{c}", f"p{c}")] for a in args]


def cnb(args: list[PhaseExpr]) -> PhaseExpr:
    """Classical Nambu bracket of 2k functions.

    Full rank is the Jacobian determinant in the order (x1, p1, x2, p2, ...).
    Lower rank sums the 2k x 2k Jacobian minors over every choice of k
    canonical pairs, which equals the normalized symplectic trace.
    """
    args = list(args)
    ctx = _ctx_of(*args)
    m = len(args)
    if m < 2 or m % 2 or m > 2 * ctx.n:
        raise BracketError(f"Nambu bracket arity must be even in [2, {2 * ctx.n}], got {m}")
    k = m // 2
    if m == 2:
        return poisson(args[0], args[1])
    total = PhaseExpr.zero(ctx)
    for chosen in itertools.combinations(range(1, ctx.n + 1), k):
        total = total + _determinant(ctx, jacobian(args, list(chosen)))
    return total


def poisson_pairing(a, b, c, d) -> PhaseExpr:
    """``{a,b}{c,d} + {a,c}{d,b} + {a,d}{b,c}``, the Pfaffian form of a 4-bracket."""
    return poisson(a, b) * poisson(c, d) + poisson(a, c) * poisson(d, b) + poisson(a, d) * poisson(b, c)


def symplectic_trace(args: list[PhaseExpr], traced_pairs: int) -> PhaseExpr:
    """Insert ``traced_pairs`` canonical pairs, sum over all index choices, divide by m!."""
    args = list(args)
    ctx = _ctx_of(*args)
    m = traced_pairs
    if m < 0 or len(args) + 2 * m > 2 * ctx.n:
        raise BracketError("symplectic trace exceeds phase-space dimension")
    if m == 0:
        return cnb(args)
    total = PhaseExpr.zero(ctx)
    for idx in itertools.product(range(1, ctx.n + 1), repeat=m):
        if len(set(idx)) < m:
            continue  # repeated canonical pair: vanishing determinant
        extra = []
        for c in idx:
            extra += [PhaseExpr.x(ctx, c), PhaseExpr.p(ctx, c)]
        total = total + cnb(args + extra)
    return total.scale(Fraction(1, math.factorial(m)))


def dirac(f: PhaseExpr, g: PhaseExpr, constraints: list[PhaseExpr]) -> PhaseExpr:
    """Bracket with the constraint entries fixed, normalized by their own bracket."""
    constraints = list(constraints)
    if not constraints or len(constraints) % 2:
        raise BracketError("Dirac bracket needs an even, nonzero number of constraints")
    norm = cnb(constraints)
    if norm.is_zero():
        raise DivisionByZero("constraint bracket vanishes")
    return divide(cnb([f, g] + constraints), norm)


# ---------------------------------------------------------------------------
# quantum Nambu brackets


def _check_qnb(args):
    m = len(args)
    if not 2 <= m <= QNB_MAX_ARITY:
        raise BracketError(f"quantum Nambu bracket arity must be in [2, {QNB_MAX_ARITY}], got {m}")
    _ctx_of(*args)
    _check_star_args(*args)


def qnb(args: list[PhaseExpr]) -> PhaseExpr:
    """Fully antisymmetrized star-product chains.

    Expanded along the first factor: each subset bracket is shared by every
    permutation that ends in it, so arity m costs m * 2^(m-1) star products.
    """
    args = list(args)
    _check_qnb(args)
    ctx = args[0].ctx
    m = len(args)
    memo: dict[int, PhaseExpr] = {1 << j: args[j] for j in range(m)}
    derivs = [_Derivatives(a) for a in args]

    def bracket(mask: int) -> PhaseExpr:
        got = memo.get(mask)
        if got is not None:
            return got
        parts = []
        pos = 0
        for j in range(m):
            if not mask >> j & 1:
                continue
            sign = -1 if pos % 2 else 1
            pos += 1
            rest = bracket(mask & ~(1 << j))
            if rest.is_zero() or args[j].is_zero():
                continue
            for num, den in _star_parts(args[j], rest, None, fd=derivs[j]):
                if sign < 0:
                    num = {k: -v for k, v in num.items()}
                parts.append((num, den))
        val = sum_fractions(ctx, parts)
        memo[mask] = val
        return val

    return bracket((1 << m) - 1)


def qnb_permutations(args: list[PhaseExpr]) -> PhaseExpr:
    """Reference form: signed sum over permutations, sharing star-product prefixes."""
    args = list(args)
    _check_qnb(args)
    ctx = args[0].ctx
    m = len(args)
    total = []

    def walk(prefix: PhaseExpr | None, remaining: tuple, sign: int):
        if not remaining:
            total.append((prefix._num if sign > 0 else {k: -v for k, v in prefix._num.items()}, prefix._den))
            return
        for pos, j in enumerate(remaining):
            nxt = args[j] if prefix is None else star(prefix, args[j])
            rest = remaining[:pos] + remaining[pos + 1 :]
            walk(nxt, rest, sign * (-1 if pos % 2 else 1))

    walk(None, tuple(range(m)), 1)
    return sum_fractions(ctx, total)


def qnb4_resolve(a, b, c, d) -> PhaseExpr:
    """Four-bracket as symmetrized star products of commutators."""
    _check_qnb([a, b, c, d])
    ab, ac, ad = commutator(a, b), commutator(a, c), commutator(a, d)
    cd, db, bc = commutator(c, d), commutator(d, b), commutator(b, c)
    return (
        star(ab, cd)
        + star(ac, db)
        + star(ad, bc)
        + star(cd, ab)
        + star(db, ac)
        + star(bc, ad)
    )


# ---------------------------------------------------------------------------


KINDS = ("PB", "STAR", "MB", "CNB", "QNB", "DB", "TRACE")


@dataclass
class BracketSpec:
    kind: str
    args: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    traced_pairs: int = 0

    def __post_init__(self):
        self.kind = self.kind.upper()
        if self.kind not in KINDS:
            raise BracketError(f"unknown bracket kind {self.kind!r}")

    def evaluate(self) -> PhaseExpr:
        kind, args = self.kind, self.args
        if kind in ("PB", "STAR", "MB"):
            if len(args) != 2:
                raise BracketError(f"{kind} takes exactly two arguments")
            return {"PB": poisson, "STAR": star, "MB": moyal}[kind](*args)
        if kind == "CNB":
            return cnb(args)
        if kind == "QNB":
            return qnb(args)
        if kind == "TRACE":
            return symplectic_trace(args, self.traced_pairs)
        if len(args) != 2:
            raise BracketError("DB takes exactly two principal arguments")
        return dirac(args[0], args[1], self.constraints)
