"""Exact phase-space expressions.

A :class:`PhaseExpr` is a fraction ``numer / denom`` over the ring
``Q(i)[hbar][x_1..x_N, p_1..p_N][s] / (s^2 - u)`` with ``u = 1 - sum(x_a^2)``.
Numerators are sparse dicts keyed by packed exponent ints (see
:mod:`starbracket._kernels_py`).  Denominators are kept factored as a monomial
times powers of interned s-free, i-free polynomials; ``u`` is one such factor.

Equality never relies on canonical reduction: two fractions are compared by
bringing them to a common denominator and subtracting numerators.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from gmpy2 import mpq

from . import kernels as K
from .kernels import FIELD_BITS, FIELD_MASK

MAX_N = 8
_PRIME = (1 << 61) - 1
INFINITE = math.inf

__all__ = [
    "MAX_N",
    "INFINITE",
    "RingError",
    "ContextMismatch",
    "DivisionByZero",
    "NonPolynomialMomentumDenominator",
    "EvaluationError",
    "ZeroDenominator",
    "NonSquareU",
    "NegativeU",
    "Context",
    "Monomial",
    "GaussianRational",
    "Poly",
    "PhaseExpr",
    "divide",
    "derive",
    "equals",
    "hbar_order",
    "classical_limit",
    "conjugate",
    "eval_at",
]


class RingError(Exception):
    pass


class ContextMismatch(RingError):
    pass


class DivisionByZero(RingError, ZeroDivisionError):
    pass


class NonPolynomialMomentumDenominator(RingError):
    pass


class EvaluationError(RingError):
    pass


class ZeroDenominator(EvaluationError):
    pass


class NonSquareU(EvaluationError):
    pass


class NegativeU(EvaluationError):
    pass


def _q(value) -> mpq:
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    return mpq(value)


def _to_fraction(c) -> Fraction:
    return Fraction(int(c.numerator), int(c.denominator))


# ---------------------------------------------------------------------------
# context and layout

_CONTEXTS: dict = {}


@dataclass(frozen=True)
class Context:
    """Phase-space dimension and the packed-key layout derived from it.

    Field order inside a key, least significant first: hbar, x_1..x_N,
    p_1..p_N, s, i.
    """

    n: int

    def __new__(cls, n: int):
        # one instance per dimension, so interned denominator factors are shared
        if not isinstance(n, int) or isinstance(n, bool) or not 1 <= n <= MAX_N:
            raise RingError(f"dimension must be an integer in [1, {MAX_N}], got {n!r}")
        inst = _CONTEXTS.get(n)
        if inst is None:
            inst = object.__new__(cls)
            _CONTEXTS[n] = inst
        return inst

    def __getnewargs__(self):
        return (self.n,)

    @cached_property
    def x_shifts(self) -> list[int]:
        return [FIELD_BITS * a for a in range(1, self.n + 1)]

    @cached_property
    def p_shifts(self) -> list[int]:
        return [FIELD_BITS * (self.n + a) for a in range(1, self.n + 1)]

    @property
    def hbar_shift(self) -> int:
        return 0

    @cached_property
    def s_shift(self) -> int:
        return FIELD_BITS * (2 * self.n + 1)

    @cached_property
    def i_shift(self) -> int:
        return FIELD_BITS * (2 * self.n + 2)

    @cached_property
    def xp_shifts(self) -> list[int]:
        return self.x_shifts + self.p_shifts

    @cached_property
    def eval_shifts(self) -> list[int]:
        return [0] + self.xp_shifts

    @cached_property
    def u_terms(self) -> list[tuple[int, int]]:
        return [(0, 1)] + [(2 << sh, -1) for sh in self.x_shifts]

    @cached_property
    def variables(self) -> list[str]:
        return [f"x{a}" for a in range(1, self.n + 1)] + [f"p{a}" for a in range(1, self.n + 1)]

    @cached_property
    def canonical_pairs(self) -> list[tuple[str, str]]:
        """Variable order of the Jacobian: (x1, p1), (x2, p2), ..."""
        return [(f"x{a}", f"p{a}") for a in range(1, self.n + 1)]

    def shift_of(self, var: str) -> int:
        try:
            return self._shift_table[var]
        except KeyError:
            raise RingError(f"unknown variable {var!r} for N={self.n}") from None

    @cached_property
    def _shift_table(self) -> dict[str, int]:
        table = {f"x{a}": sh for a, sh in enumerate(self.x_shifts, 1)}
        table.update({f"p{a}": sh for a, sh in enumerate(self.p_shifts, 1)})
        return table

    def exponents(self, key: int) -> tuple[int, ...]:
        """All fields of ``key`` in order (hbar, x.., p.., s, i)."""
        return tuple((key >> (FIELD_BITS * f)) & FIELD_MASK for f in range(2 * self.n + 3))

    @cached_property
    def u_factor(self) -> "_Factor":
        # stored with positive leading coefficient: sum(x_a^2) - 1 = -u
        terms = {2 << sh: mpq(1) for sh in self.x_shifts}
        terms[0] = mpq(-1)
        return self._intern(terms)

    @cached_property
    def _factors(self) -> dict:
        return {}

    def _intern(self, terms: dict) -> "_Factor":
        key = tuple(sorted(terms.items()))
        f = self._factors.get(key)
        if f is None:
            f = _Factor(self, terms, len(self._factors))
            self._factors[key] = f
        return f

    @cached_property
    def _rng(self) -> random.Random:
        return random.Random(0x5EED + self.n)

    @cached_property
    def sphere_points(self) -> list[list[int]]:
        """Points mod a prime with sum(x^2) = 1, random hbar and p."""
        rng = self._rng
        pts = []
        while len(pts) < 2:
            t = [rng.randrange(1, _PRIME) for _ in range(self.n - 1)]
            big_t = sum(v * v for v in t) % _PRIME
            den = (big_t + 1) % _PRIME
            if den == 0:
                continue
            inv = pow(den, -1, _PRIME)
            xs = [2 * v * inv % _PRIME for v in t] + [(big_t - 1) * inv % _PRIME]
            ps = [rng.randrange(1, _PRIME) for _ in range(self.n)]
            pts.append([rng.randrange(1, _PRIME)] + xs + ps)
        return pts


def _grlex_key(ctx: Context, key: int) -> tuple:
    e = ctx.exponents(key)[:-1]
    return (sum(e), e)


class _Factor:
    """Interned irreducible-by-convention denominator factor (s, i, hbar free)."""

    __slots__ = ("ctx", "terms", "order", "_pows", "_derivs", "_points")

    def __init__(self, ctx, terms, order):
        self.ctx = ctx
        self.terms = terms
        self.order = order
        self._pows = {0: {0: mpq(1)}, 1: terms}
        self._derivs = {}
        self._points = None

    @property
    def is_u(self) -> bool:
        return self is self.ctx.u_factor

    def pow(self, e: int) -> dict:
        d = self._pows.get(e)
        if d is None:
            d = _mul(self.ctx, self.pow(e - 1), self.terms)
            self._pows[e] = d
        return d

    def deriv(self, shift: int) -> dict:
        d = self._derivs.get(shift)
        if d is None:
            d = K.derive(self.terms, shift)
            self._derivs[shift] = d
        return d

    def zero_points(self) -> list[list[int]]:
        if self._points is None:
            self._points = self._find_points()
        return self._points

    def _find_points(self) -> list[list[int]]:
        ctx = self.ctx
        if self.is_u:
            return ctx.sphere_points
        rng = random.Random(0xFAC + self.order)
        shifts = ctx.eval_shifts
        for j, sh in enumerate(shifts):
            if max((k >> sh) & FIELD_MASK for k in self.terms) != 1:
                continue
            lin = {k - (1 << sh): c for k, c in self.terms.items() if (k >> sh) & FIELD_MASK}
            rest = {k: c for k, c in self.terms.items() if not (k >> sh) & FIELD_MASK}
            pts = []
            for _ in range(6):
                vals = [rng.randrange(1, _PRIME) for _ in shifts]
                a = _eval_mod_plain(ctx, lin, vals)
                if a == 0:
                    continue
                b = _eval_mod_plain(ctx, rest, vals)
                vals[j] = (-b) * pow(a, -1, _PRIME) % _PRIME
                pts.append(vals)
                if len(pts) == 2:
                    return pts
        return []


def _eval_mod_plain(ctx, terms, vals) -> int:
    sums = K.eval_mod(terms, ctx.eval_shifts, vals, _PRIME, ctx.s_shift, ctx.i_shift)
    return sums[0]


# ---------------------------------------------------------------------------
# dict-level polynomial helpers


def _mul(ctx: Context, a: dict, b: dict) -> dict:
    return K.mul(a, b, ctx.s_shift, ctx.i_shift, ctx.u_terms)


def _add(a: dict, b: dict, scale=1) -> dict:
    out = dict(a)
    K.iadd(out, b, scale)
    return out


def _shift(a: dict, delta: int) -> dict:
    return {k + delta: c for k, c in a.items()}


def _scale(a: dict, c) -> dict:
    if c == 1:
        return a
    return {k: v * c for k, v in a.items()}


def _pow(ctx: Context, a: dict, e: int) -> dict:
    result = {0: mpq(1)}
    base = a
    while e:
        if e & 1:
            result = _mul(ctx, result, base)
        e >>= 1
        if e:
            base = _mul(ctx, base, base)
    return result


def _field_min(terms: dict, shift: int) -> int:
    return min((k >> shift) & FIELD_MASK for k in terms)


def _div_u(ctx: Context, num: dict) -> dict | None:
    """Exact quotient ``num / (sum x^2 - 1)`` or None when not divisible."""
    sh = ctx.x_shifts[0]
    one = 1 << sh
    levels: dict[int, dict] = {}
    for k, c in num.items():
        e = (k >> sh) & FIELD_MASK
        levels.setdefault(e, {})[k - e * one] = c
    # sum x^2 - 1 = x1^2 - c0 with c0 = 1 - sum_{a>1} x_a^2
    c0 = {0: mpq(1)}
    for xs in ctx.x_shifts[1:]:
        c0[2 << xs] = mpq(-1)
    quotient: dict = {}
    top = max(levels)
    for e in range(top, 1, -1):
        a_e = levels.get(e)
        if not a_e:
            continue
        # x1^e a_e = x1^(e-2) a_e (x1^2 - c0) + x1^(e-2) c0 a_e
        for k, c in a_e.items():
            quotient[k + (e - 2) * one] = c
        low = levels.setdefault(e - 2, {})
        K.iadd(low, _mul(ctx, c0, a_e), 1)
    if levels.get(1) or levels.get(0):
        return None
    return quotient


def _div_generic(ctx: Context, num: dict, fac: dict) -> dict | None:
    """Exact quotient by an s-free, i-free polynomial, lex order on packed keys."""
    lead = max(fac)
    lc = fac[lead]
    shifts = [FIELD_BITS * f for f in range(2 * ctx.n + 3)]
    lead_e = [(lead >> sh) & FIELD_MASK for sh in shifts]
    rem = dict(num)
    heap = [-k for k in rem]
    heapq.heapify(heap)
    quotient = {}
    while rem:
        k = -heapq.heappop(heap)
        c = rem.get(k)
        if c is None:
            continue
        for sh, le in zip(shifts, lead_e):
            if ((k >> sh) & FIELD_MASK) < le:
                return None
        qk = k - lead
        qc = c / lc
        quotient[qk] = qc
        for fk, fc in fac.items():
            kk = fk + qk
            prev = rem.get(kk)
            if prev is None:
                rem[kk] = -qc * fc
                heapq.heappush(heap, -kk)
            else:
                v = prev - qc * fc
                if v:
                    rem[kk] = v
                else:
                    del rem[kk]
    return quotient


def _may_divide(ctx: Context, num: dict, fac: _Factor) -> bool:
    for vals in fac.zero_points():
        try:
            sums = K.eval_mod(num, ctx.eval_shifts, vals, _PRIME, ctx.s_shift, ctx.i_shift)
        except ZeroDivisionError:
            return True
        if any(sums):
            return False
    return True


def _try_divide(ctx: Context, num: dict, fac: _Factor) -> dict | None:
    if not _may_divide(ctx, num, fac):
        return None
    if fac.is_u:
        return _div_u(ctx, num)
    return _div_generic(ctx, num, fac.terms)


# ---------------------------------------------------------------------------
# factored denominators


class _Denom:
    """``x^mono * prod(F_j^e_j)``; ``mono`` is a packed key over x/p fields."""

    __slots__ = ("mono", "factors", "_expanded")

    def __init__(self, mono: int = 0, factors: tuple = ()):
        self.mono = mono
        self.factors = factors
        self._expanded = None

    @property
    def is_one(self) -> bool:
        return not self.mono and not self.factors

    def key(self):
        return (self.mono, self.factors)

    def expanded(self, ctx: Context) -> dict:
        if self._expanded is None:
            d = {self.mono: mpq(1)}
            for f, e in self.factors:
                d = _mul(ctx, d, f.pow(e))
            self._expanded = d
        return self._expanded

    def has_field(self, shift: int) -> bool:
        if (self.mono >> shift) & FIELD_MASK:
            return True
        return any(any((k >> shift) & FIELD_MASK for k in f.terms) for f, _ in self.factors)


_ONE_DENOM = _Denom()


def _make_denom(mono: int, exps: dict) -> _Denom:
    if not mono and not exps:
        return _ONE_DENOM
    facs = tuple(sorted(((f, e) for f, e in exps.items() if e), key=lambda t: t[0].order))
    return _Denom(mono, facs)


def _mono_max(ctx: Context, a: int, b: int) -> int:
    if a == b or not b:
        return a
    if not a:
        return b
    out = 0
    for sh in ctx.xp_shifts:
        out |= max((a >> sh) & FIELD_MASK, (b >> sh) & FIELD_MASK) << sh
    return out


def _lcm(ctx: Context, d1: _Denom, d2: _Denom) -> _Denom:
    if d1 is d2 or d1.key() == d2.key():
        return d1
    exps = dict(d1.factors)
    for f, e in d2.factors:
        if exps.get(f, 0) < e:
            exps[f] = e
    return _make_denom(_mono_max(ctx, d1.mono, d2.mono), exps)


def _cofactor(ctx: Context, big: _Denom, small: _Denom) -> dict:
    """``big / small`` expanded; ``small`` must divide ``big`` factorwise."""
    out = {big.mono - small.mono: mpq(1)}
    have = dict(small.factors)
    for f, e in big.factors:
        d = e - have.get(f, 0)
        if d:
            out = _mul(ctx, out, f.pow(d))
    return out


def _normalize_denominator(ctx: Context, terms: dict):
    """Split an s-free, i-free poly into ``scale * x^mono * prod F^e``."""
    for k in terms:
        if k & FIELD_MASK:
            raise RingError("hbar may not appear in a denominator")
    mono = 0
    for sh in ctx.xp_shifts:
        m = _field_min(terms, sh)
        if m:
            mono |= m << sh
    if mono:
        terms = _shift(terms, -mono)
    exps: dict = {}
    if len(terms) > 1:
        while True:
            q = _try_divide(ctx, terms, ctx.u_factor)
            if q is None:
                break
            terms = q
            exps[ctx.u_factor] = exps.get(ctx.u_factor, 0) + 1
    if len(terms) == 1:
        ((k, c),) = terms.items()
        return c, mono, exps
    lead = max(terms, key=lambda k: _grlex_key(ctx, k))
    den_lcm = 1
    num_gcd = 0
    for c in terms.values():
        den_lcm = den_lcm * int(c.denominator) // math.gcd(den_lcm, int(c.denominator))
        num_gcd = math.gcd(num_gcd, int(c.numerator))
    content = mpq(num_gcd, den_lcm)
    if terms[lead] < 0:
        content = -content
    prim = {k: c / content for k, c in terms.items()}
    fac = ctx._intern(prim)
    exps[fac] = exps.get(fac, 0) + 1
    return content, mono, exps


# ---------------------------------------------------------------------------
# public value types


@dataclass(frozen=True)
class GaussianRational:
    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "re", Fraction(self.re))
        object.__setattr__(self, "im", Fraction(self.im))

    def __add__(self, other):
        other = _as_gauss(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-_as_gauss(other))

    def __rsub__(self, other):
        return _as_gauss(other) - self

    def __mul__(self, other):
        o = _as_gauss(other)
        return GaussianRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _as_gauss(other)
        norm = o.re * o.re + o.im * o.im
        if norm == 0:
            raise ZeroDivisionError("division by zero")
        return self * GaussianRational(o.re / norm, -o.im / norm)

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def __eq__(self, other):
        try:
            o = _as_gauss(other)
        except TypeError:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re or self.im)

    def __str__(self):
        if not self.im:
            return str(self.re)
        if not self.re:
            return f"{self.im}*i"
        sign = "-" if self.im < 0 else "+"
        return f"{self.re} {sign} {abs(self.im)}*i"


def _as_gauss(v) -> GaussianRational:
    if isinstance(v, GaussianRational):
        return v
    if isinstance(v, (int, Fraction)) or type(v).__name__ == "mpq":
        return GaussianRational(Fraction(int(v.numerator), int(v.denominator)))
    raise TypeError(f"cannot coerce {type(v).__name__} to GaussianRational")


@dataclass(frozen=True)
class Monomial:
    x_exp: tuple[int, ...]
    p_exp: tuple[int, ...]
    hbar_exp: int = 0
    s_exp: int = 0

    def __post_init__(self):
        if self.s_exp not in (0, 1):
            raise RingError("s exponent must be 0 or 1")
        if len(self.x_exp) != len(self.p_exp):
            raise RingError("x and p exponent vectors differ in length")
        if any(e < 0 for e in self.x_exp + self.p_exp) or self.hbar_exp < 0:
            raise RingError("negative exponent")

    def key(self, ctx: Context) -> int:
        if len(self.x_exp) != ctx.n:
            raise ContextMismatch("monomial dimension does not match context")
        k = self.hbar_exp
        for sh, e in zip(ctx.x_shifts, self.x_exp):
            k |= e << sh
        for sh, e in zip(ctx.p_shifts, self.p_exp):
            k |= e << sh
        return k | (self.s_exp << ctx.s_shift)

    @classmethod
    def from_key(cls, ctx: Context, key: int) -> "Monomial":
        e = ctx.exponents(key)
        n = ctx.n
        return cls(e[1 : n + 1], e[n + 1 : 2 * n + 1], e[0], e[2 * n + 1])


class Poly:
    """Read-only view of a packed polynomial: ``terms`` maps key -> mpq.

    Keys may carry the ``i`` bit; :meth:`items` folds it into a
    :class:`GaussianRational` coefficient per :class:`Monomial`.
    """

    __slots__ = ("ctx", "terms")

    def __init__(self, ctx: Context, terms: dict):
        self.ctx = ctx
        self.terms = terms

    def is_zero(self) -> bool:
        return not self.terms

    def __len__(self):
        return len(self.terms)

    def items(self) -> list[tuple[Monomial, GaussianRational]]:
        ctx = self.ctx
        i_bit = 1 << ctx.i_shift
        grouped: dict[int, list] = {}
        for k, c in self.terms.items():
            slot = grouped.setdefault(k & ~i_bit, [Fraction(0), Fraction(0)])
            slot[1 if k & i_bit else 0] = _to_fraction(c)
        keys = sorted(grouped, key=lambda k: _grlex_key(ctx, k), reverse=True)
        return [(Monomial.from_key(ctx, k), GaussianRational(*grouped[k])) for k in keys]

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return self.ctx == other.ctx and self.terms == other.terms

    __hash__ = None

    def __repr__(self):
        from .syntax import render_poly

        return f"Poly({render_poly(self)!r})"


# ---------------------------------------------------------------------------
# PhaseExpr


def _reduce(ctx: Context, num: dict, den: _Denom) -> "PhaseExpr":
    if not num:
        return PhaseExpr(ctx, {}, _ONE_DENOM)
    if den.is_one:
        return PhaseExpr(ctx, num, den)
    mono = den.mono
    if mono:
        cancel = 0
        for sh in ctx.xp_shifts:
            e = (mono >> sh) & FIELD_MASK
            if e:
                m = min(e, _field_min(num, sh))
                if m:
                    cancel |= m << sh
        if cancel:
            num = _shift(num, -cancel)
            mono -= cancel
    exps = {}
    for f, e in den.factors:
        while e:
            q = _try_divide(ctx, num, f)
            if q is None:
                break
            num = q
            e -= 1
        if e:
            exps[f] = e
    return PhaseExpr(ctx, num, _make_denom(mono, exps))


def _coerce(ctx: Context, value) -> "PhaseExpr":
    if isinstance(value, PhaseExpr):
        if value.ctx != ctx:
            raise ContextMismatch(f"N={value.ctx.n} expression used with N={ctx.n}")
        return value
    if isinstance(value, (int, Fraction)) or type(value).__name__ == "mpq":
        return PhaseExpr.const(ctx, value)
    if isinstance(value, GaussianRational):
        return PhaseExpr.const(ctx, value)
    raise TypeError(f"cannot use {type(value).__name__} as a phase-space expression")


def sum_fractions(ctx: Context, parts) -> "PhaseExpr":
    """Sum of ``(numer_dict, denom)`` pairs grouped by denominator first."""
    groups: dict = {}
    dens: dict = {}
    for num, den in parts:
        if not num:
            continue
        key = den.key()
        acc = groups.get(key)
        if acc is None:
            groups[key] = dict(num)
            dens[key] = den
        else:
            K.iadd(acc, num, 1)
    groups = {k: v for k, v in groups.items() if v}
    if not groups:
        return PhaseExpr(ctx, {}, _ONE_DENOM)
    if len(groups) == 1:
        ((k, num),) = groups.items()
        return _reduce(ctx, num, dens[k])
    common = _ONE_DENOM
    for k in groups:
        common = _lcm(ctx, common, dens[k])
    total: dict = {}
    for k, num in groups.items():
        cof = _cofactor(ctx, common, dens[k])
        K.iadd(total, _mul(ctx, num, cof), 1)
    return _reduce(ctx, total, common)


class PhaseExpr:
    """Immutable exact fraction of phase-space polynomials."""

    __slots__ = ("ctx", "_num", "_den")

    def __init__(self, ctx: Context, num: dict, den: _Denom = _ONE_DENOM):
        self.ctx = ctx
        self._num = num
        self._den = den

    # constructors ---------------------------------------------------------

    @classmethod
    def const(cls, ctx: Context, value) -> "PhaseExpr":
        if isinstance(value, GaussianRational):
            num = {}
            if value.re:
                num[0] = _q(value.re)
            if value.im:
                num[1 << ctx.i_shift] = _q(value.im)
            return cls(ctx, num)
        c = _q(value)
        return cls(ctx, {0: c} if c else {})

    @classmethod
    def zero(cls, ctx):
        return cls(ctx, {})

    @classmethod
    def one(cls, ctx):
        return cls(ctx, {0: mpq(1)})

    @classmethod
    def var(cls, ctx: Context, name: str) -> "PhaseExpr":
        return cls(ctx, {1 << ctx.shift_of(name): mpq(1)})

    @classmethod
    def x(cls, ctx, a: int):
        return cls.var(ctx, f"x{a}")

    @classmethod
    def p(cls, ctx, a: int):
        return cls.var(ctx, f"p{a}")

    @classmethod
    def hbar(cls, ctx):
        return cls(ctx, {1: mpq(1)})

    @classmethod
    def s(cls, ctx):
        return cls(ctx, {1 << ctx.s_shift: mpq(1)})

    @classmethod
    def i(cls, ctx):
        return cls(ctx, {1 << ctx.i_shift: mpq(1)})

    @classmethod
    def u(cls, ctx):
        return cls(ctx, {k: mpq(sign) for k, sign in ctx.u_terms})

    @classmethod
    def from_terms(cls, ctx, numer: dict, denom: dict | None = None) -> "PhaseExpr":
        """Build from packed-key dicts; ``denom`` must be s-free and i-free."""
        num = {k: _q(c) for k, c in numer.items() if c}
        for k in num:
            if (k >> ctx.s_shift) & FIELD_MASK > 1 or (k >> ctx.i_shift) & FIELD_MASK > 1:
                raise RingError("s and i exponents must be 0 or 1")
        f = cls(ctx, num)
        if denom is None:
            return f
        d = {k: _q(c) for k, c in denom.items() if c}
        for k in d:
            if (k >> ctx.s_shift) & FIELD_MASK or (k >> ctx.i_shift) & FIELD_MASK:
                raise RingError("denominator must be free of s and i")
        return divide(f, cls(ctx, d))

    # structure ------------------------------------------------------------

    @property
    def numer(self) -> Poly:
        return Poly(self.ctx, self._num)

    @property
    def denom(self) -> Poly:
        return Poly(self.ctx, self._den.expanded(self.ctx))

    def is_zero(self) -> bool:
        return not self._num

    def is_polynomial(self) -> bool:
        return self._den.is_one

    def is_real(self) -> bool:
        i_bit = 1 << self.ctx.i_shift
        return not any(k & i_bit for k in self._num)

    def has_s(self) -> bool:
        s_bit = 1 << self.ctx.s_shift
        return any(k & s_bit for k in self._num)

    def has_p_denominator(self) -> bool:
        return any(self._den.has_field(sh) for sh in self.ctx.p_shifts)

    def p_degrees(self) -> list[int]:
        """Maximal exponent of each p_a in the numerator."""
        if not self._num:
            return [0] * self.ctx.n
        return [max((k >> sh) & FIELD_MASK for k in self._num) for sh in self.ctx.p_shifts]

    def degree(self) -> int:
        """Total x/p/s degree of the numerator (hbar excluded)."""
        ctx = self.ctx
        if not self._num:
            return 0
        shifts = ctx.xp_shifts + [ctx.s_shift]
        return max(sum((k >> sh) & FIELD_MASK for sh in shifts) for k in self._num)

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        o = _coerce(self.ctx, other)
        if not o._num:
            return self
        if not self._num:
            return o
        ctx = self.ctx
        if self._den.key() == o._den.key():
            return _reduce(ctx, _add(self._num, o._num), self._den)
        return sum_fractions(ctx, [(self._num, self._den), (o._num, o._den)])

    __radd__ = __add__

    def __neg__(self):
        return PhaseExpr(self.ctx, {k: -c for k, c in self._num.items()}, self._den)

    def __sub__(self, other):
        return self + (-_coerce(self.ctx, other))

    def __rsub__(self, other):
        return _coerce(self.ctx, other) - self

    def __mul__(self, other):
        o = _coerce(self.ctx, other)
        ctx = self.ctx
        if not self._num or not o._num:
            return PhaseExpr.zero(ctx)
        num = _mul(ctx, self._num, o._num)
        if self._den.is_one and o._den.is_one:
            return PhaseExpr(ctx, num)
        if o._den.is_one:
            return _reduce(ctx, num, self._den)
        if self._den.is_one:
            return _reduce(ctx, num, o._den)
        exps = dict(self._den.factors)
        for f, e in o._den.factors:
            exps[f] = exps.get(f, 0) + e
        return _reduce(ctx, num, _make_denom(self._den.mono + o._den.mono, exps))

    __rmul__ = __mul__

    def scale(self, c) -> "PhaseExpr":
        """Multiply by a rational constant."""
        c = _q(c)
        if not c:
            return PhaseExpr.zero(self.ctx)
        return PhaseExpr(self.ctx, _scale(self._num, c), self._den)

    def __pow__(self, e):
        if not isinstance(e, int) or e < 0:
            raise ValueError("exponent must be a non-negative integer")
        ctx = self.ctx
        if self._den.is_one:
            return PhaseExpr(ctx, _pow(ctx, self._num, e))
        result = PhaseExpr.one(ctx)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def __truediv__(self, other):
        return divide(self, _coerce(self.ctx, other))

    def __rtruediv__(self, other):
        return divide(_coerce(self.ctx, other), self)

    def __eq__(self, other):
        try:
            o = _coerce(self.ctx, other)
        except TypeError:
            return NotImplemented
        return equals(self, o)

    __hash__ = None

    def __bool__(self):
        return bool(self._num)

    # calculus and views ---------------------------------------------------

    def derive(self, var: str) -> "PhaseExpr":
        return derive(self, var)

    def hbar_order(self):
        return hbar_order(self)

    def classical_limit(self) -> "PhaseExpr":
        return classical_limit(self)

    def conjugate(self) -> "PhaseExpr":
        return conjugate(self)

    def eval_at(self, point, hbar=1, mode="exact"):
        return eval_at(self, point, hbar, mode)

    def hbar_coefficient(self, order: int) -> "PhaseExpr":
        """Coefficient of hbar**order (hbar itself removed)."""
        num = {k - order: c for k, c in self._num.items() if k & FIELD_MASK == order}
        return _reduce(self.ctx, num, self._den) if num else PhaseExpr.zero(self.ctx)

    def __str__(self):
        from .syntax import render

        return render(self)

    def __repr__(self):
        return f"PhaseExpr(N={self.ctx.n}, {self!s})"


def equals(a: PhaseExpr, b: PhaseExpr) -> bool:
    """Exact equality by cross-multiplication onto a common denominator."""
    if a.ctx != b.ctx:
        raise ContextMismatch(f"N={a.ctx.n} compared with N={b.ctx.n}")
    ctx = a.ctx
    if a._den.key() == b._den.key():
        return a._num == b._num
    common = _lcm(ctx, a._den, b._den)
    lhs = _mul(ctx, a._num, _cofactor(ctx, common, a._den))
    rhs = _mul(ctx, b._num, _cofactor(ctx, common, b._den))
    return lhs == rhs


def _conj_dict(ctx: Context, terms: dict) -> dict:
    i_bit = 1 << ctx.i_shift
    return {k: (-c if k & i_bit else c) for k, c in terms.items()}


def divide(a: PhaseExpr, b: PhaseExpr) -> PhaseExpr:
    """``a / b``; s and i are rationalized out of the denominator."""
    if not isinstance(a, PhaseExpr):
        a = _coerce(b.ctx, a)
    if not isinstance(b, PhaseExpr):
        b = _coerce(a.ctx, b)
    if a.ctx != b.ctx:
        raise ContextMismatch(f"N={a.ctx.n} divided by N={b.ctx.n}")
    ctx = a.ctx
    if not b._num:
        raise DivisionByZero("division by zero expression")
    if not a._num:
        return PhaseExpr.zero(ctx)
    # a/b = a.num * b.den / (a.den * b.num)
    num = a._num
    if not b._den.is_one:
        num = _mul(ctx, num, b._den.expanded(ctx))
    den_poly = b._num
    s_bit = 1 << ctx.s_shift
    if any(k & s_bit for k in den_poly):
        # (A + B s)(A - B s) = A^2 - B^2 u
        conj = {k: (-c if k & s_bit else c) for k, c in den_poly.items()}
        num = _mul(ctx, num, conj)
        den_poly = _mul(ctx, den_poly, conj)
    i_bit = 1 << ctx.i_shift
    if any(k & i_bit for k in den_poly):
        conj = _conj_dict(ctx, den_poly)
        num = _mul(ctx, num, conj)
        den_poly = _mul(ctx, den_poly, conj)
    content, mono, exps = _normalize_denominator(ctx, den_poly)
    num = _scale(num, 1 / content)
    for f, e in a._den.factors:
        exps[f] = exps.get(f, 0) + e
    return _reduce(ctx, num, _make_denom(mono + a._den.mono, exps))


def derive(f: PhaseExpr, var: str) -> PhaseExpr:
    """Exact partial derivative in ``x_a`` or ``p_a`` (s = sqrt(u) depends on x)."""
    ctx = f.ctx
    sh = ctx.shift_of(var)
    if not f._num:
        return f
    is_x = var.startswith("x")
    num = f._num
    dnum = K.derive(num, sh)
    s_bit = 1 << ctx.s_shift
    s_part = {k: c for k, c in num.items() if k & s_bit} if is_x else {}
    den = f._den
    if den.is_one and not s_part:
        return PhaseExpr(ctx, dnum)
    one = 1 << sh
    mono_e = (den.mono >> sh) & FIELD_MASK
    # extra atoms multiplied into the denominator: x/p variable and factors
    extra: list = []
    need_u = bool(s_part)
    for fac, _e in den.factors:
        if fac.deriv(sh):
            extra.append(fac)
        elif fac.is_u and need_u:
            extra.append(fac)
    if need_u and ctx.u_factor not in extra:
        extra.append(ctx.u_factor)
    use_var = mono_e > 0

    def product_without(skip) -> dict:
        out = {one if use_var and skip != "var" else 0: mpq(1)}
        for fac in extra:
            if fac is not skip:
                out = _mul(ctx, out, fac.terms)
        return out

    full = product_without(None)
    total = _mul(ctx, dnum, full)
    if need_u:
        # d s / d x_a = -x_a s / u = x_a s / U   with U = sum x^2 - 1
        K.iadd(total, _mul(ctx, _shift(s_part, one), product_without(ctx.u_factor)), 1)
    if use_var:
        K.iadd(total, _mul(ctx, num, product_without("var")), -mono_e)
    for fac, e in den.factors:
        d = fac.deriv(sh)
        if d:
            K.iadd(total, _mul(ctx, _mul(ctx, num, d), product_without(fac)), -e)
    exps = dict(den.factors)
    for fac in extra:
        exps[fac] = exps.get(fac, 0) + 1
    new_mono = den.mono + (one if use_var else 0)
    return _reduce(ctx, total, _make_denom(new_mono, exps))


def hbar_order(f: PhaseExpr):
    """Lowest power of hbar in ``f``; ``INFINITE`` for zero."""
    if not f._num:
        return INFINITE
    return min(k & FIELD_MASK for k in f._num)


def classical_limit(f: PhaseExpr) -> PhaseExpr:
    num = {k: c for k, c in f._num.items() if not k & FIELD_MASK}
    return _reduce(f.ctx, num, f._den) if num else PhaseExpr.zero(f.ctx)


def conjugate(f: PhaseExpr) -> PhaseExpr:
    return PhaseExpr(f.ctx, _conj_dict(f.ctx, f._num), f._den)


def _frac_sqrt(v: Fraction) -> Fraction | None:
    rn = math.isqrt(v.numerator)
    rd = math.isqrt(v.denominator)
    if rn * rn == v.numerator and rd * rd == v.denominator:
        return Fraction(rn, rd)
    return None


def eval_at(f: PhaseExpr, point: dict, hbar=1, mode: str = "exact"):
    """Value of ``f`` at a phase-space point with ``s = +sqrt(u)``.

    Unlisted variables are zero.  Exact mode returns a GaussianRational,
    float mode a ``(re, im)`` pair.
    """
    ctx = f.ctx
    if mode not in ("exact", "float"):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    vals = {name: Fraction(0) for name in ctx.variables}
    for name, v in point.items():
        ctx.shift_of(name)
        vals[name] = Fraction(v)
    hb = Fraction(hbar)
    u = 1 - sum(vals[f"x{a}"] ** 2 for a in range(1, ctx.n + 1))
    if u < 0:
        raise NegativeU(f"u = {u} < 0 at this point")
    s_val = None
    if f.has_s():
        if mode == "exact":
            s_val = _frac_sqrt(u)
            if s_val is None:
                raise NonSquareU(f"u = {u} is not the square of a rational")
        else:
            s_val = math.sqrt(u)
    if mode == "float":
        fvals = {k: float(v) for k, v in vals.items()}
        den = _eval_float(ctx, f._den.expanded(ctx), fvals, float(hb), 0.0)
        if den[0] == 0 and den[1] == 0:
            raise ZeroDenominator("denominator vanishes at this point")
        num = _eval_float(ctx, f._num, fvals, float(hb), s_val or 0.0)
        return (num[0] / den[0], num[1] / den[0])
    den = _eval_exact(ctx, f._den.expanded(ctx), vals, hb, Fraction(0))
    if not den:
        raise ZeroDenominator("denominator vanishes at this point")
    num = _eval_exact(ctx, f._num, vals, hb, s_val or Fraction(0))
    return num / den


def _eval_exact(ctx, terms, vals, hb, s_val) -> GaussianRational:
    re = Fraction(0)
    im = Fraction(0)
    order = [vals[name] for name in ctx.variables]
    for k, c in terms.items():
        e = ctx.exponents(k)
        v = _to_fraction(c) * hb ** e[0]
        for j, base in enumerate(order, 1):
            if e[j]:
                v *= base ** e[j]
        if e[-2]:
            v *= s_val
        if e[-1]:
            im += v
        else:
            re += v
    return GaussianRational(re, im)


def _eval_float(ctx, terms, vals, hb, s_val) -> tuple[float, float]:
    re = 0.0
    im = 0.0
    order = [vals[name] for name in ctx.variables]
    for k, c in terms.items():
        e = ctx.exponents(k)
        v = float(c) * hb ** e[0]
        for j, base in enumerate(order, 1):
            if e[j]:
                v *= base ** e[j]
        if e[-2]:
            v *= s_val
        if e[-1]:
            im += v
        else:
            re += v
    return (re, im)
