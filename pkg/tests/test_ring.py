import math
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

import oracle
from starbracket.ring import (
    INFINITE,
    Context,
    ContextMismatch,
    DivisionByZero,
    GaussianRational,
    NegativeU,
    NonSquareU,
    PhaseExpr,
    ZeroDenominator,
    classical_limit,
    conjugate,
    derive,
    divide,
    equals,
    eval_at,
    hbar_order,
)
from starbracket.models import sphere_model
from strategies import fractions_, polys

C1, C2, C3 = Context(1), Context(2), Context(3)


def X(ctx, a):
    return PhaseExpr.x(ctx, a)


def P(ctx, a):
    return PhaseExpr.p(ctx, a)


class TestArithmetic:
    def test_s_squared_is_u(self):
        s = PhaseExpr.s(C1)
        assert equals(s * s, 1 - X(C1, 1) ** 2)

    def test_additive_inverse(self):
        f = X(C2, 1) * P(C2, 2) + PhaseExpr.s(C2)
        assert (f + (-f)).is_zero()

    def test_binomial(self):
        x, p = X(C1, 1), P(C1, 1)
        assert equals((x + p) ** 2, x * x + 2 * x * p + p * p)

    def test_i_squared(self):
        i = PhaseExpr.i(C2)
        assert equals(i * i, PhaseExpr.const(C2, -1))

    def test_context_mismatch(self):
        with pytest.raises(ContextMismatch):
            X(C1, 1) + X(C2, 1)

    def test_context_is_shared(self):
        assert Context(2) is C2

    def test_negative_power_rejected(self):
        with pytest.raises(ValueError):
            PhaseExpr.u(C2) ** -2


class TestDivide:
    def test_one_over_u(self):
        f = divide(1, PhaseExpr.u(C2))
        assert equals(f * PhaseExpr.u(C2), PhaseExpr.one(C2))
        assert not f.denom.is_zero() and len(f.numer) == 1

    def test_one_over_s(self):
        s, u = PhaseExpr.s(C2), PhaseExpr.u(C2)
        f = divide(1, s)
        assert equals(f, divide(s, u))
        assert not any(m.s_exp for m, _ in f.denom.items())

    def test_rationalize_a_plus_bs(self):
        s, x = PhaseExpr.s(C1), X(C1, 1)
        f = divide(1, 2 + x * s)
        assert equals(f * (2 + x * s), PhaseExpr.one(C1))
        assert not f.denom.items()[0][0].s_exp

    def test_rationalize_i(self):
        i, x = PhaseExpr.i(C1), X(C1, 1)
        f = divide(x, 1 + i)
        assert equals(f, (x - i * x).scale(Fraction(1, 2)))

    def test_zero_divisor(self):
        with pytest.raises(DivisionByZero):
            divide(X(C1, 1), PhaseExpr.zero(C1))

    def test_p_denominator_allowed(self):
        lz = X(C2, 1) * P(C2, 2) - X(C2, 2) * P(C2, 1)
        f = divide(X(C2, 1), lz)
        assert f.has_p_denominator()
        assert equals(f * lz, X(C2, 1))

    @given(polys(C2, max_terms=3))
    def test_self_division(self, f):
        if not f.is_zero():
            assert equals(divide(f, f), PhaseExpr.one(C2))


class TestDerive:
    def test_derive_s(self):
        s, u = PhaseExpr.s(C2), PhaseExpr.u(C2)
        assert equals(derive(s, "x1"), divide(-X(C2, 1) * s, u))
        assert derive(s, "p1").is_zero()

    def test_derive_lz(self):
        lz = X(C2, 1) * P(C2, 2) - X(C2, 2) * P(C2, 1)
        assert equals(derive(lz, "p2"), X(C2, 1))

    def test_derive_inverse_u(self):
        u = PhaseExpr.u(C2)
        assert equals(derive(divide(1, u), "x1"), divide(2 * X(C2, 1), u * u))

    @given(fractions_(C2, max_terms=2), st.sampled_from(C2.variables), st.sampled_from(C2.variables))
    def test_partials_commute(self, f, v1, v2):
        assert equals(derive(derive(f, v1), v2), derive(derive(f, v2), v1))

    @given(fractions_(C2, max_terms=2), fractions_(C2, max_terms=2), st.sampled_from(C2.variables))
    def test_product_rule(self, f, g, v):
        assert equals(derive(f * g, v), derive(f, v) * g + f * derive(g, v))

    def test_against_sympy(self):
        f = divide(X(C2, 1) ** 2 * P(C2, 1) * PhaseExpr.s(C2) + P(C2, 2), PhaseExpr.u(C2) * (1 + X(C2, 2) ** 2))
        xs, ps, _ = oracle.symbols(2)
        fs = oracle.to_sympy(f)
        for v, sym in zip(("x1", "x2", "p1"), (xs[0], xs[1], ps[0])):
            assert oracle.agree(derive(f, v), sp.diff(fs, sym), 2)


class TestEquality:
    def test_s_squared_over_one(self):
        s = PhaseExpr.s(C2)
        assert equals(divide(s * s, 1), divide(PhaseExpr.u(C2), 1))

    def test_u_over_u_squared(self):
        u = PhaseExpr.u(C2)
        assert equals(divide(u, u * u), divide(1, u))

    def test_distinct(self):
        assert not equals(X(C2, 1), P(C2, 1))

    def test_unhashable(self):
        with pytest.raises(TypeError):
            hash(X(C2, 1))


class TestHbar:
    def test_order_zero_is_infinite(self):
        assert hbar_order(PhaseExpr.zero(C1)) == INFINITE == math.inf

    def test_order_min_exponent(self):
        hb = PhaseExpr.hbar(C1)
        assert hbar_order(hb**2 * X(C1, 1) + hb**5 * P(C1, 1)) == 2

    def test_correction_order(self):
        m = sphere_model(2)
        assert hbar_order(m.h_quantum - m.h_classical) == 2

    def test_classical_limit(self):
        hb = PhaseExpr.hbar(C1)
        assert equals(classical_limit(X(C1, 1) + hb * P(C1, 1)), X(C1, 1))
        m = sphere_model(2)
        assert equals(classical_limit(m.h_quantum), m.h_classical)


class TestConjugate:
    def test_conjugate_ix(self):
        i = PhaseExpr.i(C1)
        assert equals(conjugate(i * X(C1, 1)), -i * X(C1, 1))

    @given(fractions_(C2, max_terms=3))
    def test_real_fixed(self, f):
        assert equals(conjugate(f), f)

    @given(polys(C2, allow_i=True, allow_hbar=True))
    def test_involution(self, f):
        assert equals(conjugate(conjugate(f)), f)


class TestEval:
    def test_u_and_s(self):
        pt = {"x1": Fraction(3, 5)}
        assert eval_at(PhaseExpr.u(C1), pt) == GaussianRational(Fraction(16, 25))
        assert eval_at(PhaseExpr.s(C1), pt) == GaussianRational(Fraction(4, 5))

    def test_lz_on_equator(self):
        lz = X(C2, 1) * P(C2, 2) - X(C2, 2) * P(C2, 1)
        pt = {"x1": 1, "x2": 0, "p1": 0, "p2": 2}
        assert eval_at(lz, pt) == GaussianRational(2)
        assert eval_at(PhaseExpr.s(C2) * P(C2, 1), pt) == GaussianRational(0)

    def test_zero_denominator(self):
        with pytest.raises(ZeroDenominator):
            eval_at(divide(1, PhaseExpr.u(C1)), {"x1": 1})

    def test_negative_u(self):
        with pytest.raises(NegativeU):
            eval_at(X(C1, 1), {"x1": 2})

    def test_non_square_u(self):
        with pytest.raises(NonSquareU):
            eval_at(PhaseExpr.s(C1), {"x1": Fraction(1, 2)})
        re_, im = eval_at(PhaseExpr.s(C1), {"x1": Fraction(1, 2)}, mode="float")
        assert abs(re_ - math.sqrt(0.75)) < 1e-15 and im == 0

    def test_hbar_value(self):
        f = PhaseExpr.hbar(C1) * PhaseExpr.i(C1)
        assert eval_at(f, {}, hbar=Fraction(1, 3)) == GaussianRational(0, Fraction(1, 3))

    @given(fractions_(C2, allow_hbar=True, allow_i=True), fractions_(C2, allow_hbar=True, allow_i=True))
    def test_homomorphism(self, a, b):
        for xs, ps, hb in oracle.points(2, 2, seed=3):
            pt = {"x1": xs[0], "x2": xs[1], "p1": ps[0], "p2": ps[1]}
            assert eval_at(a * b, pt, hb) == eval_at(a, pt, hb) * eval_at(b, pt, hb)
            assert eval_at(a + b, pt, hb) == eval_at(a, pt, hb) + eval_at(b, pt, hb)


class TestInvariants:
    @given(fractions_(C2), fractions_(C2))
    def test_commutative(self, a, b):
        assert equals(a * b, b * a)

    @given(fractions_(C2, allow_i=True, allow_hbar=True), fractions_(C2), fractions_(C2))
    def test_distributive(self, a, b, c):
        assert equals(a * (b + c), a * b + a * c)

    @given(fractions_(C2, allow_i=True, allow_hbar=True), fractions_(C2))
    def test_s_exponent_and_clean_denominator(self, a, b):
        for f in (a * b, a + b, derive(a, "x1"), divide(a, b) if not b.is_zero() else a):
            assert all(m.s_exp <= 1 for m, _ in f.numer.items())
            for m, c in f.denom.items():
                assert m.s_exp == 0 and m.hbar_exp == 0 and c.im == 0

    @given(fractions_(C3, max_terms=2), fractions_(C3, max_terms=2))
    def test_three_dimensional_ring(self, a, b):
        assert equals((a + b) * (a - b), a * a - b * b)
