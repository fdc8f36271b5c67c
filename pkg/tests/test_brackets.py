import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from starbracket.brackets import (
    QNB_MAX_ARITY,
    BracketError,
    BracketSpec,
    cnb,
    commutator,
    dirac,
    moyal,
    poisson,
    poisson_pairing,
    qnb,
    qnb4_resolve,
    qnb_permutations,
    star,
    star_chain,
    symplectic_trace,
)
from starbracket.models import sphere_model
from starbracket.ring import (
    Context,
    DivisionByZero,
    NonPolynomialMomentumDenominator,
    PhaseExpr,
    classical_limit,
    conjugate,
    divide,
    equals,
    hbar_order,
)
from starbracket.verify import RandomExprPolicy
from strategies import fractions_, polys

C1, C2, C3 = Context(1), Context(2), Context(3)
POLICY = RandomExprPolicy(seed=99)


def X(ctx, a):
    return PhaseExpr.x(ctx, a)


def P(ctx, a):
    return PhaseExpr.p(ctx, a)


@pytest.fixture(scope="module")
def s2():
    m = sphere_model(2)
    return m, -m.P(2), m.P(1), m.L(1, 2)


@st.composite
def linear_in_p(draw):
    """A + B1 p1 + B2 p2 with x, s and 1/u dependent coefficients."""
    coeff = fractions_(C2, max_terms=2, max_p=0)
    out = draw(coeff)
    for a in (1, 2):
        out = out + draw(coeff) * P(C2, a)
    return out


def rand(ctx, label, count, **kw):
    rng = POLICY.rng(label)
    return [POLICY.random_expr(ctx, rng, **kw) for _ in range(count)]


class TestPoisson:
    def test_canonical(self):
        assert equals(poisson(X(C1, 1), P(C1, 1)), PhaseExpr.one(C1))

    def test_so3(self, s2):
        _, lx, ly, lz = s2
        assert equals(poisson(lx, ly), lz)
        assert equals(poisson(ly, lz), lx)
        assert equals(poisson(lz, lx), ly)

    def test_h_conserves_lz(self, s2):
        m, *_ = s2
        assert poisson(m.h_classical, m.L(1, 2)).is_zero()

    def test_against_sympy(self):
        f, g = divide(X(C2, 1) * P(C2, 2) ** 2, PhaseExpr.u(C2)), PhaseExpr.s(C2) * P(C2, 1) + X(C2, 2)
        want = oracle.pb(oracle.to_sympy(f), oracle.to_sympy(g), 2)
        assert oracle.agree(poisson(f, g), want, 2)


class TestStar:
    def test_xp(self):
        hb, i = PhaseExpr.hbar(C1), PhaseExpr.i(C1)
        assert equals(star(X(C1, 1), P(C1, 1)), X(C1, 1) * P(C1, 1) + (i * hb).scale(Fraction(1, 2)))

    def test_unit(self):
        f = rand(C2, "unit", 1)[0]
        one = PhaseExpr.one(C2)
        assert equals(star(f, one), f) and equals(star(one, f), f)

    def test_rejects_p_denominator(self):
        bad = divide(1, P(C1, 1))
        with pytest.raises(NonPolynomialMomentumDenominator):
            star(bad, X(C1, 1))

    def test_accepts_x_denominators(self):
        f = divide(P(C2, 1) ** 2, PhaseExpr.u(C2))
        g = PhaseExpr.s(C2) * P(C2, 2) * X(C2, 1)
        want = oracle.star(oracle.to_sympy(f), oracle.to_sympy(g), 2)
        assert oracle.agree(star(f, g), want, 2)

    @pytest.mark.parametrize("seed", range(4))
    def test_against_exponential_oracle(self, seed):
        rng = random.Random(seed)
        pol = RandomExprPolicy(seed=seed, max_deg_p=3)
        f, g = pol.random_expr(C2, rng, n_terms=3), pol.random_expr(C2, rng, n_terms=3)
        want = sp.expand(oracle.star(oracle.to_sympy(f), oracle.to_sympy(g), 2))
        got = sp.expand(oracle.to_sympy(star(f, g)))
        assert sp.expand(want - got) == 0

    @given(polys(C2, max_terms=2, allow_s=False), polys(C2, max_terms=2, allow_s=False), polys(C2, max_terms=2, allow_s=False))
    def test_associative(self, f, g, h):
        assert equals(star(star(f, g), h), star(f, star(g, h)))

    @settings(max_examples=15)
    @given(fractions_(C2, max_terms=2), fractions_(C2, max_terms=2), fractions_(C2, max_terms=2))
    def test_associative_with_s_and_denominators(self, f, g, h):
        assert equals(star(star(f, g), h), star(f, star(g, h)))

    @given(polys(C2, max_terms=2, allow_i=True), polys(C2, max_terms=2, allow_i=True))
    def test_conjugation_reverses(self, f, g):
        assert equals(conjugate(star(f, g)), star(conjugate(g), conjugate(f)))

    def test_star_chain(self):
        a, b, c = rand(C1, "chain", 3)
        assert equals(star_chain(a, b, c), star(star(a, b), c))


class TestMoyal:
    def test_canonical(self):
        assert equals(moyal(X(C1, 1), P(C1, 1)), PhaseExpr.one(C1))

    def test_so3_undeformed(self, s2):
        _, lx, ly, lz = s2
        assert equals(moyal(lx, ly), lz)

    @given(fractions_(C2))
    def test_self_bracket_zero(self, f):
        assert moyal(f, f).is_zero()

    @given(polys(C2, max_terms=3), polys(C2, max_terms=3))
    def test_real_and_classical_limit(self, f, g):
        mb = moyal(f, g)
        assert mb.is_real()
        assert equals(classical_limit(mb), poisson(f, g))

    @settings(max_examples=20)
    @given(linear_in_p(), linear_in_p())
    def test_collapse_for_linear_momenta(self, f, g):
        assert equals(moyal(f, g), poisson(f, g))

    def test_commutator_relation(self):
        f, g = rand(C2, "comm", 2)
        hb, i = PhaseExpr.hbar(C2), PhaseExpr.i(C2)
        assert equals(commutator(f, g), i * hb * moyal(f, g))
        assert equals(commutator(f, g), star(f, g) - star(g, f))

    def test_groenewold_quartic(self):
        # {{x^3, p^3}} picks up a -3/2 hbar^2 correction over the Poisson bracket
        x, p, hb = X(C1, 1), P(C1, 1), PhaseExpr.hbar(C1)
        want = 9 * x * x * p * p - (hb * hb).scale(Fraction(3, 2))
        assert equals(moyal(x**3, p**3), want)


class TestCNB:
    def test_identity_jacobian(self):
        assert equals(cnb([X(C2, 1), P(C2, 1), X(C2, 2), P(C2, 2)]), PhaseExpr.one(C2))

    def test_s2_evolution(self, s2):
        m, lx, ly, lz = s2
        for k in rand(C2, "cnb-s2", 3) + [PhaseExpr.s(C2) * X(C2, 1)]:
            assert equals(cnb([k, lx, ly, lz]), poisson(k, m.h_classical))

    def test_hamiltonian_entry_vanishes(self, s2):
        m, lx, ly, lz = s2
        assert cnb([m.h_classical, lx, ly, lz]).is_zero()

    def test_against_determinant_oracle(self):
        args = rand(C2, "cnb-det", 4, n_terms=2)
        want = oracle.cnb([oracle.to_sympy(a) for a in args], 2)
        assert sp.expand(oracle.to_sympy(cnb(args)) - want) == 0

    def test_against_determinant_oracle_n3(self):
        args = rand(C3, "cnb-det3", 6, n_terms=2, max_deg_x=2, max_deg_p=1)
        want = oracle.cnb([oracle.to_sympy(a) for a in args], 3)
        assert sp.expand(oracle.to_sympy(cnb(args)) - want) == 0

    def test_two_args_is_poisson(self):
        f, g = rand(C1, "cnb-2", 2)
        assert equals(cnb([f, g]), poisson(f, g))

    @pytest.mark.parametrize("i,j", [(0, 1), (0, 3), (1, 2), (2, 3)])
    def test_antisymmetry(self, i, j):
        args = rand(C2, "cnb-anti", 4)
        swapped = list(args)
        swapped[i], swapped[j] = swapped[j], swapped[i]
        assert equals(cnb(swapped), -cnb(args))

    def test_leibniz(self):
        f, g, *rest = rand(C2, "cnb-leib", 5)
        assert equals(cnb([f * g] + rest), f * cnb([g] + rest) + g * cnb([f] + rest))

    def test_arity_errors(self):
        f = X(C2, 1)
        with pytest.raises(BracketError):
            cnb([f, f, f])
        with pytest.raises(BracketError):
            cnb([f] * 6)


class TestTraces:
    def test_trace_to_poisson(self):
        for ctx in (C2, C3):
            f, g = rand(ctx, f"trace{ctx.n}", 2)
            assert equals(symplectic_trace([f, g], ctx.n - 1), poisson(f, g))

    def test_no_op(self):
        f, g = rand(C1, "trace-noop", 2)
        assert equals(symplectic_trace([f, g], 0), cnb([f, g]))

    def test_lower_rank_n3(self):
        args = rand(C3, "trace-4", 4, n_terms=2)
        want = symplectic_trace(args, 1)
        assert equals(cnb(args), want)
        # direct sum over the inserted pair, no helper
        direct = PhaseExpr.zero(C3)
        for a in (1, 2, 3):
            direct = direct + cnb(args + [X(C3, a), P(C3, a)])
        assert equals(want, direct)

    def test_overflow(self):
        f, g = rand(C2, "trace-over", 2)
        with pytest.raises(BracketError):
            symplectic_trace([f, g], 2)


class TestQNB:
    def test_two_is_commutator(self):
        a, b = rand(C2, "q2", 2)
        hb, i = PhaseExpr.hbar(C2), PhaseExpr.i(C2)
        assert equals(qnb([a, b]), i * hb * moyal(a, b))

    def test_constant_entry_even(self):
        b, c, d = rand(C2, "q-const", 3)
        assert qnb([PhaseExpr.one(C2), b, c, d]).is_zero()
        assert qnb4_resolve(PhaseExpr.one(C2), b, c, d).is_zero()

    def test_constant_entry_odd(self):
        b, c = rand(C2, "q-odd", 2)
        three = qnb([PhaseExpr.one(C2), b, c])
        assert equals(three, qnb([b, c])) and not three.is_zero()

    def test_against_permutation_oracle(self):
        args = rand(C1, "q-sympy", 3, n_terms=2, max_deg_x=2, max_deg_p=2)
        want = oracle.qnb([oracle.to_sympy(a) for a in args], 1)
        assert sp.expand(oracle.to_sympy(qnb(args)) - want) == 0

    @pytest.mark.parametrize("m", [3, 4, 5])
    def test_matches_prefix_tree(self, m):
        args = rand(C2, f"q-perm{m}", m, n_terms=2)
        assert equals(qnb(args), qnb_permutations(args))

    def test_resolve(self):
        for t in range(4):
            a, b, c, d = rand(C2, f"resolve{t}", 4)
            assert equals(qnb4_resolve(a, b, c, d), qnb([a, b, c, d]))

    def test_pairing_leading_order(self):
        a, b, c, d = rand(C2, "pairing", 4)
        hb = PhaseExpr.hbar(C2)
        rest = qnb([a, b, c, d]) + (hb * hb * poisson_pairing(a, b, c, d)).scale(2)
        assert hbar_order(rest) >= 4

    def test_antisymmetry(self):
        a, b, c, d = rand(C2, "q-anti", 4)
        assert equals(qnb([b, a, c, d]), -qnb([a, b, c, d]))

    def test_arity_cap(self):
        f = X(C1, 1)
        with pytest.raises(BracketError):
            qnb([f] * (QNB_MAX_ARITY + 1))
        with pytest.raises(BracketError):
            qnb([f])

    def test_s2_law(self, s2):
        m, lx, ly, lz = s2
        hb = PhaseExpr.hbar(C2)
        k = X(C2, 1)
        assert equals(qnb([k, lx, ly, lz]), (hb * hb * moyal(k, m.h_quantum)).scale(-2))


class TestDirac:
    def test_normalization(self, s2):
        _, lx, ly, lz = s2
        f, g = rand(C2, "db", 2)
        assert equals(dirac(f, g, [lx, ly]) * poisson(lx, ly), cnb([f, g, lx, ly]))

    def test_antisymmetric(self, s2):
        _, lx, ly, _ = s2
        f = rand(C2, "db-anti", 1)[0]
        assert dirac(f, f, [lx, ly]).is_zero()

    def test_hamiltonian_form(self, s2):
        m, lx, ly, lz = s2
        f = rand(C2, "db-h", 1)[0]
        assert equals(cnb([f, lx, ly, lz]), dirac(f, m.h_classical, [lx, ly]))
        assert equals(cnb([f, m.h_classical, lx, ly]), lz * cnb([f, lx, ly, lz]))

    def test_zero_normalization(self, s2):
        _, lx, *_ = s2
        with pytest.raises(DivisionByZero):
            dirac(X(C2, 1), P(C2, 1), [lx, lx])


class TestSpec:
    def test_evaluate(self, s2):
        _, lx, ly, lz = s2
        assert equals(BracketSpec("pb", [lx, ly]).evaluate(), lz)
        assert equals(BracketSpec("trace", [lx, ly], traced_pairs=1).evaluate(), lz)
        assert equals(BracketSpec("db", [lx, lz], constraints=[lx, ly]).evaluate(), PhaseExpr.zero(C2))

    def test_unknown(self):
        with pytest.raises(BracketError):
            BracketSpec("xyz", [])
