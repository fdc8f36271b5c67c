import pytest

from starbracket.models import sphere_model
from starbracket.ring import Context, PhaseExpr, hbar_order
from starbracket.verify import (
    SUITE_NAMES,
    SUITES,
    RandomExprPolicy,
    UnknownSuite,
    run_suite,
    s3_entwined_remainder,
)


class TestPolicy:
    def test_deterministic(self):
        ctx = Context(2)
        pol = RandomExprPolicy(seed=5)
        a = [pol.random_expr(ctx, pol.rng("t")) for _ in range(3)]
        b = [pol.random_expr(ctx, pol.rng("t")) for _ in range(3)]
        assert [str(x) for x in a] == [str(x) for x in b]

    def test_bounds(self):
        ctx = Context(3)
        pol = RandomExprPolicy(seed=11, max_deg_x=2, max_deg_p=1, max_degree=2)
        rng = pol.rng("b")
        for _ in range(20):
            f = pol.random_expr(ctx, rng)
            for mono, coef in f.numer.items():
                assert sum(mono.x_exp) <= 2 and sum(mono.p_exp) <= 1
                assert sum(mono.x_exp) + sum(mono.p_exp) <= 2
                assert mono.s_exp == 0 and coef.im == 0 and coef.re != 0
            assert f.degree() > 0


class TestSuites:
    def test_names(self):
        assert set(SUITE_NAMES) == set(SUITES) | {"all"}

    def test_unknown(self):
        with pytest.raises(UnknownSuite):
            run_suite("nope", 2)

    def test_corrections_n3(self):
        rep = run_suite("corrections", 3)
        assert rep.passed and rep.records[0].residual == "0"

    def test_collapse_seed7(self):
        assert run_suite("collapse", 2, RandomExprPolicy(seed=7)).passed

    def test_groenewold_order(self):
        rep = run_suite("groenewold", 2)
        assert rep.passed
        witnesses = [r for r in rep.records if r.id.endswith("!=0")]
        assert witnesses and all(r.hbar_order == "2" for r in witnesses)

    def test_byte_identical(self):
        a = run_suite("star_algebra", 2, RandomExprPolicy(seed=3)).to_json()
        b = run_suite("star_algebra", 2, RandomExprPolicy(seed=3)).to_json()
        assert a == b

    def test_failure_reports_residual(self):
        from starbracket.verify import SuiteReport, _Recorder

        ctx = Context(1)
        rep = SuiteReport("demo", 1, 0, None)
        rec = _Recorder(rep)
        rec.equal("bad", "x1 = p1", PhaseExpr.x(ctx, 1), PhaseExpr.p(ctx, 1))
        assert not rep.passed
        assert "first failing residual (bad): x1 - p1" in rep.to_text()

    def test_needs_n2(self):
        with pytest.raises(ValueError):
            run_suite("v_invariance", 1)

    @pytest.mark.parametrize("name", ["so_closure", "conservation", "cnb_leibniz", "traces", "v_invariance", "const_qnb", "odd_qnb"])
    def test_generic_suites_n3(self, name):
        assert run_suite(name, 3).passed

    @pytest.mark.parametrize("name", ["cnb_fi", "dirac", "chiral", "spectra", "s3_cnb"])
    def test_fixed_suites(self, name):
        assert run_suite(name, 2).passed

    def test_timings_optional(self):
        rep = run_suite("spectra", 2)
        assert "seconds" not in rep.to_dict()["records"][0]
        assert "seconds" in rep.to_dict(timings=True)["records"][0]


class TestEntwined:
    def test_sign_flag(self):
        rep = run_suite("s3_entwined", 3)
        assert rep.passed
        assert any("3*(i*hbar)^3" in f for f in rep.flags)

    def test_remainder_orders(self):
        k = PhaseExpr.x(sphere_model(3).ctx, 1)
        assert hbar_order(s3_entwined_remainder(k, -1)) >= 5
        assert hbar_order(s3_entwined_remainder(k, +1)) == 3

    def test_repeated_invariant(self):
        m = sphere_model(3)
        assert s3_entwined_remainder(m.P(1)).is_zero()


@pytest.mark.slow
@pytest.mark.parametrize("name,n", [("star_algebra", 2), ("s2_qnb", 2), ("cnb_fi", 2), ("dirac", 2)])
def test_suites_with_s(name, n):
    assert run_suite(name, n, RandomExprPolicy(allow_s=True)).passed
