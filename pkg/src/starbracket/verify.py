"""Seeded identity suites over the bracket engine.

Every must-vanish check compares two expressions with exact ``equals``;
order bounds use ``hbar_order``.  Random test functions come from a
:class:`RandomExprPolicy`, so a (suite, n, policy) triple always produces the
same report.
"""

from __future__ import annotations

import json
import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

from .brackets import (
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
    symplectic_trace,
)
from .models import (
    casimir_spectrum,
    chiral_quantum_h,
    chiral_s3,
    christoffel_contraction,
    eom_residual,
    expected_correction,
    levi_civita,
    nambu_velocity_factor,
    sphere_model,
    structure_constant_square,
)
from .ring import INFINITE, Context, PhaseExpr, classical_limit, conjugate, divide, equals, hbar_order
from .syntax import JSON_SCHEMA_VERSION, render

DEFAULT_SEED = 1729
RESIDUAL_PREVIEW = 400


class UnknownSuite(KeyError):
    pass


@dataclass(frozen=True)
class RandomExprPolicy:
    seed: int = DEFAULT_SEED
    max_deg_x: int = 3
    max_deg_p: int = 2
    max_degree: int | None = None
    n_terms: int = 4
    allow_s: bool = False
    coeff_num: int = 5
    coeff_den: int = 3
    require_p: bool = False

    def rng(self, *labels) -> random.Random:
        return random.Random(":".join(str(v) for v in (self.seed,) + labels))

    def with_degree(self, degree: int | None) -> "RandomExprPolicy":
        if degree is None:
            return self
        return replace(self, max_degree=degree)

    def random_expr(self, ctx: Context, rng: random.Random, **overrides) -> PhaseExpr:
        """Nonconstant polynomial with small nonzero rational coefficients."""
        pol = replace(self, **overrides) if overrides else self
        n = ctx.n
        while True:
            f = PhaseExpr.zero(ctx)
            for _ in range(pol.n_terms):
                while True:
                    dx = rng.randint(0, pol.max_deg_x)
                    dp = rng.randint(0, pol.max_deg_p)
                    if pol.max_degree is None or dx + dp <= pol.max_degree:
                        break
                term = PhaseExpr.one(ctx)
                for _ in range(dx):
                    term = term * PhaseExpr.x(ctx, rng.randint(1, n))
                for _ in range(dp):
                    term = term * PhaseExpr.p(ctx, rng.randint(1, n))
                if pol.allow_s and rng.random() < 0.5:
                    term = term * PhaseExpr.s(ctx)
                num = rng.randint(1, pol.coeff_num) * rng.choice((-1, 1))
                f = f + term.scale(Fraction(num, rng.randint(1, pol.coeff_den)))
            if f.is_zero() or f.degree() == 0:
                continue
            if pol.require_p and not any(f.p_degrees()):
                continue
            return f


@dataclass
class IdentityRecord:
    id: str
    anchor: str
    status: str
    residual: str = "0"
    hbar_order: str = "inf"
    note: str = ""
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass
class SuiteReport:
    suite: str
    n: int
    seed: int
    degree: int | None
    records: list[IdentityRecord] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def to_dict(self, timings: bool = False) -> dict:
        recs = []
        for r in self.records:
            d = asdict(r)
            if not timings:
                d.pop("seconds")
            recs.append(d)
        return {
            "schemaVersion": JSON_SCHEMA_VERSION,
            "suite": self.suite,
            "n": self.n,
            "seed": self.seed,
            "degree": self.degree,
            "passed": self.passed,
            "flags": list(self.flags),
            "records": recs,
        }

    def to_json(self, timings: bool = False) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True)

    def to_text(self, timings: bool = False) -> str:
        lines = [f"suite {self.suite}  N={self.n}  seed={self.seed}  degree={self.degree}"]
        first_failure = None
        for r in self.records:
            extra = f"  [{r.seconds:.3f}s]" if timings else ""
            order = f"  hbar-order={r.hbar_order}" if r.hbar_order != "inf" else ""
            note = f"  ({r.note})" if r.note else ""
            lines.append(f"  {r.status.upper():4}  {r.id}  -- {r.anchor}{order}{note}{extra}")
            if not r.passed and first_failure is None:
                first_failure = r
        for flag in self.flags:
            lines.append(f"  FLAG  {flag}")
        if first_failure is not None:
            res = first_failure.residual
            if len(res) > RESIDUAL_PREVIEW:
                res = res[:RESIDUAL_PREVIEW] + " ..."
            lines.append(f"  first failing residual ({first_failure.id}): {res}")
        lines.append(f"  result: {'PASS' if self.passed else 'FAIL'} ({sum(r.passed for r in self.records)}/{len(self.records)})")
        return "\n".join(lines)


def _order_text(value) -> str:
    return "inf" if value == INFINITE else str(value)


class _Recorder:
    def __init__(self, report: SuiteReport):
        self.report = report
        self._t = time.perf_counter()

    def _push(self, rec: IdentityRecord):
        now = time.perf_counter()
        rec.seconds = round(now - self._t, 6)
        self._t = now
        self.report.records.append(rec)
        return rec

    def equal(self, ident: str, anchor: str, lhs: PhaseExpr, rhs, note: str = ""):
        """Pass iff lhs == rhs exactly; the residual is lhs - rhs."""
        if not isinstance(rhs, PhaseExpr):
            rhs = PhaseExpr.const(lhs.ctx, rhs)
        ok = equals(lhs, rhs)
        residual = PhaseExpr.zero(lhs.ctx) if ok else lhs - rhs
        return self._push(
            IdentityRecord(
                ident,
                anchor,
                "pass" if ok else "fail",
                render(residual),
                _order_text(hbar_order(residual)),
                note,
            )
        )

    def order(self, ident: str, anchor: str, expr: PhaseExpr, minimum: int, exact: bool = False, note: str = ""):
        """Pass iff hbar_order(expr) >= minimum (== minimum and nonzero when exact)."""
        o = hbar_order(expr)
        ok = (o == minimum) if exact else (o >= minimum)
        return self._push(
            IdentityRecord(ident, anchor, "pass" if ok else "fail", render(expr), _order_text(o), note)
        )

    def truth(self, ident: str, anchor: str, ok: bool, note: str = ""):
        return self._push(IdentityRecord(ident, anchor, "pass" if ok else "fail", "0", "inf", note))


def _zero(ctx):
    return PhaseExpr.zero(ctx)


def _sum(items, ctx):
    return sum(items, PhaseExpr.zero(ctx))


def _s2_generators():
    model = sphere_model(2)
    # L_x = -s p_2, L_y = s p_1, L_z = x1 p2 - x2 p1
    return model, -model.P(2), model.P(1), model.L(1, 2)


# ---------------------------------------------------------------------------
# suites


def suite_so_closure(n, policy, rec):
    m = sphere_model(n)
    ctx = m.ctx
    anchor = "so(N+1) closure of de Sitter momenta and rotations"
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            rec.equal(f"PB(P{a},P{b})=L{a}{b}", anchor, poisson(m.P(a), m.P(b)), m.L(a, b))
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            for c in range(1, n + 1):
                rhs = (m.P(b) if a == c else _zero(ctx)) - (m.P(a) if b == c else _zero(ctx))
                rec.equal(f"PB(L{a}{b},P{c})", anchor, poisson(m.L(a, b), m.P(c)), rhs)
    pairs = [(a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1)]
    for a, b in pairs:
        for c, d in pairs:
            rhs = _zero(ctx)
            if a == c:
                rhs = rhs + m.L(b, d)
            if b == d:
                rhs = rhs + m.L(a, c)
            if b == c:
                rhs = rhs - m.L(a, d)
            if a == d:
                rhs = rhs - m.L(b, c)
            rec.equal(f"PB(L{a}{b},L{c}{d})", anchor, poisson(m.L(a, b), m.L(c, d)), rhs)
    if n == 2:
        _, lx, ly, lz = _s2_generators()
        so3 = "so(3) angular momentum algebra on S^2"
        rec.equal("PB(Lx,Ly)=Lz", so3, poisson(lx, ly), lz)
        rec.equal("PB(Ly,Lz)=Lx", so3, poisson(ly, lz), lx)
        rec.equal("PB(Lz,Lx)=Ly", so3, poisson(lz, lx), ly)


def _random_linear(policy, ctx, rng):
    """p-degree <= 1 with x, s and 1/u coefficients."""
    base = policy.random_expr(ctx, rng, max_deg_p=1, allow_s=False)
    with_s = policy.random_expr(ctx, rng, max_deg_p=1, allow_s=False) * PhaseExpr.s(ctx)
    over_u = divide(policy.random_expr(ctx, rng, max_deg_p=1, allow_s=False), PhaseExpr.u(ctx))
    return base + with_s + over_u


def suite_collapse(n, policy, rec):
    m = sphere_model(n)
    anchor = "Moyal bracket collapses to Poisson bracket for momentum-linear entries"
    inv = m.invariants
    for i, (na, a) in enumerate(inv):
        for nb, b in inv[i + 1 :]:
            rec.equal(f"MB({na},{nb})=PB", anchor, moyal(a, b), poisson(a, b))
    for t in range(5):
        rng = policy.rng("collapse", n, t)
        f = _random_linear(policy, m.ctx, rng)
        g = _random_linear(policy, m.ctx, rng)
        rec.equal(f"random-linear-{t}", anchor, moyal(f, g), poisson(f, g))


def suite_conservation(n, policy, rec):
    m = sphere_model(n)
    for name, inv in m.invariants:
        rec.equal(f"PB({name},H)=0", "classical conservation of invariants", poisson(inv, m.h_classical), 0)
        rec.equal(f"MB({name},Hqm)=0", "quantum conservation with star-ordered Casimir", moyal(inv, m.h_quantum), 0)
    for a in range(1, n + 1):
        rec.equal(f"eom-residual-{a}", "geodesic equations of motion", eom_residual(n, a), 0)
    if n == 2:
        ctx = m.ctx
        qp = _sum((PhaseExpr.x(ctx, a) * PhaseExpr.p(ctx, a) for a in (1, 2)), ctx)
        for a in (1, 2):
            pa = PhaseExpr.p(ctx, a)
            rec.equal(f"PB(p{a},H)=p{a}(q.p)", "S^2 momentum evolution", poisson(pa, m.h_classical), pa * qp)


def suite_groenewold(n, policy, rec):
    m = sphere_model(n)
    for a in range(1, n + 1):
        w = moyal(m.P(a), m.h_classical)
        rec.order(
            f"MB(P{a},H)!=0",
            "classical hamiltonian fails to Moyal-commute with de Sitter momenta",
            w,
            2,
            exact=True,
        )
    for (a, b), lab in sorted(m.rotations.items()):
        rec.equal(
            f"MB(L{a}{b},H)=0",
            "rotations stay Moyal-commuting (linear symplectic covariance)",
            moyal(lab, m.h_classical),
            0,
        )


def suite_corrections(n, policy, rec):
    m = sphere_model(n)
    ctx = m.ctx
    rec.equal("Hqm-H", "quantum correction (hbar^2/8)(1/u - 1 - N(N-1))", m.correction, expected_correction(n))
    hb = PhaseExpr.hbar(ctx)
    dg = (hb * hb * (m.det_g - (1 + n * (n - 1)))).scale(Fraction(1, 8))
    rec.equal("Hqm-H-det-g", "quantum correction in terms of det g", m.h_quantum - m.h_classical - dg, 0)
    rec.equal("classical-limit", "Hqm reduces to H as hbar -> 0", classical_limit(m.h_quantum), m.h_classical)
    rec.order("correction-order", "correction is O(hbar^2)", m.correction, 2, exact=True)
    pole = m.correction.eval_at({}, hbar=1)
    rec.truth(
        "north-pole",
        "at u = 1 the correction is the flat constant -N(N-1)/8",
        pole == Fraction(-n * (n - 1), 8),
        note=f"value {pole}",
    )


def _fi_terms(args, v):
    """Both sides of the generalized fundamental identity for 4-brackets."""
    a1, a2, a3, a4, a5, a6, a7 = args

    def vb(*xs):
        return v * cnb(list(xs))

    lhs = (
        cnb([vb(a1, a2, a3, a4), a5, a6, a7])
        + cnb([a4, vb(a1, a2, a3, a5), a6, a7])
        + cnb([a4, a5, vb(a1, a2, a3, a6), a7])
        + cnb([a4, a5, a6, vb(a1, a2, a3, a7)])
    )
    rhs = cnb([a1, a2, a3, vb(a4, a5, a6, a7)])
    return lhs, rhs


def suite_cnb_fi(n, policy, rec):
    ctx = Context(2)
    pol = policy.with_degree(policy.max_degree or 2)
    for t in range(2):
        rng = pol.rng("cnb_fi", t)
        args = [pol.random_expr(ctx, rng, n_terms=4, require_p=True) for _ in range(7)]
        v = pol.random_expr(ctx, rng, n_terms=3)
        lhs, rhs = _fi_terms(args, PhaseExpr.one(ctx))
        rec.equal(f"FI-{t}", "fundamental identity of 4-brackets", lhs, rhs)
        rec.truth(f"FI-{t}-nonvacuous", "instance has a nonzero right-hand side", not rhs.is_zero())
        lhs, rhs = _fi_terms(args, v)
        rec.equal(f"FI-V-{t}", "fundamental identity with prefactor V", lhs, rhs)
        rec.truth(f"FI-V-{t}-nonvacuous", "instance has a nonzero right-hand side", not rhs.is_zero())


def suite_cnb_leibniz(n, policy, rec):
    ctx = Context(n)
    for t in range(3):
        rng = policy.rng("cnb_leibniz", n, t)
        f = policy.random_expr(ctx, rng)
        g = policy.random_expr(ctx, rng)
        rest = [policy.random_expr(ctx, rng, n_terms=2) for _ in range(2 * n - 1)]
        lhs = cnb([f * g] + rest)
        rhs = f * cnb([g] + rest) + g * cnb([f] + rest)
        rec.equal(f"leibniz-{t}", "Nambu bracket is a derivation in each entry", lhs, rhs)
        args = [f] + rest
        swapped = [rest[0], f] + rest[1:]
        rec.equal(f"antisym-{t}", "Nambu bracket flips sign under a transposition", cnb(swapped), -cnb(args))


def suite_v_invariance(n, policy, rec):
    if n < 2:
        raise ValueError("v_invariance needs N >= 2")
    m = sphere_model(n)
    v = nambu_velocity_factor(n)
    entries = m.nambu_entries()
    rec.equal("PB(V,H)=0", "velocity factor is time invariant", poisson(v, m.h_classical), 0)
    rec.equal("CNB(V,invariants)=0", "velocity factor depends only on invariants", cnb([v] + entries), 0)
    for t in range(2 if n >= 4 else 3):
        rng = policy.rng("v_invariance", n, t)
        k = policy.random_expr(m.ctx, rng, max_deg_p=1 if n >= 4 else policy.max_deg_p)
        rec.equal(f"nambu-evolution-{t}", "dk/dt = V {k, invariants}", v * cnb([k] + entries), poisson(k, m.h_classical))


def suite_traces(n, policy, rec):
    if n < 2:
        raise ValueError("traces needs N >= 2")
    ctx = Context(n)
    for t in range(2):
        rng = policy.rng("traces", n, t)
        f, g = policy.random_expr(ctx, rng), policy.random_expr(ctx, rng)
        rec.equal(
            f"trace-to-PB-{t}",
            "maximal symplectic trace of a Nambu bracket is the Poisson bracket",
            symplectic_trace([f, g], n - 1),
            poisson(f, g),
        )
        for k in range(2, n):
            args = [policy.random_expr(ctx, rng, n_terms=2) for _ in range(2 * k)]
            rec.equal(
                f"trace-rank{2 * k}-{t}",
                "lower-rank bracket equals normalized symplectic trace",
                symplectic_trace(args, n - k),
                cnb(args),
            )


def s2_qnb_law(k: PhaseExpr, rec: _Recorder, label: str):
    model, lx, ly, lz = _s2_generators()
    ctx = model.ctx
    hb = PhaseExpr.hbar(ctx)
    i = PhaseExpr.i(ctx)
    casimir = star(lx, lx) + star(ly, ly) + star(lz, lz)
    lhs = qnb([k, lx, ly, lz])
    anchor = "S^2 quantum Nambu bracket equals -2 hbar^2 times Moyal evolution"
    rec.equal(f"{label}:QNB=ihbar[k,L.L]", anchor, lhs, i * hb * commutator(k, casimir))
    rec.equal(f"{label}:QNB=-2hbar^2MB", anchor, lhs, (hb * hb * moyal(k, model.h_quantum)).scale(-2))
    leading = lhs.hbar_coefficient(2).scale(Fraction(-1, 2))
    rec.equal(
        f"{label}:classical-limit",
        "leading order reproduces the classical 4-bracket evolution",
        classical_limit(leading),
        classical_limit(cnb([k, lx, ly, lz])),
    )


def suite_s2_qnb(n, policy, rec):
    model, *_ = _s2_generators()
    ctx = model.ctx
    s2_qnb_law(PhaseExpr.x(ctx, 1), rec, "k=x1")
    s2_qnb_law(model.h_quantum, rec, "k=Hqm")
    pol = policy.with_degree(policy.max_degree or 3)
    for t in range(20):
        s2_qnb_law(pol.random_expr(ctx, pol.rng("s2_qnb", t)), rec, f"random-{t}")


def suite_qnb_leibniz(n, policy, rec):
    model, lx, ly, lz = _s2_generators()
    ctx = model.ctx
    pol = policy.with_degree(policy.max_degree or 2)
    for t in range(3):
        rng = pol.rng("qnb_leibniz", t)
        a, b = pol.random_expr(ctx, rng, require_p=True), pol.random_expr(ctx, rng, require_p=True)
        lhs = qnb([star(a, b), lx, ly, lz])
        rhs = star(a, qnb([b, lx, ly, lz])) + star(qnb([a, lx, ly, lz]), b)
        rec.equal(f"qleibniz-{t}", "S^2 quantum Nambu bracket is a star derivation", lhs, rhs)


def suite_qnb_fi(n, policy, rec):
    model, lx, ly, lz = _s2_generators()
    ctx = model.ctx
    pol = policy.with_degree(policy.max_degree or 2)
    for t in range(2):
        rng = pol.rng("qnb_fi", t)
        d, e, f, g = (pol.random_expr(ctx, rng, n_terms=2, require_p=True) for _ in range(4))

        def act(z):
            return qnb([lx, ly, lz, z])

        lhs = qnb([act(d), e, f, g]) + qnb([d, act(e), f, g]) + qnb([d, e, act(f), g]) + qnb([d, e, f, act(g)])
        rhs = act(qnb([d, e, f, g]))
        rec.equal(f"qfi-{t}", "S^2 quantum Nambu fundamental identity", lhs, rhs)
        rec.truth(f"qfi-{t}-nonvacuous", "instance has a nonzero right-hand side", not rhs.is_zero())


def suite_const_qnb(n, policy, rec):
    ctx = Context(n)
    for t in range(3):
        rng = policy.rng("const_qnb", n, t)
        b, c, d = (policy.random_expr(ctx, rng) for _ in range(3))
        const = PhaseExpr.const(ctx, Fraction(rng.randint(1, 9), rng.randint(1, 4)))
        anchor = "even quantum Nambu bracket vanishes with a constant entry"
        rec.equal(f"qnb(c,B,C,D)=0-{t}", anchor, qnb([const, b, c, d]), 0)
        rec.equal(f"resolve(1,B,C,D)=0-{t}", anchor, qnb4_resolve(PhaseExpr.one(ctx), b, c, d), 0)


def suite_odd_qnb(n, policy, rec):
    ctx = Context(n)
    for t in range(3):
        rng = policy.rng("odd_qnb", n, t)
        b, c = policy.random_expr(ctx, rng), policy.random_expr(ctx, rng)
        three = qnb([PhaseExpr.one(ctx), b, c])
        two = qnb([b, c])
        rec.equal(f"qnb(1,B,C)=qnb(B,C)-{t}", "odd bracket with a constant entry reduces to a commutator", three, two)
        rec.truth(f"qnb(B,C)!=0-{t}", "the reduced commutator does not vanish", not two.is_zero())


def suite_star_algebra(n, policy, rec):
    ctx = Context(n)
    pol3 = policy.with_degree(policy.max_degree or 3)
    pol2 = policy.with_degree(policy.max_degree or 2)
    one = PhaseExpr.one(ctx)
    for t in range(50):
        rng = pol3.rng("assoc", n, t)
        f, g, h = (pol3.random_expr(ctx, rng, n_terms=3) for _ in range(3))
        rec.equal(f"assoc-{t}", "star product is associative", star(star(f, g), h), star(f, star(g, h)))
    for t in range(5):
        rng = pol3.rng("unit", n, t)
        f, g = pol3.random_expr(ctx, rng), pol3.random_expr(ctx, rng)
        rec.equal(f"unit-left-{t}", "1 is the star unit", star(one, f), f)
        rec.equal(f"unit-right-{t}", "1 is the star unit", star(f, one), f)
        rec.equal(
            f"conj-{t}",
            "conjugation reverses star products",
            conjugate(star(f, g)),
            star(conjugate(g), conjugate(f)),
        )
        rec.equal(f"limit-{t}", "Moyal bracket tends to Poisson bracket", classical_limit(moyal(f, g)), poisson(f, g))
        rec.truth(f"real-MB-{t}", "Moyal bracket of real functions is real", moyal(f, g).is_real())
    for t in range(20):
        rng = pol2.rng("resolve", n, t)
        for _ in range(10):
            a, b, c, d = (pol2.random_expr(ctx, rng, n_terms=3, require_p=True) for _ in range(4))
            q4 = qnb([a, b, c, d])
            if not q4.is_zero():
                break
        rec.equal(f"resolve-{t}", "four-bracket resolves into commutator products", qnb4_resolve(a, b, c, d), q4)
        if t < 3:
            rec.equal(f"perm-sum-{t}", "subset expansion equals signed permutation sum", q4, qnb_permutations([a, b, c, d]))
        if n >= 2 and t < 5:
            hb = PhaseExpr.hbar(ctx)
            rec.order(
                f"pairing-{t}",
                "four-bracket minus -2 hbar^2 times Poisson pairing is O(hbar^4)",
                q4 + (hb * hb * poisson_pairing(a, b, c, d)).scale(2),
                4,
            )


def suite_s3_cnb(n, policy, rec):
    m = sphere_model(3)
    entries = m.nambu_entries()
    pol = policy.with_degree(policy.max_degree or 2)
    for t in range(10):
        k = pol.random_expr(m.ctx, pol.rng("s3_cnb", t))
        rec.equal(
            f"cnb6-{t}",
            "S^3 six-bracket equals P2 times hamiltonian evolution",
            cnb([k] + entries),
            m.P(2) * poisson(k, m.h_classical),
        )


def _s3_parts(k: PhaseExpr):
    m = sphere_model(3)
    six = qnb([k] + m.nambu_entries())
    mb = moyal(k, m.h_quantum)
    jordan = star(m.P(2), mb) + star(mb, m.P(2))
    hb3 = PhaseExpr.hbar(m.ctx) ** 3
    return six, PhaseExpr.i(m.ctx) * hb3 * jordan


def s3_entwined_remainder(k: PhaseExpr, sign: int = +1) -> PhaseExpr:
    """qnb(k, P1, L12, P2, L23, P3) - sign*3i hbar^3 (P2*MB(k,Hqm) + MB(k,Hqm)*P2)."""
    six, ij = _s3_parts(k)
    return six - ij.scale(3 * sign)


def s3_entwined_check(k: PhaseExpr, rec: _Recorder, label: str, report: SuiteReport):
    m = sphere_model(3)
    ctx = m.ctx
    anchor = "S^3 six-bracket entwines evolution in a Jordan product up to O(hbar^5)"
    six, ij = _s3_parts(k)
    literal, flipped = six - ij.scale(3), six + ij.scale(3)
    lo, fo = hbar_order(literal), hbar_order(flipped)
    if lo < 5 and fo >= 5:
        sign, remainder = -1, flipped
        flag = "Jordan coefficient sign: remainder is O(hbar^5) only with -3i*hbar^3 = 3*(i*hbar)^3"
        if flag not in report.flags:
            report.flags.append(flag)
    else:
        sign, remainder = +1, literal
    rec.order(
        f"{label}:Q",
        anchor,
        remainder,
        5,
        note=f"coefficient {'+' if sign > 0 else '-'}3i*hbar^3; +3i*hbar^3 leaves order {_order_text(lo)}",
    )
    classical = cnb([k] + m.nambu_entries())
    rec.equal(
        f"{label}:classical-limit",
        "leading hbar^3 term of the six-bracket is 6(i hbar)^3 times the classical six-bracket",
        classical_limit(six.hbar_coefficient(3)),
        (PhaseExpr.i(ctx) * classical).scale(-6),
    )
    rec.equal(f"{label}:cnb6=P2{{k,H}}", "classical S^3 Nambu evolution", classical, m.P(2) * poisson(k, m.h_classical))


def suite_s3_entwined(n, policy, rec):
    m = sphere_model(3)
    ctx = m.ctx
    report = rec.report
    s3_entwined_check(PhaseExpr.x(ctx, 1), rec, "k=x1", report)
    rec.equal("k=P1:six-bracket", "repeated invariant entry gives a vanishing bracket", qnb([m.P(1)] + m.nambu_entries()), 0)
    pol = policy.with_degree(policy.max_degree or 2)
    for t in range(5):
        k = pol.random_expr(ctx, pol.rng("s3_entwined", t))
        s3_entwined_check(k, rec, f"random-{t}", report)


def suite_dirac(n, policy, rec):
    model, lx, ly, lz = _s2_generators()
    ctx = model.ctx
    h = model.h_classical
    cons = [lx, ly]
    pol = policy.with_degree(policy.max_degree or 2)
    for t in range(2):
        rng = pol.rng("dirac", t)
        f, g, k = (pol.random_expr(ctx, rng, n_terms=3, require_p=True) for _ in range(3))

        def db(a, b):
            return dirac(a, b, cons)

        jac = db(db(f, g), k) + db(db(g, k), f) + db(db(k, f), g)
        rec.equal(f"jacobi-{t}", "Dirac brackets from 4-brackets obey Jacobi", jac, 0)
        rec.equal(f"antisym-{t}", "Dirac bracket is antisymmetric", db(f, f), 0)
        rec.equal(f"normalization-{t}", "constraint bracket times Dirac bracket is the 4-bracket", db(f, g) * poisson(lx, ly), cnb([f, g, lx, ly]))
        rec.equal(f"DB(f,H)-{t}", "{f, Lx, Ly, Lz} equals the Dirac bracket with H", db(f, h), cnb([f, lx, ly, lz]))
        rec.equal(f"cnb(f,H,Lx,Ly)-{t}", "{f, H, Lx, Ly} = Lz {f, Lx, Ly, Lz}", cnb([f, h, lx, ly]), lz * cnb([f, lx, ly, lz]))


def suite_chiral(n, policy, rec):
    data = chiral_s3()
    ctx = data.ctx
    model = sphere_model(3)
    anchor_lie = "left and right charges close into su(2) with f = epsilon and factor -2"
    for sign, name in ((+1, "R"), (-1, "L")):
        qs = data.charges(sign)
        for j in range(3):
            for k in range(3):
                rhs = _sum((qs[m_] * (-2 * levi_civita(j, k, m_)) for m_ in range(3) if levi_civita(j, k, m_)), ctx)
                rec.equal(f"PB({name}{j + 1},{name}{k + 1})", anchor_lie, poisson(qs[j], qs[k]), rhs)
    for j in range(3):
        for k in range(3):
            rec.equal(f"PB(R{j + 1},L{k + 1})=0", "left and right charges commute", poisson(data.charges_r[j], data.charges_l[k]), 0)
            rec.equal(f"MB(R{j + 1},L{k + 1})=PB", "charge brackets are undeformed", moyal(data.charges_r[j], data.charges_l[k]), poisson(data.charges_r[j], data.charges_l[k]))
    for a in range(3):
        rec.equal(f"axial-{a + 1}", "axial charge is s p", data.axial[a], PhaseExpr.s(ctx) * PhaseExpr.p(ctx, a + 1))
    for sign, name in ((+1, "R"), (-1, "L")):
        qs = data.charges(sign)
        rec.equal(f"H=RR/2[{name}]", "hamiltonian is either quadratic Casimir", _sum((c * c for c in qs), ctx).scale(Fraction(1, 2)), model.h_classical)
        hq = chiral_quantum_h(sign)
        rec.equal(f"Hqm-frame[{name}]", "frame-ordered quantum hamiltonian equals the so(4) Casimir form", hq, model.h_quantum)
        rec.equal(f"correction[{name}]", "chiral correction is (hbar^2/8)(det g - 7)", hq - model.h_classical, expected_correction(3))
    hb = PhaseExpr.hbar(ctx)
    gamma = christoffel_contraction(3)
    lhs = (hb * hb * (gamma - structure_constant_square())).scale(Fraction(1, 8))
    rec.equal("christoffel", "(hbar^2/8)(Gamma g Gamma - f f) = (hbar^2/8)(det g - 7)", lhs, (hb * hb * (model.det_g - 7)).scale(Fraction(1, 8)))


def suite_spectra(n, policy, rec):
    rows = casimir_spectrum(n, 6)
    rec.truth("l=0", "ground level vanishes", rows[0][1] == 0)
    for l_, e in rows:
        rec.truth(f"E[{l_}]", "E_l = hbar^2 l(l+N-1)/2", e == Fraction(l_ * (l_ + n - 1), 2), note=f"{e}*hbar^2")
    s2 = [e for _, e in casimir_spectrum(2, 3)]
    rec.truth("S2-table", "S^2 levels 0, 1, 3, 6 (units hbar^2)", s2 == [0, 1, 3, 6])
    s3 = casimir_spectrum(3, 8)
    rec.truth(
        "S3-j",
        "S^3 with l = 2j gives 2 hbar^2 j(j+1)",
        all(e == 2 * Fraction(l_, 2) * (Fraction(l_, 2) + 1) for l_, e in s3),
    )


SUITES = {
    "so_closure": (suite_so_closure, None),
    "collapse": (suite_collapse, None),
    "conservation": (suite_conservation, None),
    "groenewold": (suite_groenewold, None),
    "corrections": (suite_corrections, None),
    "cnb_fi": (suite_cnb_fi, 2),
    "cnb_leibniz": (suite_cnb_leibniz, None),
    "v_invariance": (suite_v_invariance, None),
    "traces": (suite_traces, None),
    "s2_qnb": (suite_s2_qnb, 2),
    "qnb_leibniz": (suite_qnb_leibniz, 2),
    "qnb_fi": (suite_qnb_fi, 2),
    "const_qnb": (suite_const_qnb, None),
    "odd_qnb": (suite_odd_qnb, None),
    "star_algebra": (suite_star_algebra, None),
    "s3_cnb": (suite_s3_cnb, 3),
    "s3_entwined": (suite_s3_entwined, 3),
    "dirac": (suite_dirac, 2),
    "chiral": (suite_chiral, 3),
    "spectra": (suite_spectra, None),
}

SUITE_NAMES = tuple(SUITES) + ("all",)


def _run_one(name: str, n: int, policy: RandomExprPolicy) -> SuiteReport:
    func, fixed = SUITES[name]
    eff_n = fixed or n
    report = SuiteReport(name, eff_n, policy.seed, policy.max_degree)
    func(eff_n, policy, _Recorder(report))
    return report


def run_suite(name: str, n: int = 2, policy: RandomExprPolicy | None = None, workers: int | None = None) -> SuiteReport:
    """Run one named suite (or ``all``) and return its report."""
    policy = policy or RandomExprPolicy()
    if name not in SUITE_NAMES:
        raise UnknownSuite(name)
    if name != "all":
        return _run_one(name, n, policy)
    names = list(SUITES)
    if n < 2:
        names = [s for s in names if s not in ("v_invariance", "traces")]
    if workers is None:
        workers = int(os.environ.get("STARBRACKET_WORKERS", "1") or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_one, names, [n] * len(names), [policy] * len(names)))
    else:
        parts = [_run_one(s, n, policy) for s in names]
    combined = SuiteReport("all", n, policy.seed, policy.max_degree)
    for part in parts:
        for r in part.records:
            r.id = f"{part.suite}/{r.id}"
            combined.records.append(r)
        combined.flags.extend(f"{part.suite}: {f}" for f in part.flags)
    return combined
