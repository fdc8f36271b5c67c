"""Sphere and chiral sigma-model data in projected Cartesian coordinates.

On S^N the coordinates are q^a = x_a (a = 1..N) with u = 1 - q.q and the
metric g_ab = delta_ab + q^a q^b / u.  The so(N+1) invariants are the
de Sitter momenta P_a = s p_a (s = sqrt(u)) and the rotations
L_ab = q^a p_b - q^b p_a.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .brackets import poisson, star
from .ring import Context, MAX_N, PhaseExpr, divide

HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)


class VerificationError(AssertionError):
    """A built-in consistency assertion on generated model data failed."""


def _check(cond: bool, what: str):
    if not cond:
        raise VerificationError(what)


def levi_civita(*idx: int) -> int:
    """Sign of the permutation ``idx`` of 0..k-1, zero on repeats."""
    if len(set(idx)) < len(idx):
        return 0
    sign = 1
    seq = list(idx)
    for a in range(len(seq)):
        for b in range(a + 1, len(seq)):
            if seq[a] > seq[b]:
                sign = -sign
    return sign


def su2_structure_constants() -> dict[tuple[int, int, int], int]:
    # normalization fixed by {V^j p, V^k p} = -2 f^{jkn} V^n p with f = epsilon;
    # the f_ijk f_ijk contraction (= 6) depends on this choice
    return {t: levi_civita(*t) for t in itertools.product(range(3), repeat=3) if levi_civita(*t)}


def structure_constant_square() -> int:
    return sum(v * v for v in su2_structure_constants().values())


@dataclass
class ModelData:
    n: int
    ctx: Context
    g_lower: list[list[PhaseExpr]]
    g_upper: list[list[PhaseExpr]]
    det_g: PhaseExpr
    momenta: list[PhaseExpr]  # de Sitter momenta P_1..P_N
    rotations: dict[tuple[int, int], PhaseExpr]  # L_ab for a < b (1-based)
    h_classical: PhaseExpr
    h_quantum: PhaseExpr
    correction: PhaseExpr

    def L(self, a: int, b: int) -> PhaseExpr:
        if a == b:
            return PhaseExpr.zero(self.ctx)
        if a < b:
            return self.rotations[(a, b)]
        return -self.rotations[(b, a)]

    def P(self, a: int) -> PhaseExpr:
        return self.momenta[a - 1]

    @property
    def invariants(self) -> list[tuple[str, PhaseExpr]]:
        named = [(f"P{a}", p) for a, p in enumerate(self.momenta, 1)]
        named += [(f"L{a}{b}", v) for (a, b), v in sorted(self.rotations.items())]
        return named

    def nambu_entries(self) -> list[PhaseExpr]:
        """P_1, L_12, P_2, L_23, ..., L_{N-1,N}, P_N."""
        out = [self.P(1)]
        for a in range(1, self.n):
            out += [self.L(a, a + 1), self.P(a + 1)]
        return out


def _check_dim(n: int):
    if not isinstance(n, int) or not 1 <= n <= MAX_N:
        raise ValueError(f"dimension must be in [1, {MAX_N}], got {n!r}")


def sphere_metric(ctx: Context):
    n = ctx.n
    q = [PhaseExpr.x(ctx, a) for a in range(1, n + 1)]
    u = PhaseExpr.u(ctx)
    inv_u = divide(1, u)
    lower = [[(1 if a == b else 0) + q[a] * q[b] * inv_u for b in range(n)] for a in range(n)]
    upper = [[(1 if a == b else 0) - q[a] * q[b] for b in range(n)] for a in range(n)]
    return lower, upper, inv_u


@lru_cache(maxsize=None)
def sphere_model(n: int) -> ModelData:
    """Metric, invariants and classical/quantum hamiltonians of S^n."""
    _check_dim(n)
    ctx = Context(n)
    g_lower, g_upper, det_g = sphere_metric(ctx)
    for a in range(n):
        for b in range(n):
            entry = sum((g_lower[a][c] * g_upper[c][b] for c in range(n)), PhaseExpr.zero(ctx))
            _check(entry == (1 if a == b else 0), "metric and inverse metric do not multiply to the identity")
    _check(det_g * PhaseExpr.u(ctx) == 1, "det g * u != 1")

    s = PhaseExpr.s(ctx)
    q = [PhaseExpr.x(ctx, a) for a in range(1, n + 1)]
    p = [PhaseExpr.p(ctx, a) for a in range(1, n + 1)]
    momenta = [s * pa for pa in p]
    rotations = {
        (a + 1, b + 1): q[a] * p[b] - q[b] * p[a] for a in range(n) for b in range(a + 1, n)
    }
    for inv in momenta + list(rotations.values()):
        _check(max(inv.p_degrees()) == 1, "invariant is not linear in momenta")

    kinetic = PhaseExpr.zero(ctx)
    for a in range(n):
        for b in range(n):
            kinetic = kinetic + g_upper[a][b] * p[a] * p[b]
    h_classical = kinetic.scale(HALF)

    # sum over ordered pairs of L_ab L_ab / 4 = sum over a < b of L_ab^2 / 2
    casimir = sum((m * m for m in momenta), PhaseExpr.zero(ctx)).scale(HALF)
    casimir = casimir + sum((r * r for r in rotations.values()), PhaseExpr.zero(ctx)).scale(HALF)
    _check(casimir == h_classical, "Casimir form differs from the metric hamiltonian")

    h_quantum = sum((star(m, m) for m in momenta), PhaseExpr.zero(ctx)).scale(HALF)
    h_quantum = h_quantum + sum((star(r, r) for r in rotations.values()), PhaseExpr.zero(ctx)).scale(HALF)

    return ModelData(
        n=n,
        ctx=ctx,
        g_lower=g_lower,
        g_upper=g_upper,
        det_g=det_g,
        momenta=momenta,
        rotations=rotations,
        h_classical=h_classical,
        h_quantum=h_quantum,
        correction=h_quantum - h_classical,
    )


def expected_correction(n: int) -> PhaseExpr:
    """(hbar^2/8) (1/u - 1 - n(n-1))."""
    ctx = Context(n)
    hb = PhaseExpr.hbar(ctx)
    bracket = divide(1, PhaseExpr.u(ctx)) - (1 + n * (n - 1))
    return (hb * hb * bracket).scale(Fraction(1, 8))


def quantum_correction(n: int) -> PhaseExpr:
    model = sphere_model(n)
    _check(model.correction == expected_correction(n), f"S^{n} quantum correction mismatch")
    return model.correction


# ---------------------------------------------------------------------------
# S^3 as the SU(2) chiral model


@dataclass
class ChiralData:
    ctx: Context
    dreibein_plus: list[list[PhaseExpr]]  # V^{ai}, row a, column i
    dreibein_minus: list[list[PhaseExpr]]
    dreibein_plus_lower: list[list[PhaseExpr]]  # V^i_a, row a, column i
    dreibein_minus_lower: list[list[PhaseExpr]]
    charges_r: list[PhaseExpr]
    charges_l: list[PhaseExpr]
    axial: list[PhaseExpr]
    isospin: list[PhaseExpr]
    extra: dict = field(default_factory=dict)

    def dreibein(self, sign: int, lower: bool = False):
        if sign > 0:
            return self.dreibein_plus_lower if lower else self.dreibein_plus
        return self.dreibein_minus_lower if lower else self.dreibein_minus

    def charges(self, sign: int) -> list[PhaseExpr]:
        return self.charges_r if sign > 0 else self.charges_l


def _dreibeine(ctx: Context, sign: int, g_lower):
    q = [PhaseExpr.x(ctx, a) for a in range(1, 4)]
    s = PhaseExpr.s(ctx)
    upper = [[None] * 3 for _ in range(3)]
    lower = [[None] * 3 for _ in range(3)]
    for a in range(3):
        for i in range(3):
            eq = sum((q[b] * levi_civita(i, a, b) for b in range(3)), PhaseExpr.zero(ctx))
            upper[a][i] = eq + (s if a == i and sign > 0 else -s if a == i else 0)
            lower[a][i] = eq + (s * g_lower[a][i] if sign > 0 else -(s * g_lower[a][i]))
    return upper, lower


@lru_cache(maxsize=None)
def chiral_s3() -> ChiralData:
    """Left/right-invariant frames on S^3 and the su(2) x su(2) charges."""
    model = sphere_model(3)
    ctx = model.ctx
    p = [PhaseExpr.p(ctx, a) for a in range(1, 4)]
    up_p, lo_p = _dreibeine(ctx, +1, model.g_lower)
    up_m, lo_m = _dreibeine(ctx, -1, model.g_lower)
    for lower, upper in ((lo_p, up_p), (lo_m, up_m)):
        for a in range(3):
            for b in range(3):
                gab = sum((lower[a][i] * lower[b][i] for i in range(3)), PhaseExpr.zero(ctx))
                _check(gab == model.g_lower[a][b], "frame does not reproduce the metric")
        for i in range(3):
            for j in range(3):
                dij = PhaseExpr.zero(ctx)
                for a in range(3):
                    for b in range(3):
                        dij = dij + model.g_upper[a][b] * lower[a][i] * lower[b][j]
                _check(dij == (1 if i == j else 0), "frame is not orthonormal")
        for a in range(3):
            for i in range(3):
                raised = sum((model.g_upper[a][b] * lower[b][i] for b in range(3)), PhaseExpr.zero(ctx))
                _check(raised == upper[a][i], "upper-index frame is not the raised lower frame")

    def charges(upper):
        return [sum((upper[a][i] * p[a] for a in range(3)), PhaseExpr.zero(ctx)) for i in range(3)]

    r = charges(up_p)
    l_ = charges(up_m)
    axial = [(ri - li).scale(HALF) for ri, li in zip(r, l_)]
    isospin = [(ri + li).scale(HALF) for ri, li in zip(r, l_)]
    for qs in (r, l_):
        casimir = sum((c * c for c in qs), PhaseExpr.zero(ctx)).scale(HALF)
        _check(casimir == model.h_classical, "charge Casimir differs from the hamiltonian")
    return ChiralData(ctx, up_p, up_m, lo_p, lo_m, r, l_, axial, isospin)


def frame_derivative_contraction(sign: int) -> PhaseExpr:
    """sum over a, b, i of d_a V^{bi} d_b V^{ai}."""
    data = chiral_s3()
    v = data.dreibein(sign)
    ctx = data.ctx
    total = PhaseExpr.zero(ctx)
    for a in range(3):
        for b in range(3):
            for i in range(3):
                total = total + v[b][i].derive(f"x{a + 1}") * v[a][i].derive(f"x{b + 1}")
    return total


def chiral_quantum_h(sign: int = +1) -> PhaseExpr:
    """(1/2) sum_i (p_a V^{ai}) * (V^{bi} p_b) for the chosen frame sign."""
    data = chiral_s3()
    ctx = data.ctx
    qs = data.charges(sign)
    h = sum((star(c, c) for c in qs), PhaseExpr.zero(ctx)).scale(HALF)
    model = sphere_model(3)
    hb = PhaseExpr.hbar(ctx)
    geometric = model.h_classical + (hb * hb * frame_derivative_contraction(sign)).scale(Fraction(1, 8))
    _check(h == geometric, "star-ordered frame hamiltonian differs from its geometric form")
    _check(h == model.h_quantum, "frame hamiltonian differs from the so(4) Casimir hamiltonian")
    return h


# ---------------------------------------------------------------------------


def christoffel_symbols(n: int) -> list[list[list[PhaseExpr]]]:
    """Gamma[a][b][c] = Gamma^a_{bc} of the S^n metric."""
    model = sphere_model(n)
    g, gi = model.g_lower, model.g_upper
    ctx = model.ctx
    dg = [[[g[b][c].derive(f"x{a + 1}") for c in range(n)] for b in range(n)] for a in range(n)]
    gamma = [[[PhaseExpr.zero(ctx)] * n for _ in range(n)] for _ in range(n)]
    for a in range(n):
        for b in range(n):
            for c in range(n):
                acc = PhaseExpr.zero(ctx)
                for d in range(n):
                    if gi[a][d].is_zero():
                        continue
                    acc = acc + gi[a][d] * (dg[b][d][c] + dg[c][d][b] - dg[d][b][c])
                gamma[a][b][c] = acc.scale(HALF)
    return gamma


def christoffel_contraction(n: int) -> PhaseExpr:
    """Gamma^b_{ac} g^{cd} Gamma^a_{bd}."""
    model = sphere_model(n)
    gamma = christoffel_symbols(n)
    gi = model.g_upper
    total = PhaseExpr.zero(model.ctx)
    for a, b, c, d in itertools.product(range(n), repeat=4):
        if gi[c][d].is_zero():
            continue
        total = total + gamma[b][a][c] * gi[c][d] * gamma[a][b][d]
    if n == 3:
        u = PhaseExpr.u(model.ctx)
        _check(
            total - structure_constant_square() == divide(1, u) - 7,
            "Christoffel contraction minus f.f differs from det g - 7",
        )
    return total


def casimir_spectrum(n: int, l_max: int) -> list[tuple[int, Fraction]]:
    """(l, E_l / hbar^2) with E_l = hbar^2 l (l + n - 1) / 2."""
    if l_max < 0:
        raise ValueError("l_max must be non-negative")
    return [(l, Fraction(l * (l + n - 1), 2)) for l in range(l_max + 1)]


def eom_residual(n: int, a: int) -> PhaseExpr:
    """{p_a, H} + (1/2) d_a g^{bc} p_b p_c, identically zero."""
    model = sphere_model(n)
    if not 1 <= a <= n:
        raise ValueError(f"index {a} out of range 1..{n}")
    ctx = model.ctx
    p = [PhaseExpr.p(ctx, b) for b in range(1, n + 1)]
    force = PhaseExpr.zero(ctx)
    for b in range(n):
        for c in range(n):
            force = force + model.g_upper[b][c].derive(f"x{a}") * p[b] * p[c]
    return poisson(p[a - 1], model.h_classical) + force.scale(HALF)


def nambu_velocity_factor(n: int) -> PhaseExpr:
    """(-1)^(n-1) / (P_2 P_3 ... P_{n-1}); empty product is 1."""
    if n < 2:
        raise ValueError("velocity factor needs n >= 2")
    model = sphere_model(n)
    ctx = model.ctx
    prod = PhaseExpr.one(ctx)
    for a in range(2, n):
        prod = prod * model.P(a)
    sign = -1 if (n - 1) % 2 else 1
    return divide(sign, prod)
