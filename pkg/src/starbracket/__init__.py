"""Exact phase-space algebra: star products, Moyal and Nambu brackets on spheres."""

from .brackets import (
    BracketError,
    BracketSpec,
    cnb,
    commutator,
    dirac,
    moyal,
    poisson,
    qnb,
    qnb4_resolve,
    star,
    symplectic_trace,
)
from .kernels import BACKEND
from .models import casimir_spectrum, chiral_s3, quantum_correction, sphere_model
from .ring import (
    Context,
    PhaseExpr,
    classical_limit,
    conjugate,
    derive,
    divide,
    equals,
    eval_at,
    hbar_order,
)
from .syntax import ParseError, parse, render
from .verify import RandomExprPolicy, SuiteReport, run_suite

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BracketError",
    "BracketSpec",
    "Context",
    "ParseError",
    "PhaseExpr",
    "RandomExprPolicy",
    "SuiteReport",
    "casimir_spectrum",
    "chiral_s3",
    "classical_limit",
    "cnb",
    "commutator",
    "conjugate",
    "derive",
    "dirac",
    "divide",
    "equals",
    "eval_at",
    "hbar_order",
    "moyal",
    "parse",
    "poisson",
    "qnb",
    "qnb4_resolve",
    "quantum_correction",
    "render",
    "run_suite",
    "sphere_model",
    "star",
    "symplectic_trace",
]
