"""Command-line front end.

Exit status: 0 on success, 1 when a verification fails, 2 on usage or parse
errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .brackets import BracketError, BracketSpec
from .models import casimir_spectrum, expected_correction, sphere_model
from .ring import Context, PhaseExpr, RingError, equals, eval_at
from .syntax import JSON_SCHEMA_VERSION, ParseError, parse, render, to_json
from .verify import SUITE_NAMES, RandomExprPolicy, UnknownSuite, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _emit(text: str, out: str | None):
    print(text)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _ctx(n: int) -> Context:
    try:
        return Context(n)
    except (ValueError, RingError) as exc:
        raise UsageError(str(exc)) from None


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a rational number: {text!r}") from None


def _hbar2(c: Fraction) -> str:
    if c == 0:
        return "0"
    if c == 1:
        return "hbar^2"
    body = str(c.numerator) if c.denominator == 1 else f"({c})"
    return f"{body}*hbar^2"


# subcommands -----------------------------------------------------------------


def cmd_verify(args) -> int:
    policy = RandomExprPolicy(seed=args.seed, allow_s=args.with_s).with_degree(args.degree)
    try:
        report = run_suite(args.suite, args.n, policy, workers=args.workers)
    except UnknownSuite:
        raise UsageError(f"unknown suite {args.suite!r}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = report.to_json(args.timings) if args.json else report.to_text(args.timings)
    _emit(text, args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_bracket(args) -> int:
    ctx = _ctx(args.n)
    exprs = [parse(e, ctx) for e in args.expr]
    kind = args.kind.upper()
    if kind == "DB":
        if len(exprs) < 4:
            raise UsageError("db needs f, g and at least two constraints")
        spec = BracketSpec(kind, exprs[:2], constraints=exprs[2:])
    else:
        spec = BracketSpec(kind, exprs)
    result = spec.evaluate()
    if args.json:
        payload = {"schemaVersion": JSON_SCHEMA_VERSION, "kind": args.kind, "text": render(result), "value": to_json(result)}
        _emit(json.dumps(payload, sort_keys=True), args.out)
    else:
        _emit(render(result), args.out)
    return EXIT_OK


def cmd_correction(args) -> int:
    n = args.n
    _ctx(n)
    model = sphere_model(n)
    ctx = model.ctx
    c = 1 + n * (n - 1)
    hb = PhaseExpr.hbar(ctx)
    closed = expected_correction(n)
    via_det = (hb * hb * (model.det_g - c)).scale(Fraction(1, 8))
    ok_closed = equals(model.correction, closed)
    ok_det = equals(model.h_quantum - model.h_classical - via_det, PhaseExpr.zero(ctx))
    ok = ok_closed and ok_det
    if args.json:
        payload = {
            "schemaVersion": JSON_SCHEMA_VERSION,
            "n": n,
            "closedForm": f"(hbar^2/8)*(1/u - {c})",
            "correction": render(model.correction),
            "matchesClosedForm": ok_closed,
            "matchesDetG": ok_det,
            "passed": ok,
        }
        _emit(json.dumps(payload, sort_keys=True), args.out)
    else:
        lines = [
            f"H_qm - H = (hbar^2/8)*(1/u - {c})",
            f"  expanded: {render(model.correction)}",
            f"  check H_qm - H - (hbar^2/8)*(1/u - {c}) = 0: {'exact' if ok_closed else 'FAILED'}",
            f"  check H_qm - H - (hbar^2/8)*(det g - {c}) = 0: {'exact' if ok_det else 'FAILED'}",
        ]
        _emit("\n".join(lines), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_spectrum(args) -> int:
    _ctx(args.n)
    try:
        rows = casimir_spectrum(args.n, args.lmax)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.json:
        payload = {
            "schemaVersion": JSON_SCHEMA_VERSION,
            "n": args.n,
            "levels": [{"l": l_, "energy": _hbar2(e)} for l_, e in rows],
        }
        _emit(json.dumps(payload, sort_keys=True), args.out)
        return EXIT_OK
    lines = []
    for l_, e in rows:
        tag = f"  j={Fraction(l_, 2)}" if args.n == 3 else ""
        lines.append(f"l={l_}{tag}  E={_hbar2(e)}")
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def _point(text: str) -> dict:
    point = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"expected name=value, got {item!r}")
        point[name.strip()] = _fraction(value)
    return point


def cmd_eval(args) -> int:
    ctx = _ctx(args.n)
    f = parse(args.expr, ctx)
    point = _point(",".join(args.at or []))
    hbar = _fraction(args.hbar)
    try:
        for name in point:
            ctx.shift_of(name)
    except (KeyError, ValueError, RingError) as exc:
        raise UsageError(str(exc)) from None
    if args.float:
        re_, im = eval_at(f, point, hbar=hbar, mode="float")
        text = repr(re_) if im == 0 else f"{re_!r} + {im!r}*i"
    else:
        value = eval_at(f, point, hbar=hbar)
        text = render(PhaseExpr.const(ctx, value.re) + PhaseExpr.i(ctx).scale(value.im))
    if args.json:
        _emit(json.dumps({"schemaVersion": JSON_SCHEMA_VERSION, "value": text}), args.out)
    else:
        _emit(text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="starbracket", description="Exact phase-space bracket engine.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--n", type=int, default=2, help="dimension N of the sphere S^N")
        p.add_argument("--json", action="store_true", help="emit a structured JSON object")
        p.add_argument("--out", help="also write the output to this file")

    p = sub.add_parser("verify", help="run an identity suite")
    p.add_argument("--suite", required=True, choices=SUITE_NAMES)
    common(p)
    p.add_argument("--seed", type=int, default=RandomExprPolicy().seed)
    p.add_argument("--degree", type=int, default=None, help="total degree bound for random functions")
    p.add_argument("--with-s", action="store_true", help="let random functions contain s = sqrt(u) (slower)")
    p.add_argument("--timings", action="store_true", help="include wall times (breaks byte-identical output)")
    p.add_argument("--workers", type=int, default=None, help="process count for --suite all")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bracket", help="evaluate a bracket")
    p.add_argument("--kind", required=True, choices=("pb", "star", "mb", "cnb", "qnb", "db"))
    common(p)
    p.add_argument("--expr", action="append", required=True)
    p.set_defaults(func=cmd_bracket)

    p = sub.add_parser("correction", help="quantum correction H_qm - H on S^N")
    common(p)
    p.set_defaults(func=cmd_correction)

    p = sub.add_parser("spectrum", help="Casimir spectrum on S^N")
    common(p)
    p.add_argument("--lmax", type=int, required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("eval", help="evaluate an expression at a point")
    common(p)
    p.add_argument("--expr", required=True)
    p.add_argument("--at", action="append", help='e.g. "x1=3/5,p1=1"; may be repeated')
    p.add_argument("--hbar", default="1")
    p.add_argument("--float", action="store_true")
    p.set_defaults(func=cmd_eval)
    return parser


def _glue_values(argv: list[str]) -> list[str]:
    """Turn ``--expr -x1`` into ``--expr=-x1`` so leading minus signs survive argparse."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in ("--expr", "--at"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(_glue_values(sys.argv[1:] if argv is None else list(argv)))
    try:
        return args.func(args)
    except (UsageError, ParseError, BracketError) as exc:
        print(f"starbracket: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RingError as exc:
        print(f"starbracket: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
