"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Kernel timings use both modules side by side in one process; the end-to-end
row runs a six-entry quantum Nambu bracket in a subprocess per backend.
"""

import argparse
import os
import random
import subprocess
import sys
import timeit

from gmpy2 import mpq

from starbracket import _kernels_py
from starbracket.ring import Context

try:
    from starbracket import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

END_TO_END = """
import time
from starbracket.kernels import BACKEND
from starbracket.models import sphere_model
from starbracket.ring import PhaseExpr
from starbracket.brackets import qnb
m = sphere_model(3)
k = PhaseExpr.x(m.ctx, 1) * PhaseExpr.p(m.ctx, 2) + PhaseExpr.x(m.ctx, 3) ** 2
t = time.perf_counter()
qnb([k] + m.nambu_entries())
print(BACKEND, time.perf_counter() - t)
"""


def random_poly(ctx, rng, terms, max_exp=3):
    out = {}
    for _ in range(terms):
        key = 0
        for shift in ctx.x_shifts + ctx.p_shifts:
            key |= rng.randint(0, max_exp) << shift
        key |= rng.randint(0, 1) << ctx.s_shift
        key |= rng.randint(0, 1) << ctx.i_shift
        out[key] = mpq(rng.randint(-9, 9) or 1, rng.randint(1, 5))
    return out


def bench(label, fn, repeat, number):
    best = min(timeit.repeat(fn, repeat=repeat, number=number)) / number
    return label, best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    ctx = Context(3)
    rng = random.Random(7)
    a, b = random_poly(ctx, rng, 60), random_poly(ctx, rng, 60)
    prime = (1 << 61) - 1
    shifts = list(ctx.eval_shifts)
    values = [rng.randrange(prime) for _ in shifts]
    backends = [("python", _kernels_py)]
    if _kernels_c is not None:
        backends.append(("cython", _kernels_c))
    else:
        print("compiled extension not built; showing the fallback only")
    rows = []
    for name, mod in backends:
        rows.append((name,) + bench("mul 60x60", lambda: mod.mul(a, b, ctx.s_shift, ctx.i_shift, ctx.u_terms), args.repeat, 20))
        rows.append((name,) + bench("iadd", lambda: mod.iadd(dict(a), b, mpq(3, 2)), args.repeat, 200))
        rows.append((name,) + bench("derive", lambda: mod.derive(a, ctx.x_shifts[0]), args.repeat, 500))
        rows.append((name,) + bench("eval_mod", lambda: mod.eval_mod(a, shifts, values, prime, ctx.s_shift, ctx.i_shift), args.repeat, 200))
    print(f"{'backend':8} {'kernel':12} {'seconds':>12}")
    for name, label, t in rows:
        print(f"{name:8} {label:12} {t:12.3e}")
    for pure in ("1", "0"):
        env = dict(os.environ, STARBRACKET_PURE=pure)
        res = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
        backend, secs = res.stdout.split()
        print(f"{backend:8} {'qnb6 S^3':12} {float(secs):12.3e}")


if __name__ == "__main__":
    main()
