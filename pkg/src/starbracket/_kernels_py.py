"""Pure-Python sparse polynomial kernels.

Polynomials are plain dicts mapping a packed exponent key (an int holding one
16-bit field per generator) to a nonzero rational coefficient.  Two of the
generators are algebraic: ``s`` with ``s*s = u = 1 - sum(x_a**2)`` and ``i``
with ``i*i = -1``.  Their fields never exceed 1 in a stored key.

The compiled module ``_kernels`` exposes the same functions with the same
signatures; :mod:`starbracket.kernels` picks one at import time.
"""

FIELD_BITS = 16
FIELD_MASK = (1 << FIELD_BITS) - 1


def _split(a, s_bit, i_bit):
    groups = ({}, {}, {}, {})
    for k, c in a.items():
        g = (2 if k & s_bit else 0) | (1 if k & i_bit else 0)
        groups[g][k] = c
    return groups


def mul(a, b, s_shift, i_shift, u_terms):
    """Product of two packed polynomials with s*s -> u and i*i -> -1."""
    if not a or not b:
        return {}
    if len(a) > len(b):
        a, b = b, a
    s_bit = 1 << s_shift
    i_bit = 1 << i_shift
    ga = _split(a, s_bit, i_bit)
    gb = _split(b, s_bit, i_bit)
    out = {}
    over = {}  # terms that picked up s*s, still to be multiplied by u
    for ia in range(4):
        da = ga[ia]
        if not da:
            continue
        for ib in range(4):
            db = gb[ib]
            if not db:
                continue
            s_over = (ia & 2) and (ib & 2)
            i_over = (ia & 1) and (ib & 1)
            off = 0
            if s_over:
                off -= 2 * s_bit
            if i_over:
                off -= 2 * i_bit
            target = over if s_over else out
            get = target.get
            if i_over:
                for ka, ca in da.items():
                    base = ka + off
                    for kb, cb in db.items():
                        k = base + kb
                        target[k] = get(k, 0) - ca * cb
            else:
                for ka, ca in da.items():
                    base = ka + off
                    for kb, cb in db.items():
                        k = base + kb
                        target[k] = get(k, 0) + ca * cb
    if over:
        get = out.get
        for delta, sign in u_terms:
            if sign > 0:
                for k, c in over.items():
                    kk = k + delta
                    out[kk] = get(kk, 0) + c
            else:
                for k, c in over.items():
                    kk = k + delta
                    out[kk] = get(kk, 0) - c
    return {k: c for k, c in out.items() if c}


def iadd(acc, b, scale):
    """In place ``acc += scale * b``; zero coefficients are dropped."""
    get = acc.get
    if scale == 1:
        for k, c in b.items():
            v = get(k, 0) + c
            if v:
                acc[k] = v
            else:
                acc.pop(k, None)
    else:
        for k, c in b.items():
            v = get(k, 0) + scale * c
            if v:
                acc[k] = v
            else:
                acc.pop(k, None)


def derive(a, shift):
    """Formal partial derivative in the generator stored at ``shift``."""
    one = 1 << shift
    out = {}
    for k, c in a.items():
        e = (k >> shift) & FIELD_MASK
        if e:
            out[k - one] = c * e
    return out


def eval_mod(a, shifts, values, prime, s_shift, i_shift):
    """Evaluate ``a`` modulo ``prime``.

    Returns the four partial sums for the (s, i) bit patterns 00, 01, 10, 11
    so that divisibility tests do not need a square root of u or of -1.
    Coefficients with a denominator divisible by ``prime`` raise ZeroDivisionError.
    """
    sums = [0, 0, 0, 0]
    s_bit = 1 << s_shift
    i_bit = 1 << i_shift
    nf = len(shifts)
    for k, c in a.items():
        num = int(c.numerator) % prime
        den = int(c.denominator) % prime
        if den == 0:
            raise ZeroDivisionError("coefficient denominator vanishes mod prime")
        v = num * pow(den, -1, prime) % prime
        for j in range(nf):
            e = (k >> shifts[j]) & FIELD_MASK
            if e:
                v = v * pow(values[j], e, prime) % prime
        g = (2 if k & s_bit else 0) | (1 if k & i_bit else 0)
        sums[g] = (sums[g] + v) % prime
    return sums
