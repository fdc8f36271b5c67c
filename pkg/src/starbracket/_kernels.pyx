# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled sparse polynomial kernels; same contract as ``_kernels_py``."""

DEF FIELD_BITS = 16
FIELD_MASK = (1 << FIELD_BITS) - 1


cdef tuple _split(dict a, object s_bit, object i_bit):
    cdef dict g0 = {}, g1 = {}, g2 = {}, g3 = {}
    cdef object k, c
    cdef bint hs, hi
    for k, c in a.items():
        hs = (k & s_bit) != 0
        hi = (k & i_bit) != 0
        if hs:
            if hi:
                g3[k] = c
            else:
                g2[k] = c
        elif hi:
            g1[k] = c
        else:
            g0[k] = c
    return (g0, g1, g2, g3)


cdef void _accumulate(dict target, dict da, dict db, object off, bint negate):
    cdef object ka, ca, kb, cb, k, base, prev
    for ka, ca in da.items():
        base = ka + off
        for kb, cb in db.items():
            k = base + kb
            prev = target.get(k)
            if negate:
                if prev is None:
                    target[k] = -(ca * cb)
                else:
                    target[k] = prev - ca * cb
            else:
                if prev is None:
                    target[k] = ca * cb
                else:
                    target[k] = prev + ca * cb


def mul(dict a, dict b, int s_shift, int i_shift, list u_terms):
    if not a or not b:
        return {}
    if len(a) > len(b):
        a, b = b, a
    cdef object s_bit = (<object>1) << s_shift
    cdef object i_bit = (<object>1) << i_shift
    cdef tuple ga = _split(a, s_bit, i_bit)
    cdef tuple gb = _split(b, s_bit, i_bit)
    cdef dict out = {}
    cdef dict over = {}
    cdef int ia, ib
    cdef bint s_over, i_over
    cdef dict da, db
    cdef object off, k, c, kk, delta, prev
    cdef int sign
    for ia in range(4):
        da = <dict>ga[ia]
        if not da:
            continue
        for ib in range(4):
            db = <dict>gb[ib]
            if not db:
                continue
            s_over = (ia & 2) and (ib & 2)
            i_over = (ia & 1) and (ib & 1)
            off = 0
            if s_over:
                off = off - 2 * s_bit
            if i_over:
                off = off - 2 * i_bit
            _accumulate(over if s_over else out, da, db, off, i_over)
    if over:
        for delta, sign in u_terms:
            for k, c in over.items():
                kk = k + delta
                prev = out.get(kk)
                if sign > 0:
                    out[kk] = c if prev is None else prev + c
                else:
                    out[kk] = -c if prev is None else prev - c
    return {k: c for k, c in out.items() if c}


def iadd(dict acc, dict b, object scale):
    cdef object k, c, v
    cdef bint unit = scale == 1
    for k, c in b.items():
        if unit:
            v = acc.get(k, 0) + c
        else:
            v = acc.get(k, 0) + scale * c
        if v:
            acc[k] = v
        else:
            acc.pop(k, None)


def derive(dict a, int shift):
    cdef object one = (<object>1) << shift
    cdef dict out = {}
    cdef object k, c
    cdef long e
    for k, c in a.items():
        e = (k >> shift) & FIELD_MASK
        if e:
            out[k - one] = c * e
    return out


def eval_mod(dict a, list shifts, list values, object prime, int s_shift, int i_shift):
    cdef list sums = [0, 0, 0, 0]
    cdef object s_bit = (<object>1) << s_shift
    cdef object i_bit = (<object>1) << i_shift
    cdef Py_ssize_t j, nf = len(shifts)
    cdef object k, c, v, num, den
    cdef long e
    cdef int g
    for k, c in a.items():
        num = int(c.numerator) % prime
        den = int(c.denominator) % prime
        if den == 0:
            raise ZeroDivisionError("coefficient denominator vanishes mod prime")
        v = num * pow(den, -1, prime) % prime
        for j in range(nf):
            e = (k >> <int>shifts[j]) & FIELD_MASK
            if e:
                v = v * pow(values[j], e, prime) % prime
        g = (2 if k & s_bit else 0) | (1 if k & i_bit else 0)
        sums[g] = (sums[g] + v) % prime
    return sums
