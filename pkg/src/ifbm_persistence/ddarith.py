"""Vectorized double-double arithmetic on pairs of float64 arrays.

A double-double value is an unevaluated sum ``hi + lo`` with
``|lo| <= ulp(hi)/2``, giving roughly 106 bits of significand.  All
functions accept scalars or broadcastable arrays and return ``(hi, lo)``
tuples.  Products use Dekker splitting, so no fused multiply-add is needed.
"""

import mpmath
import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def quick_two_sum(a, b):
    # requires |a| >= |b|
    s = a + b
    err = b - (s - a)
    return s, err


def split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = split(a)
    bh, bl = split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def dd_add(ah, al, bh, bl):
    s, e = two_sum(ah, bh)
    t, f = two_sum(al, bl)
    e = e + t
    s, e = quick_two_sum(s, e)
    e = e + f
    return quick_two_sum(s, e)


def dd_neg(ah, al):
    return -ah, -al


def dd_sub(ah, al, bh, bl):
    return dd_add(ah, al, -bh, -bl)


def dd_mul(ah, al, bh, bl):
    p, e = two_prod(ah, bh)
    e = e + (ah * bl + al * bh)
    return quick_two_sum(p, e)


def dd_div(ah, al, bh, bl):
    q1 = ah / bh
    ph, pl = dd_mul(q1, 0.0, bh, bl)
    rh, rl = dd_sub(ah, al, ph, pl)
    q2 = rh / bh
    ph, pl = dd_mul(q2, 0.0, bh, bl)
    rh, rl = dd_sub(rh, rl, ph, pl)
    q3 = rh / bh
    q1, q2 = quick_two_sum(q1, q2)
    return dd_add(q1, q2, q3, 0.0)


def dd_sqrt(ah, al):
    """Square root of a nonnegative double-double."""
    ah = np.asarray(ah, dtype=float)
    al = np.asarray(al, dtype=float)
    q = np.sqrt(ah)
    safe = np.where(q > 0, q, 1.0)
    ph, pl = two_prod(q, q)
    rh, rl = dd_sub(ah, al, ph, pl)
    corr = np.where(q > 0, rh / (2.0 * safe), 0.0)
    return quick_two_sum(q, corr)


def from_mpf(values):
    """Split a sequence of ``mpmath.mpf`` values into ``(hi, lo)`` arrays."""
    with mpmath.workdps(40):
        hi = np.array([float(v) for v in values], dtype=float)
        lo = np.array([float(v - mpmath.mpf(h)) for v, h in zip(values, hi)], dtype=float)
    return hi, lo


def to_mpf(hi, lo):
    # caller sets the working precision
    return [mpmath.mpf(float(h)) + mpmath.mpf(float(l)) for h, l in zip(np.ravel(hi), np.ravel(lo))]
