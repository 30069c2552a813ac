import mpmath
import numpy as np
import pytest

from ifbm_persistence import ddarith as dd


@pytest.fixture
def operands(rng):
    a = rng.standard_normal(200) * 10.0 ** rng.integers(-5, 5, 200)
    b = rng.standard_normal(200) * 10.0 ** rng.integers(-5, 5, 200)
    # give the operands nonzero low words
    return (a, a * 2.0**-60), (b, -b * 2.0**-58)


def _check(hi, lo, ref, rel=1e-30):
    with mpmath.workdps(50):
        got = dd.to_mpf(hi, lo)
        for g, r in zip(got, ref):
            assert abs(g - r) <= rel * abs(r) + mpmath.mpf(10) ** -300


def _mp(pair):
    with mpmath.workdps(50):
        return dd.to_mpf(*pair)


@pytest.mark.parametrize("op,ref", [
    (dd.dd_add, lambda x, y: x + y),
    (dd.dd_sub, lambda x, y: x - y),
    (dd.dd_mul, lambda x, y: x * y),
    (dd.dd_div, lambda x, y: x / y),
])
def test_binary_ops(op, ref, operands):
    a, b = operands
    hi, lo = op(*a, *b)
    with mpmath.workdps(50):
        expected = [ref(x, y) for x, y in zip(_mp(a), _mp(b))]
    # add/sub can cancel, so compare against the larger operand
    _check(hi, lo, expected, rel=1e-30 if op in (dd.dd_mul, dd.dd_div) else 1e-28)


def test_sqrt(operands):
    a, _ = operands
    a = (np.abs(a[0]), np.abs(a[1]) * np.sign(a[0]) * np.sign(a[0]))
    hi, lo = dd.dd_sqrt(*a)
    with mpmath.workdps(50):
        expected = [mpmath.sqrt(x) for x in _mp(a)]
    _check(hi, lo, expected)


def test_sqrt_zero():
    hi, lo = dd.dd_sqrt(0.0, 0.0)
    assert hi == 0.0 and lo == 0.0


def test_two_sum_exact():
    s, e = dd.two_sum(1.0, 1e-20)
    assert s == 1.0 and e == 1e-20
    p, e = dd.two_prod(1.0 + 2.0**-30, 1.0 - 2.0**-30)
    assert p + e == p and e == -(2.0**-60)


def test_from_mpf_roundtrip():
    with mpmath.workdps(40):
        vals = [mpmath.mpf(1) / 3, mpmath.pi, mpmath.e ** -50]
        hi, lo = dd.from_mpf(vals)
        back = dd.to_mpf(hi, lo)
        for v, w in zip(vals, back):
            assert abs(v - w) < abs(v) * mpmath.mpf(2) ** -104
