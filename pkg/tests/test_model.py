import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from ifbm_persistence.errors import ValidationError
from ifbm_persistence.model import (
    Hurst,
    LampertiModel,
    ifbm_covariance,
    lamperti_constant,
    lamperti_correlation,
    lamperti_correlation_mp,
    lamperti_decay_check,
    make_grid,
    quantile_time,
    rice_interzero_distance,
)

H_GRID = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


def fbm_cov(H, u, v):
    return 0.5 * (abs(u) ** (2 * H) + abs(v) ** (2 * H) - abs(u - v) ** (2 * H))


def ifbm_cov_quad(H, t, s):
    # brute-force oracle: integrate the fBm covariance over [0,t] x [0,s],
    # splitting the inner integral at the kink v = u
    def inner(u):
        m = min(u, s)
        a = integrate.quad(lambda v: fbm_cov(H, u, v), 0, m, epsabs=1e-14, epsrel=1e-12)[0]
        b = integrate.quad(lambda v: fbm_cov(H, u, v), m, s, epsabs=1e-14, epsrel=1e-12)[0]
        return a + b
    pts = [s] if s < t else None
    return integrate.quad(inner, 0, t, points=pts, epsabs=1e-14, epsrel=1e-12, limit=200)[0]


# -- types ---------------------------------------------------------------

@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.2, float("nan"), float("inf"), "x", None])
def test_hurst_domain(bad):
    with pytest.raises(ValidationError):
        Hurst(bad)
    with pytest.raises(ValidationError):
        LampertiModel(bad)


@pytest.mark.parametrize("H", H_GRID)
def test_model_constants(H):
    m = LampertiModel(H)
    assert m.c ** 2 * (1 + 2 * H) == pytest.approx(1.0, abs=1e-15)
    assert m.rho == min(H, 1 - H)
    assert m.theta0 == pytest.approx(LampertiModel(1 - H).theta0, abs=1e-15)
    assert lamperti_constant(H, m.structure_scale) == pytest.approx(m.c, rel=1e-15)


# -- correlation ----------------------------------------------------------

@pytest.mark.parametrize("H", H_GRID)
def test_correlation_at_zero(H):
    assert lamperti_correlation(H, 0.0) == pytest.approx(1.0, abs=1e-15)


def test_correlation_even_and_bounded():
    t = np.linspace(-60, 60, 2401)
    for H in H_GRID:
        r = lamperti_correlation(H, t)
        assert np.array_equal(r, lamperti_correlation(H, -t))
        assert np.all(np.abs(r) <= 1.0)


def test_correlation_rejects_nonfinite():
    with pytest.raises(ValidationError):
        lamperti_correlation(0.5, float("nan"))
    with pytest.raises(ValidationError):
        lamperti_correlation(0.5, [0.0, np.inf])


def test_correlation_half_at_one():
    # corrected closed form, cross-checked by two independent routes
    r = lamperti_correlation(0.5, 1.0)
    assert r == pytest.approx(0.7982309, abs=1e-7)
    # integrated Brownian motion closed form
    assert r == pytest.approx(1.5 * math.exp(-0.5) - 0.5 * math.exp(-1.5), abs=1e-15)
    # brute-force quadrature of the fBm covariance mapped through the Lamperti map
    t1, t2 = 1.0, 0.0
    c2 = 2 * 0.5 + 2  # unit-scale fBm: c^2 = 2H + 2
    via_quad = c2 * math.exp(-1.5 * (t1 + t2)) * ifbm_cov_quad(0.5, math.e, 1.0)
    assert r == pytest.approx(via_quad, abs=1e-6)


def test_literal_sinh_form_is_not_a_correlation():
    # without the factor 2**(2H+2) under the power the expression grows
    H, t = 0.5, 20.0
    c2 = 1 / (1 + 2 * H)
    literal = c2 * (2 * (1 + H) * math.cosh(H * t) - math.cosh((1 + H) * t)
                    + 0.5 * abs(math.sinh(t / 2)) ** (2 * H + 2))
    assert abs(literal) > 1


@pytest.mark.parametrize("H", H_GRID)
def test_correlation_matches_high_precision(H):
    t = np.concatenate([np.linspace(0, 2, 41), np.linspace(2, 80, 79)])
    r = lamperti_correlation(H, t)
    ref = np.array([float(lamperti_correlation_mp(H, x)) for x in t])
    np.testing.assert_allclose(r, ref, rtol=1e-10, atol=0)


def test_branch_switch_continuity():
    for H in H_GRID:
        t0 = math.log(2.0)
        left = lamperti_correlation(H, np.nextafter(t0, 0))
        right = lamperti_correlation(H, t0)
        assert left == pytest.approx(right, rel=1e-13)


@pytest.mark.parametrize("H", [0.2, 0.5, 0.8])
def test_small_lag_expansion(H):
    t = np.geomspace(1e-3, 1e-1, 40)
    c2 = 1 / (1 + 2 * H)
    approx = 1 - 0.5 * (1 - H * H) * t ** 2 + 0.5 * c2 * t ** (2 + 2 * H)
    ref = np.array([float(lamperti_correlation_mp(H, x, dps=50)) for x in t])
    C = np.abs(ref - approx) / t ** 4
    # remainder is O(t^4) with a stable constant
    assert C.max() < 1.0
    assert C.max() / C.min() < 3.0


@pytest.mark.parametrize("H", H_GRID)
def test_curvature_at_origin(H):
    # r''(0) = -(1 - H^2), the input to Rice's formula
    # the t^(2+2H) term biases the difference quotient by ~h^(2H), so h is tiny
    h = mpmath.mpf("1e-40")
    with mpmath.workdps(150):
        d2 = 2 * (lamperti_correlation_mp(H, h, dps=150) - 1) / h ** 2
    assert float(d2) == pytest.approx(-(1 - H * H), abs=1e-3)


@settings(max_examples=60, deadline=None)
@given(H=st.floats(0.02, 0.98), t=st.floats(0, 200))
def test_correlation_bounded_property(H, t):
    r = lamperti_correlation(H, t)
    assert -1e-300 < r <= 1.0


# -- decay ----------------------------------------------------------------

@pytest.mark.parametrize("H", [0.5, 0.2, 0.8, 0.3])
def test_decay_rate(H):
    rep = lamperti_decay_check(H, np.linspace(10, 30, 41))
    assert rep.relative_deviation < 0.05
    assert rep.expected_rate == -min(H, 1 - H)


def test_decay_symmetric_rate():
    assert lamperti_decay_check(0.3, [10, 20]).expected_rate == pytest.approx(
        lamperti_decay_check(0.7, [10, 20]).expected_rate, abs=1e-15)


def test_decay_rejects_short_lags():
    with pytest.raises(ValidationError):
        lamperti_decay_check(0.5, [5, 20])


def test_decay_underflow_reported():
    with pytest.raises(ValidationError):
        lamperti_decay_check(0.5, [1e5, 2e5])


# -- Rice -----------------------------------------------------------------

def test_rice_values():
    assert rice_interzero_distance(0.5) == pytest.approx(3.6276, abs=1e-4)
    assert rice_interzero_distance(0.9) == pytest.approx(math.pi / math.sqrt(0.19), rel=1e-15)
    assert rice_interzero_distance(0.9) == pytest.approx(7.2069, rel=1e-4)
    assert rice_interzero_distance(1e-9) == pytest.approx(math.pi, rel=1e-12)
    d = [rice_interzero_distance(h) for h in np.linspace(0.01, 0.99, 50)]
    assert np.all(np.diff(d) > 0)
    assert min(d) > math.pi


# -- IFBM covariance ------------------------------------------------------

def test_ifbm_variance_half():
    assert ifbm_covariance(0.5, 1.0, 1.0) == pytest.approx(1 / 3, abs=1e-15)


def test_ifbm_covariance_trivial():
    assert ifbm_covariance(0.3, 0.0, 2.0) == 0.0
    assert ifbm_covariance(0.3, 1.7, 0.4) == ifbm_covariance(0.3, 0.4, 1.7)
    with pytest.raises(ValidationError):
        ifbm_covariance(0.3, -1.0, 1.0)


@pytest.mark.parametrize("H,t,s", [(0.1, 1.0, 0.5), (0.3, 2.0, 1.3), (0.5, 0.7, 1.9),
                                   (0.7, 1.0, 1.0), (0.9, 3.0, 0.2)])
def test_ifbm_covariance_vs_quadrature(H, t, s):
    assert ifbm_covariance(H, t, s) == pytest.approx(ifbm_cov_quad(H, t, s), rel=1e-8)


def test_ifbm_variance_scaling():
    for H in H_GRID:
        t = 2.5
        assert ifbm_covariance(H, t, t) == pytest.approx(t ** (2 * H + 2) / (2 * H + 2), rel=1e-13)


def test_ifbm_kernel_psd():
    t = np.linspace(0.05, 5, 40)
    for H in (0.2, 0.5, 0.8):
        K = ifbm_covariance(H, t[:, None], t[None, :])
        assert np.linalg.eigvalsh(K).min() > -1e-10 * np.abs(K).max()


@pytest.mark.parametrize("H", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_lamperti_consistency(H):
    tau = np.linspace(-2.0, 2.0, 20)
    t1, t2 = np.meshgrid(tau, tau, indexing="ij")
    m = LampertiModel(H)
    cov = ifbm_covariance(H, np.exp(t1), np.exp(t2), scale=m.structure_scale)
    lhs = m.c ** 2 * np.exp(-(1 + H) * (t1 + t2)) * cov
    np.testing.assert_allclose(lhs, lamperti_correlation(H, t1 - t2), atol=1e-12)


# -- grid -----------------------------------------------------------------

def test_grid_examples():
    g = make_grid(0.2, 50, 1e-4)
    assert g.horizon == pytest.approx(-math.log(1e-4) / 0.16, abs=g.delta)
    assert g.horizon == pytest.approx(57.6, abs=0.1)
    g = make_grid(0.1, 50, 1e-4)
    assert g.horizon == pytest.approx(102.3, abs=0.2)
    g = make_grid(0.5, 50, 1e-4)
    assert g.horizon == pytest.approx(36.9, abs=0.1)


@pytest.mark.parametrize("H", H_GRID)
def test_grid_invariants(H):
    g = make_grid(H, 50, 1e-4)
    assert g.delta * g.n0 == pytest.approx(rice_interzero_distance(H), rel=1e-15)
    z = quantile_time(H, 1e-4)
    assert g.L * g.delta >= z * (1 - 1e-12)
    assert (g.L - 1) * g.delta < z
    assert g.times.size == g.L + 1 and g.times[-1] == pytest.approx(g.horizon)


@pytest.mark.parametrize("kw", [dict(n0=1), dict(n0=2.5), dict(eps_L=0.0), dict(eps_L=1.0)])
def test_grid_rejects(kw):
    with pytest.raises(ValidationError):
        make_grid(0.5, **{"n0": 50, "eps_L": 1e-4, **kw})
