"""Closed-form quantities for the Lamperti-stationarized integral of fBm.

The integrated fractional Brownian motion ``IFBM(t) = int_0^t b_H(s) ds`` is
self-similar with index ``1 + H``.  The Lamperti map

    x(tau) = c * exp(-(1 + H) tau) * IFBM(exp(tau))

turns it into a stationary, unit-variance Gaussian process whose correlation
function is available in closed form.  This module collects that correlation,
its asymptotics, Rice's mean interzero distance and the sampling grid used
by the simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import ValidationError

__all__ = [
    "Hurst",
    "LampertiModel",
    "GridSpec",
    "DecayReport",
    "check_hurst",
    "lamperti_correlation",
    "lamperti_correlation_mp",
    "lamperti_decay_check",
    "lamperti_constant",
    "rice_interzero_distance",
    "ifbm_covariance",
    "quantile_time",
    "make_grid",
]

# Below this lag the direct cosh/sinh form is used; above it the series in
# exp(-t), which has no cancellation.
_SERIES_SWITCH = math.log(2.0)
_SERIES_TERMS = 90


def check_hurst(H) -> float:
    """Validate a Hurst parameter and return it as a float."""
    try:
        H = float(H)
    except (TypeError, ValueError):
        raise ValidationError(f"H must be a real number, got {H!r}") from None
    if not (0.0 < H < 1.0):
        raise ValidationError(f"H must satisfy 0 < H < 1, got {H}")
    return H


@dataclass(frozen=True)
class Hurst:
    """Self-similarity parameter of the driving fBm, ``0 < H < 1``."""

    H: float

    def __post_init__(self):
        object.__setattr__(self, "H", check_hurst(self.H))

    def __float__(self):
        return self.H


def _as_H(H) -> float:
    if isinstance(H, (Hurst, LampertiModel)):
        return H.H
    return check_hurst(H)


@dataclass(frozen=True)
class LampertiModel:
    """Stationary Lamperti image of IFBM with Hurst parameter ``H``.

    Attributes
    ----------
    H : float
    c : float
        Normalizing constant ``(1 + 2H)**-0.5``; makes ``r(0) = 1`` when the
        fBm structure function is ``structure_scale * |t - s|**(2H)``.
    rho : float
        Exponential decay rate of ``r(t)`` at large lags, ``min(H, 1 - H)``.
    theta0 : float
        Conjectured persistence exponent ``H (1 - H)``.
    """

    H: float

    def __post_init__(self):
        object.__setattr__(self, "H", _as_H(self.H))

    @property
    def c(self) -> float:
        return (1.0 + 2.0 * self.H) ** -0.5

    @property
    def rho(self) -> float:
        return min(self.H, 1.0 - self.H)

    @property
    def theta0(self) -> float:
        return self.H * (1.0 - self.H)

    @property
    def structure_scale(self) -> float:
        """fBm scale ``sigma`` for which ``c`` gives exactly unit variance."""
        return (1.0 + 2.0 * self.H) * (2.0 + 2.0 * self.H)

    def correlation(self, t):
        return lamperti_correlation(self, t)


def lamperti_constant(H, scale=1.0) -> float:
    """Lamperti normalization for an fBm with structure function ``scale*|t-s|^2H``.

    ``Var IFBM(t) = scale * t**(2H+2) / (2H+2)``, so the unit-variance constant
    is ``sqrt((2H + 2) / scale)``.  With ``scale = (1+2H)(2+2H)`` this reduces
    to ``(1 + 2H)**-0.5``.
    """
    H = _as_H(H)
    return math.sqrt((2.0 + 2.0 * H) / scale)


def _series_tail(H, t):
    # sum_{k>=2} (-1)^k binom(p, k) u^(k-1-H) / 2 with u = exp(-t), p = 2H + 2
    p = 2.0 * H + 2.0
    u = np.exp(-t)
    logu = -t
    coef = p * (p - 1.0) / 2.0
    total = np.zeros_like(t)
    upow = np.exp((1.0 - H) * logu)
    for k in range(2, _SERIES_TERMS + 2):
        term = coef * upow
        total += term
        if coef == 0.0 or np.all(np.abs(term) <= 1e-18 * np.abs(total)):
            break
        coef *= (k - p) / (k + 1.0)
        upow = upow * u
    return 0.5 * total


def lamperti_correlation(model, t):
    """Correlation ``r(t)`` of the stationary Lamperti process.

    Parameters
    ----------
    model : LampertiModel, Hurst or float
    t : float or array_like
        Lag(s).  ``r`` is even, so only ``|t|`` matters.

    Returns
    -------
    float or ndarray

    Notes
    -----
    For ``|t| < ln 2`` the closed form

        c^2 [2(1+H) cosh(Ht) - cosh((1+H)t) + 0.5 |2 sinh(t/2)|^(2H+2)]

    is evaluated directly.  Beyond that the three terms grow like
    ``exp((1+H)t)`` while the sum decays like ``exp(-rho t)``, so the
    equivalent series in ``u = exp(-t)``

        c^2 [(1+H) u^H - u^(1+H)/2 + 0.5 sum_{k>=2} (-1)^k C(p,k) u^(k-1-H)]

    with ``p = 2H + 2`` is summed instead.
    """
    H = _as_H(model)
    scalar = np.ndim(t) == 0
    t = np.abs(np.asarray(t, dtype=float))
    if not np.all(np.isfinite(t)):
        raise ValidationError("lag must be finite")
    c2 = 1.0 / (1.0 + 2.0 * H)
    out = np.empty_like(t)

    near = t < _SERIES_SWITCH
    if np.any(near):
        s = t[near]
        out[near] = c2 * (
            2.0 * (1.0 + H) * np.cosh(H * s)
            - np.cosh((1.0 + H) * s)
            + 0.5 * (2.0 * np.sinh(0.5 * s)) ** (2.0 * H + 2.0)
        )
    far = ~near
    if np.any(far):
        s = t[far]
        out[far] = c2 * (
            (1.0 + H) * np.exp(-H * s)
            - 0.5 * np.exp(-(1.0 + H) * s)
            + _series_tail(H, s)
        )
    # rounding can leave r(0) a few ulp above 1
    np.clip(out, -1.0, 1.0, out=out)
    if scalar:
        return float(out)
    return out


def lamperti_correlation_mp(H, t, dps=80):
    """High-precision evaluation of ``r(t)`` with :mod:`mpmath`.

    Used as an oracle for :func:`lamperti_correlation` and to seed the
    extended-precision factorization.  Returns an ``mpmath.mpf``.  The
    working precision is raised by the number of digits lost to
    cancellation, about ``(1 + H)|t| / ln 10``.
    """
    H = _as_H(H)
    dps = int(dps + math.ceil((1.0 + H) * abs(float(t)) / math.log(10.0)))
    with mpmath.workdps(dps):
        Hm = mpmath.mpf(H)
        tm = abs(mpmath.mpf(t))
        c2 = 1 / (1 + 2 * Hm)
        val = c2 * (
            2 * (1 + Hm) * mpmath.cosh(Hm * tm)
            - mpmath.cosh((1 + Hm) * tm)
            + mpmath.mpf("0.5") * (2 * mpmath.sinh(tm / 2)) ** (2 * Hm + 2)
        )
        return +val


@dataclass(frozen=True)
class DecayReport:
    """Least-squares fit of ``ln|r(t)|`` against ``t`` at large lags."""

    rate: float
    intercept: float
    expected_rate: float
    residuals: np.ndarray

    @property
    def deviation(self) -> float:
        return self.rate - self.expected_rate

    @property
    def relative_deviation(self) -> float:
        return abs(self.deviation) / abs(self.expected_rate)


def lamperti_decay_check(model, t_grid) -> DecayReport:
    """Fit the exponential decay rate of ``r(t)`` over large lags.

    Only the rate is fitted; the prefactor of the asymptotic form is left
    free.  All lags must be at least 10.
    """
    H = _as_H(model)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 2:
        raise ValidationError("need at least two lags")
    if np.any(t_grid < 10.0):
        raise ValidationError("decay check requires lags >= 10")
    r = np.abs(lamperti_correlation(H, t_grid))
    ok = r > 0
    if not np.any(ok):
        raise ValidationError("r(t) underflows to zero over the entire grid")
    if ok.sum() < 2:
        raise ValidationError("fewer than two nonzero correlations on grid")
    slope, intercept = np.polyfit(t_grid[ok], np.log(r[ok]), 1)
    resid = np.log(r[ok]) - (slope * t_grid[ok] + intercept)
    return DecayReport(
        rate=float(slope),
        intercept=float(intercept),
        expected_rate=-min(H, 1.0 - H),
        residuals=resid,
    )


def rice_interzero_distance(H) -> float:
    """Mean distance between zeros, ``pi / sqrt(1 - H**2)``.

    Follows from Rice's formula with ``r''(0) = -(1 - H**2)``.
    """
    H = _as_H(H)
    return math.pi / math.sqrt(1.0 - H * H)


def ifbm_covariance(H, t, s, scale=1.0):
    """Covariance of integrated fBm, ``Cov(int_0^t b_H, int_0^s b_H)``.

    The fBm has ``E b_H(u) b_H(v) = scale/2 (u^2H + v^2H - |u-v|^2H)``.
    Integrating over the rectangle gives, with ``p = 2H``,

        scale/(2(p+1)) [s t^(p+1) + t s^(p+1)
                        - (t^(p+2) + s^(p+2) - |t-s|^(p+2)) / (p+2)]

    Broadcasts over ``t`` and ``s``.
    """
    H = _as_H(H)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(s < 0):
        raise ValidationError("ifbm_covariance requires t, s >= 0")
    p = 2.0 * H
    val = (
        s * t ** (p + 1.0)
        + t * s ** (p + 1.0)
        - (t ** (p + 2.0) + s ** (p + 2.0) - np.abs(t - s) ** (p + 2.0)) / (p + 2.0)
    ) * (0.5 * scale / (p + 1.0))
    if val.ndim == 0:
        return float(val)
    return val


def quantile_time(H, eps) -> float:
    """Time ``-ln(eps) / (H (1 - H))`` where a pure exponential tail reaches ``eps``."""
    H = _as_H(H)
    eps = float(eps)
    if not (0.0 < eps < 1.0):
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    return -math.log(eps) / (H * (1.0 - H))


@dataclass(frozen=True)
class GridSpec:
    """Uniform simulation grid ``0, delta, ..., L*delta`` in Lamperti time."""

    H: float
    n0: int
    delta: float
    L: int
    eps_L: float

    @property
    def delta0(self) -> float:
        return rice_interzero_distance(self.H)

    @property
    def horizon(self) -> float:
        return self.L * self.delta

    @property
    def times(self) -> np.ndarray:
        return self.delta * np.arange(self.L + 1)


def make_grid(H, n0=50, eps_L=1e-4) -> GridSpec:
    """Build the grid with ``n0`` points per mean interzero distance.

    ``L`` is the smallest integer with ``L * delta >= -ln(eps_L)/(H(1-H))``.
    """
    H = _as_H(H)
    if int(n0) != n0 or n0 < 2:
        raise ValidationError(f"n0 must be an integer >= 2, got {n0}")
    n0 = int(n0)
    delta = rice_interzero_distance(H) / n0
    z = quantile_time(H, eps_L)
    L = int(math.ceil(z / delta - 1e-9))
    return GridSpec(H=H, n0=n0, delta=delta, L=L, eps_L=float(eps_L))
