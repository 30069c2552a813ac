"""Tail-exponent estimation on quantile windows.

On a window ``(Z_eps, Z_{eps/10})`` of length ``ln(10)/theta0`` the first
zero is modelled by a truncated exponential ``c(theta) exp(-theta t)``.  The
maximum likelihood slope is ``theta_hat = x / |window|`` where ``x`` solves

    1/x - 1/(e^x - 1) = (mean(Z in window) - Z_eps) / |window|.

The module also evaluates the same statistic under a power-corrected tail
``P(Z > t) = c t^alpha exp(-theta0 t)`` and the sample sizes needed to
resolve ``alpha``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import InsufficientData, OutOfRange, QuadratureFailure, ValidationError
from .model import check_hurst, quantile_time

__all__ = [
    "SIGMA_FACTOR",
    "TailWindow",
    "SlopeEstimate",
    "PowerModel",
    "sigma_factor",
    "tail_window",
    "window_from_theta0",
    "mean_excess_function",
    "ml_root",
    "ml_slope",
    "aggregate_series",
    "pooled_slope",
    "expected_slope_power_model",
    "lnZ_std_truncated",
    "cramer_rao_paths",
]


def sigma_factor(x=math.log(10.0)) -> float:
    """``sqrt(n) sd(theta_hat) / theta`` for a truncated exponential with ``theta |window| = x``.

    The Fisher information per observation is
    ``theta**-2 (1 - x**2 e**x / (e**x - 1)**2)``.
    """
    return 1.0 / math.sqrt(1.0 - x * x * math.exp(x) / math.expm1(x) ** 2)


SIGMA_FACTOR = sigma_factor()


@dataclass(frozen=True)
class TailWindow:
    """Interval ``(lower, upper)`` with ``lower = -ln(eps)/theta0`` and ``upper`` at ``eps/10``."""

    eps: float
    lower: float
    upper: float
    theta0: float

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def contains(self, z):
        z = np.asarray(z)
        return (z >= self.lower) & (z < self.upper)


def window_from_theta0(theta0, eps) -> TailWindow:
    eps = float(eps)
    if not (0.0 < eps < 1.0):
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    if not theta0 > 0:
        raise ValidationError("theta0 must be positive")
    lower = -math.log(eps) / theta0
    return TailWindow(eps, lower, lower + math.log(10.0) / theta0, float(theta0))


def tail_window(H, eps) -> TailWindow:
    """Window ``(Z_eps, Z_{eps/10})`` for ``theta0 = H (1 - H)``."""
    H = check_hurst(H)
    w = window_from_theta0(H * (1.0 - H), eps)
    assert math.isclose(w.lower, quantile_time(H, eps))
    return w


def mean_excess_function(x):
    """``f(x) = 1/x - 1/(e^x - 1)``, the scaled mean of a truncated exponential.

    ``f`` decreases from 1 (``x -> -inf``) through ``f(0) = 1/2`` to 0.
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    with np.errstate(over="ignore"):
        big = 1.0 / xs - 1.0 / np.expm1(xs)
    ser = 0.5 - x / 12.0 + x**3 / 720.0
    out = np.where(small, ser, big)
    return float(out) if out.ndim == 0 else out


def ml_root(m) -> float:
    """Solve ``f(x) = m`` for the truncated-exponential likelihood equation.

    ``m = 1/2`` gives ``x = 0``; ``m > 1/2`` gives a negative root through
    ``f(-x) = 1 - f(x)``.
    """
    m = float(m)
    if not (0.0 < m < 1.0):
        raise OutOfRange(f"mean excess must lie in (0, 1), got {m}")
    if m == 0.5:
        return 0.0
    if m > 0.5:
        return -ml_root(1.0 - m)
    # f(x) < 1/x, so f(2/m) < m brackets the root
    hi = 2.0 / m
    g = lambda x: mean_excess_function(x) - m
    x = optimize.brentq(g, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(x)


@dataclass
class SlopeEstimate:
    """ML slope on one window.

    ``sigma_theoretical`` is ``SIGMA_FACTOR |theta_hat| / sqrt(n_obs)``;
    ``sigma_empirical`` is only set for estimates averaged over series.
    """

    theta_hat: float
    n_obs: int
    mean_excess: float
    sigma_theoretical: float
    window: TailWindow
    sigma_empirical: float | None = None
    n_series: int = 1
    serial: list = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        d = {
            "theta_hat": self.theta_hat,
            "n_obs": self.n_obs,
            "mean_excess": self.mean_excess,
            "sigma_theoretical": self.sigma_theoretical,
            "sigma_empirical": self.sigma_empirical,
            "n_series": self.n_series,
            "window": asdict(self.window),
        }
        return d


def _sigma_theoretical(theta, n):
    return SIGMA_FACTOR * abs(theta) / math.sqrt(n) if n > 0 else math.inf


def _window_values(records, window, use_crossing=True):
    if hasattr(records, "start_nonneg"):
        keep = ~records.start_nonneg & ~records.censored
        if use_crossing and records.crossing is not None:
            z = records.crossing[keep]
        else:
            z = records.z[keep]
    elif isinstance(records, np.ndarray):
        z = records.astype(float, copy=False)
    else:
        items = list(records)
        if items and hasattr(items[0], "z"):
            z = np.array([
                r.crossing if use_crossing and r.crossing is not None else r.z
                for r in items if r.start_sign == "negative" and not r.censored
            ], dtype=float)
        else:
            z = np.asarray(items, dtype=float)
    return z[window.contains(z)]


def ml_slope(records, window: TailWindow, use_crossing=True) -> SlopeEstimate:
    """ML slope from the observations that fall in ``window``.

    ``records`` may be a :class:`~ifbm_persistence.simulate.RecordSet`, an
    iterable of first-zero records, or an array of zero times.  Only
    uncensored paths with a negative start contribute.  With
    ``use_crossing`` the interpolated zero is used instead of the grid
    time when it was recorded: the estimator is sensitive to sub-grid
    placement of the observations relative to the window edges.
    """
    z = _window_values(records, window, use_crossing)
    n = int(z.size)
    if n < 2:
        raise InsufficientData(f"{n} observations in window eps={window.eps}; need >= 2")
    if np.all(z == z[0]):
        raise InsufficientData(f"degenerate window eps={window.eps}: all {n} observations equal")
    m = (math.fsum(z) / n - window.lower) / window.length
    x = ml_root(m)
    theta = x / window.length
    return SlopeEstimate(theta, n, m, _sigma_theoretical(theta, n), window)


def aggregate_series(estimates) -> SlopeEstimate:
    """Average serial estimates; ``sigma_empirical`` is the standard error of the mean.

    Sums use :func:`math.fsum`, so the result is independent of the order
    of ``estimates``.
    """
    estimates = list(estimates)
    r = len(estimates)
    if r < 2:
        raise InsufficientData("need at least two serial estimates")
    windows = {e.window for e in estimates}
    if len(windows) != 1:
        raise ValidationError("serial estimates must share one window")
    th = [e.theta_hat for e in estimates]
    mean = math.fsum(th) / r
    var = math.fsum((t - mean) ** 2 for t in th) / (r - 1)
    n_obs = sum(e.n_obs for e in estimates)
    m = math.fsum(e.mean_excess * e.n_obs for e in estimates) / n_obs
    return SlopeEstimate(
        theta_hat=mean,
        n_obs=n_obs,
        mean_excess=m,
        sigma_theoretical=_sigma_theoretical(mean, n_obs),
        window=windows.pop(),
        sigma_empirical=math.sqrt(var / r),
        n_series=r,
        serial=sorted(th),
    )


def pooled_slope(record_sets, window: TailWindow, use_crossing=True) -> SlopeEstimate:
    """Single ML fit on the union of several series."""
    z = np.concatenate([_window_values(rs, window, use_crossing) for rs in record_sets])
    est = ml_slope(np.sort(z), window)
    est.n_series = len(record_sets)
    return est


@dataclass(frozen=True)
class PowerModel:
    """Power-corrected exponential tail ``c t**alpha exp(-theta0 t)``.

    The constant ``c`` cancels in every in-window quantity.  Whether the
    expression is the density or the survival function of ``Z`` is chosen
    per call with ``form``; the two readings agree at ``alpha = 0``.
    """

    theta0: float
    alpha: float = 0.0

    def __post_init__(self):
        if not self.theta0 > 0:
            raise ValidationError("theta0 must be positive")

    def survival(self, t, ref):
        # normalized so that survival(ref) == 1
        return (t / ref) ** self.alpha * np.exp(-self.theta0 * (t - ref))

    def density(self, t, ref, form="density"):
        """Unnormalized density on ``t > 0``.

        ``form="density"`` (default) takes ``t**alpha exp(-theta0 t)`` as the
        density of ``Z``; ``form="survival"`` reads the same expression as
        the survival function and differentiates it.
        """
        if form == "survival":
            return self.survival(t, ref) * (self.theta0 - self.alpha / t)
        if form == "density":
            return self.survival(t, ref)
        raise ValidationError(f"unknown form {form!r}")


def _quad(fn, a, b, rtol=1e-10):
    val, err = integrate.quad(fn, a, b, epsabs=0.0, epsrel=rtol, limit=200)
    if not np.isfinite(val) or err > max(rtol * abs(val), 1e-300) * 10:
        raise QuadratureFailure(f"quadrature on ({a}, {b}) did not converge (err={err:.2e})")
    return val


def _check_density(model, lo, form):
    if form == "survival" and model.alpha > 0 and model.theta0 * lo <= model.alpha:
        raise ValidationError("power-law survival is not decreasing on the window")


def expected_slope_power_model(model: PowerModel, window: TailWindow, form="density") -> float:
    """Slope the ML estimator converges to when the tail follows ``model``.

    The in-window mean of ``Z`` replaces the empirical mean in the
    likelihood equation.  ``form`` selects the reading of the model, see
    :meth:`PowerModel.density`.
    """
    a, b = window.lower, window.upper
    _check_density(model, a, form)
    if form == "survival":
        Sa = 1.0
        Sb = model.survival(b, a)
        mass = Sa - Sb
        # integration by parts: int t f = a S(a) - b S(b) + int S
        first = a * Sa - b * Sb + _quad(lambda t: model.survival(t, a), a, b)
    else:
        mass = _quad(lambda t: model.density(t, a, form), a, b)
        first = _quad(lambda t: t * model.density(t, a, form), a, b)
    m = (first / mass - a) / window.length
    return ml_root(m) / window.length


def lnZ_std_truncated(theta0, eps, A=20.0, alpha=0.0, form="density") -> float:
    """Standard deviation of ``ln Z`` for ``Z`` restricted to ``(Z_eps, A/theta0)``."""
    if not theta0 > 0:
        raise ValidationError("theta0 must be positive")
    lo = -math.log(eps) / theta0
    hi = A / theta0
    if not lo < hi:
        raise ValidationError("window is empty: need -ln(eps) < A")
    model = PowerModel(theta0, alpha)
    _check_density(model, lo, form)
    f = lambda t: model.density(t, lo, form)
    mass = _quad(f, lo, hi)
    # center on ln(lo) to limit cancellation in the variance
    c = math.log(lo)
    m1 = _quad(lambda t: (np.log(t) - c) * f(t), lo, hi) / mass
    m2 = _quad(lambda t: (np.log(t) - c) ** 2 * f(t), lo, hi) / mass
    return math.sqrt(max(m2 - m1 * m1, 0.0))


def cramer_rao_paths(sigma_opt, eps, A=20.0, theta0=0.25, alpha=0.0, form="density") -> int:
    """Paths needed to estimate ``alpha`` with standard deviation ``sigma_opt``.

    ``N = [sigma_opt sd(ln Z)]**-2 / eps``, since about ``N eps`` paths
    reach the window.
    """
    for name, v in (("sigma_opt", sigma_opt), ("eps", eps), ("A", A), ("theta0", theta0)):
        if not v > 0:
            raise ValidationError(f"{name} must be positive")
    s = lnZ_std_truncated(theta0, eps, A, alpha, form)
    return int(math.ceil((sigma_opt * s) ** -2 / eps))
