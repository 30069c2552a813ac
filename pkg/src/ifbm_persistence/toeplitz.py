"""Triangular synthesis coefficients for a stationary Gaussian sequence.

A stationary sequence with correlations ``r(0), r(delta), ..., r(L delta)``
is written as ``x_k = sum_{i<=k} a(i|k) eps_i`` with white noise ``eps``.
The coefficients ``a(i|k)`` are the rows of the lower Cholesky factor of the
Toeplitz matrix ``[r(|j - k| delta)]``.  They are computed here by the Schur
recursion on the displacement generators, which costs ``O(L**2)`` and
finishes row ``k`` at step ``k``.  A dense Cholesky oracle and a
diagnostic for spurious oscillations of late coefficients are provided for
cross-checking.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np

from . import ddarith as dd
from .errors import NonPositiveDefinite, PrecisionExhausted, ValidationError
from .model import GridSpec, check_hurst, lamperti_correlation, lamperti_correlation_mp

__all__ = [
    "PRECISION_MODES",
    "CorrSamples",
    "StabilityReport",
    "CoeffTable",
    "OpCounter",
    "correlation_samples",
    "schur_coefficients",
    "cholesky_oracle",
    "stability_diagnostic",
    "save_table",
    "load_table",
]

PRECISION_MODES = ("standard", "extended")

PIVOT_TOL = 1e-14
OSCILLATION_FACTOR = 10.0
# log10 of the envelope excess at which standard precision gives up
HARD_LIMIT = 3.0
ENVELOPE_FLOOR = 1e-12
CHOLESKY_MAX_L = 4096


@dataclass(frozen=True)
class CorrSamples:
    """Correlation samples ``r(k delta)``, ``k = 0..L``.

    ``values_lo`` holds the low words of a double-double representation and
    is only used by the extended-precision factorization.
    """

    values: np.ndarray
    delta: float
    H: float | None = None
    values_lo: np.ndarray | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValidationError("correlation samples must be a nonempty 1-D sequence")
        if not np.isclose(v[0], 1.0, rtol=0, atol=1e-12):
            raise ValidationError(f"r(0) must equal 1, got {v[0]!r}")
        if np.any(np.abs(v) > 1.0 + 1e-12):
            raise ValidationError("correlation samples must satisfy |r| <= 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.values_lo is not None:
            lo = np.array(self.values_lo, dtype=float)
            if lo.shape != v.shape:
                raise ValidationError("values_lo must match values in shape")
            lo.setflags(write=False)
            object.__setattr__(self, "values_lo", lo)

    @property
    def L(self) -> int:
        return self.values.size - 1

    def toeplitz(self) -> np.ndarray:
        idx = np.arange(self.L + 1)
        return self.values[np.abs(idx[:, None] - idx[None, :])]


def correlation_samples(grid: GridSpec, precision_mode="standard") -> CorrSamples:
    """Sample the Lamperti correlation on a grid.

    In extended mode every value is computed with :mod:`mpmath` and stored
    as a double-double.
    """
    _check_mode(precision_mode)
    H = check_hurst(grid.H)
    if precision_mode == "standard":
        return CorrSamples(lamperti_correlation(H, grid.times), grid.delta, H)
    with mpmath.workdps(60):
        vals = [lamperti_correlation_mp(H, k * mpmath.mpf(grid.delta), dps=60)
                for k in range(grid.L + 1)]
        hi, lo = dd.from_mpf(vals)
    return CorrSamples(hi, grid.delta, H, values_lo=lo)


@dataclass
class StabilityReport:
    """Envelope check of late coefficients ``a(i|k)``, ``i delta >= tail_band_start``.

    ``max_tail_coefficient[k]`` is ``max_i |a(i|k)|`` over the tail band
    (NaN for rows that do not reach it).  ``oscillation_score`` is
    ``log10`` of the worst ratio between a tail coefficient's deviation
    from the converged column profile and the envelope fitted on the
    stable band, clipped at 0.
    """

    tail_band_start: float
    max_tail_coefficient: np.ndarray
    flagged_rows: frozenset
    oscillation_score: float
    threshold: float = math.log10(OSCILLATION_FACTOR)

    @property
    def ok(self) -> bool:
        return not self.flagged_rows

    def summary(self) -> str:
        if self.ok and np.all(np.isnan(self.max_tail_coefficient)):
            return f"stable: grid ends before the tail band at t={self.tail_band_start:g}"
        if self.ok:
            return (f"stable: oscillation score {self.oscillation_score:.3f} "
                    f"(threshold {self.threshold:.3f}) beyond t={self.tail_band_start:g}")
        rows = sorted(self.flagged_rows)
        return (f"UNSTABLE: {len(rows)} rows flagged from row {rows[0]}, "
                f"oscillation score {self.oscillation_score:.3f}")

    def as_dict(self) -> dict:
        return {
            "tail_band_start": self.tail_band_start,
            "flagged_rows": len(self.flagged_rows),
            "first_flagged_row": min(self.flagged_rows) if self.flagged_rows else None,
            "oscillation_score": self.oscillation_score,
            "threshold": self.threshold,
        }


@dataclass
class CoeffTable:
    """Lower-triangular coefficients ``a[k, i] = a(i|k)`` for ``0 <= i <= k <= L``."""

    a: np.ndarray
    delta: float
    precision_mode: str = "standard"
    diagnostics: StabilityReport | None = None
    H: float | None = None
    op_count: int = 0
    a_lo: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        a = np.ascontiguousarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError("coefficient table must be square")
        a.setflags(write=False)
        self.a = a
        _check_mode(self.precision_mode)

    @property
    def L(self) -> int:
        return self.a.shape[0] - 1

    @property
    def horizon(self) -> float:
        return self.L * self.delta

    def row(self, k) -> np.ndarray:
        return self.a[k, : k + 1]

    def covariance(self, j, k):
        """Covariance of ``x_j`` and ``x_k`` implied by the table (vectorized)."""
        j = np.asarray(j)
        k = np.asarray(k)
        return np.einsum("...i,...i->...", self.a[j], self.a[k])


def _check_mode(mode):
    if mode not in PRECISION_MODES:
        raise ValidationError(f"precision_mode must be one of {PRECISION_MODES}, got {mode!r}")


class OpCounter:
    """Counts generator entries updated by the recursion."""

    def __init__(self):
        self.count = 0

    def add(self, n):
        self.count += int(n)


def _schur_standard(r, counter):
    n = r.size
    G = np.zeros((n, n))
    a = r / math.sqrt(r[0])
    b = a[1:].copy()
    G[:, 0] = a
    counter.add(n)
    for i in range(1, n):
        # a holds the shifted generator on rows i..L, b the second one
        a = a[:-1]
        rho = b[0] / a[0]
        piv = (1.0 - rho) * (1.0 + rho)
        if not (piv > PIVOT_TOL) or not (a[0] * a[0] * piv > PIVOT_TOL * r[0]):
            raise NonPositiveDefinite(i, a[0] * a[0] * piv)
        s = math.sqrt(piv)
        a, b = (a - rho * b) / s, (b - rho * a) / s
        b = b[1:]
        G[i:, i] = a
        counter.add(2 * a.size)
    return G, None


def _schur_extended(r_hi, r_lo, counter):
    n = r_hi.size
    G = np.zeros((n, n))
    Glo = np.zeros((n, n))
    s0h, s0l = dd.dd_sqrt(r_hi[0], r_lo[0])
    ah, al = dd.dd_div(r_hi, r_lo, s0h, s0l)
    ah = np.asarray(ah, dtype=float)
    al = np.asarray(al, dtype=float)
    bh, bl = ah[1:].copy(), al[1:].copy()
    G[:, 0], Glo[:, 0] = ah, al
    counter.add(n)
    for i in range(1, n):
        ah, al = ah[:-1], al[:-1]
        rh, rl = dd.dd_div(bh[0], bl[0], ah[0], al[0])
        ph, pl = dd.dd_mul(*dd.dd_sub(1.0, 0.0, rh, rl), *dd.dd_add(1.0, 0.0, rh, rl))
        dh, dl = dd.dd_mul(*dd.dd_mul(ah[0], al[0], ah[0], al[0]), ph, pl)
        if not (ph > PIVOT_TOL) or not (dh > PIVOT_TOL * r_hi[0]):
            raise NonPositiveDefinite(i, float(dh))
        sh, sl = dd.dd_sqrt(ph, pl)
        ih, il = dd.dd_div(1.0, 0.0, sh, sl)
        th, tl = dd.dd_sub(ah, al, *dd.dd_mul(rh, rl, bh, bl))
        uh, ul = dd.dd_sub(bh, bl, *dd.dd_mul(rh, rl, ah, al))
        ah, al = dd.dd_mul(th, tl, ih, il)
        bh, bl = dd.dd_mul(uh, ul, ih, il)
        bh, bl = bh[1:], bl[1:]
        G[i:, i], Glo[i:, i] = ah, al
        counter.add(2 * ah.size)
    # round the double-double value to the nearest double
    return G + Glo, Glo


def schur_coefficients(corr: CorrSamples, precision_mode="standard",
                       tail_band_start=40.0, hard_limit=HARD_LIMIT) -> CoeffTable:
    """Factor the Toeplitz correlation matrix by the Schur recursion.

    Parameters
    ----------
    corr : CorrSamples
    precision_mode : {"standard", "extended"}
        ``"extended"`` runs the recursion in double-double arithmetic.
    tail_band_start : float
        Time from which coefficients are screened by
        :func:`stability_diagnostic`.
    hard_limit : float
        Oscillation score above which a standard-precision table is
        rejected with :class:`PrecisionExhausted`.

    Returns
    -------
    CoeffTable

    Raises
    ------
    NonPositiveDefinite
        When an innovation variance falls below ``1e-14 r(0)``.
    PrecisionExhausted
    """
    _check_mode(precision_mode)
    counter = OpCounter()
    r = corr.values
    if precision_mode == "standard":
        G, Glo = _schur_standard(r, counter)
    else:
        lo = corr.values_lo if corr.values_lo is not None else np.zeros_like(r)
        G, Glo = _schur_extended(r, lo, counter)
    table = CoeffTable(G, corr.delta, precision_mode, H=corr.H,
                       op_count=counter.count, a_lo=Glo)
    table.diagnostics = stability_diagnostic(table, tail_band_start)
    if precision_mode == "standard" and table.diagnostics.oscillation_score > hard_limit:
        raise PrecisionExhausted(table.diagnostics.oscillation_score, hard_limit,
                                 table.diagnostics)
    return table


def cholesky_oracle(corr: CorrSamples) -> CoeffTable:
    """Dense ``O(L**3)`` Cholesky factor of the Toeplitz matrix."""
    if corr.L > CHOLESKY_MAX_L:
        raise ValidationError(f"dense oracle limited to L <= {CHOLESKY_MAX_L}")
    T = corr.toeplitz()
    try:
        G = np.linalg.cholesky(T)
    except np.linalg.LinAlgError:
        G = None
    if G is not None:
        d2 = np.diag(G) ** 2
        bad = np.flatnonzero(~(d2 > PIVOT_TOL * T[0, 0]))
        if bad.size:
            raise NonPositiveDefinite(bad[0], float(d2[bad[0]]))
        return CoeffTable(G, corr.delta, "standard", H=corr.H)
    # locate the failing leading minor
    for k in range(1, T.shape[0] + 1):
        try:
            np.linalg.cholesky(T[:k, :k])
        except np.linalg.LinAlgError:
            raise NonPositiveDefinite(k - 1) from None
    raise NonPositiveDefinite(T.shape[0] - 1)


def stability_diagnostic(table: CoeffTable, tail_band_start=40.0,
                         factor=OSCILLATION_FACTOR, floor=ENVELOPE_FLOOR,
                         drift_span=10.0) -> StabilityReport:
    """Screen late coefficients for parasitic oscillations.

    For a stationary sequence the columns ``a(i|i+j)`` converge, as ``i``
    grows, to the innovation coefficients at lag ``j``; for the Lamperti
    correlation they do so geometrically and reach roundoff long before
    ``i delta = 40``.  The last column before the tail band serves as the
    reference profile.  The envelope is the drift of the columns over the
    final ``drift_span`` time units of the stable band, plus ``floor``,
    and a row is flagged when any of its tail-band coefficients deviates
    from the reference by more than ``factor`` times the envelope.
    """
    a = table.a
    n = a.shape[0]
    i0 = max(int(math.ceil(tail_band_start / table.delta - 1e-9)), 1)
    max_tail = np.full(n, np.nan)
    if i0 >= n:
        return StabilityReport(tail_band_start, max_tail, frozenset(), 0.0,
                               math.log10(factor))
    ref = a[i0 - 1 :, i0 - 1]  # ref[j] = a(i0-1 | i0-1+j)
    i_mid = max(i0 - 1 - int(math.ceil(drift_span / table.delta)), 0)
    m = n - (i0 - 1)
    drift = np.abs(a[i_mid : i_mid + m, i_mid] - ref).max() if i_mid < i0 - 1 else 0.0
    env = drift + floor

    worst = np.zeros(n)
    for k in range(i0, n):
        tail = a[k, i0 : k + 1]
        lags = k - np.arange(i0, k + 1)
        max_tail[k] = np.abs(tail).max()
        worst[k] = np.abs(tail - ref[lags]).max() / env
    flagged = frozenset(int(k) for k in np.flatnonzero(worst > factor))
    top = worst.max()
    score = max(0.0, math.log10(top)) if top > 0 else 0.0
    return StabilityReport(tail_band_start, max_tail, flagged, score, math.log10(factor))


# -- binary cache -----------------------------------------------------------

CACHE_MAGIC = b"IFBMCOEF"
CACHE_VERSION = 1
_HEADER = struct.Struct("<8sIIddQQ")


def _tri(a):
    return a[np.tril_indices(a.shape[0])]


def _untri(v, n):
    out = np.zeros((n, n))
    out[np.tril_indices(n)] = v
    return out


def save_table(path, table: CoeffTable) -> Path:
    """Write ``table`` to the binary cache format (see ``docs/formats.md``)."""
    path = Path(path)
    n = table.L + 1
    mode = PRECISION_MODES.index(table.precision_mode)
    payload = _tri(table.a).astype("<f8").tobytes()
    if table.precision_mode == "extended" and table.a_lo is not None:
        payload += _tri(table.a_lo).astype("<f8").tobytes()
        has_lo = 1
    else:
        has_lo = 0
    H = float("nan") if table.H is None else float(table.H)
    header = _HEADER.pack(CACHE_MAGIC, CACHE_VERSION, mode | (has_lo << 8), H,
                          float(table.delta), table.L, n * (n + 1) // 2)
    body = header + payload
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(body + hashlib.sha256(body).digest())
    tmp.replace(path)
    return path


def load_table(path, tail_band_start=40.0) -> CoeffTable:
    """Read a cached table; verifies magic, version and checksum."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + 32:
        raise ValidationError(f"{path}: truncated coefficient cache")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ValidationError(f"{path}: checksum mismatch")
    magic, version, flags, H, delta, L, count = _HEADER.unpack_from(body)
    if magic != CACHE_MAGIC:
        raise ValidationError(f"{path}: not a coefficient cache")
    if version != CACHE_VERSION:
        raise ValidationError(f"{path}: unsupported cache version {version}")
    mode = PRECISION_MODES[flags & 0xFF]
    has_lo = bool(flags >> 8)
    n = L + 1
    vals = np.frombuffer(body, dtype="<f8", offset=_HEADER.size)
    if vals.size != count * (2 if has_lo else 1):
        raise ValidationError(f"{path}: payload size mismatch")
    a = _untri(vals[:count], n)
    a_lo = _untri(vals[count:], n) if has_lo else None
    table = CoeffTable(a, delta, mode, H=None if math.isnan(H) else H, a_lo=a_lo)
    table.diagnostics = stability_diagnostic(table, tail_band_start)
    return table
