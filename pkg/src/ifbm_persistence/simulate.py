"""Monte Carlo synthesis of the stationary process and of IFBM paths.

The stationary sequence is generated row by row from a
:class:`~ifbm_persistence.toeplitz.CoeffTable`,
``x_k = sum_{i<=k} a(i|k) eps_i``.  Path ``j`` of a stream draws its
``k``-th innovation from stream position ``j * PATH_STRIDE + k``, so it does
not depend on how far any other path was simulated, nor on the grid
length: because Cholesky rows are nested, extending ``L`` leaves every
uncensored record unchanged.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonPositiveDefinite, ValidationError
from .model import check_hurst, ifbm_covariance
from .rng import NoiseStream, gaussian_at
from .toeplitz import CoeffTable

__all__ = [
    "PATH_STRIDE",
    "FirstZeroRecord",
    "RecordSet",
    "DirectPath",
    "PathStatistics",
    "SurvivalCurve",
    "first_zero_batch",
    "synthesize_first_zero",
    "synthesize_full_path",
    "full_paths",
    "sign_change_spacing",
    "simulate_series",
    "series_sizes",
    "run_series",
    "direct_ifbm_paths",
    "path_statistics",
    "survival_estimate",
    "write_records",
    "read_records",
]

BATCH_PATHS = 16384
BLOCK_STEPS = 32
DIRECT_MAX_STEPS = 4096
PATH_STRIDE = 1 << 32


@dataclass(frozen=True)
class FirstZeroRecord:
    """First grid time ``z`` at which the stationary path is nonnegative.

    ``censored`` is set when the path stays negative up to ``L delta``, in
    which case ``z = L delta``.  Paths starting at ``x(0) >= 0`` have
    ``z = 0`` and ``start_sign = "nonnegative"``.  ``crossing`` is the zero
    located by linear interpolation between the last negative and the first
    nonnegative grid value.
    """

    z: float
    censored: bool
    start_sign: str
    crossing: float | None = None


@dataclass
class RecordSet:
    """Columnar collection of first-zero records.

    ``k`` holds grid indices; ``z = k * delta``.  ``crossing`` holds the
    interpolated zero times (``None`` when not recorded).
    """

    k: np.ndarray
    censored: np.ndarray
    start_nonneg: np.ndarray
    series_id: np.ndarray
    delta: float
    L: int
    crossing: np.ndarray | None = None

    @property
    def z(self) -> np.ndarray:
        return self.k * self.delta

    def __len__(self):
        return self.k.size

    def __iter__(self):
        cross = self.crossing if self.crossing is not None else [None] * len(self)
        for k, c, s, x in zip(self.k, self.censored, self.start_nonneg, cross):
            yield FirstZeroRecord(float(k * self.delta), bool(c),
                                  "nonnegative" if s else "negative",
                                  None if x is None else float(x))

    def select(self, mask) -> "RecordSet":
        return RecordSet(self.k[mask], self.censored[mask], self.start_nonneg[mask],
                         self.series_id[mask], self.delta, self.L,
                         None if self.crossing is None else self.crossing[mask])

    def by_series(self) -> list:
        ids = np.unique(self.series_id)
        return [self.select(self.series_id == s) for s in ids]

    @property
    def n_censored(self) -> int:
        return int(self.censored.sum())

    @property
    def n_negative_start(self) -> int:
        return int((~self.start_nonneg).sum())

    @classmethod
    def concat(cls, parts) -> "RecordSet":
        parts = list(parts)
        if not parts:
            raise ValidationError("nothing to concatenate")
        # merge in series order so the result does not depend on input order
        parts.sort(key=lambda p: (int(p.series_id[0]) if len(p) else -1))
        has_cross = all(p.crossing is not None for p in parts)
        return cls(
            np.concatenate([p.k for p in parts]),
            np.concatenate([p.censored for p in parts]),
            np.concatenate([p.start_nonneg for p in parts]),
            np.concatenate([p.series_id for p in parts]),
            parts[0].delta,
            parts[0].L,
            np.concatenate([p.crossing for p in parts]) if has_cross else None,
        )


def first_zero_batch(table: CoeffTable, seed, stream_id, first_path, n_paths,
                     block=BLOCK_STEPS, return_crossing=False):
    """First nonnegative grid index for ``n_paths`` consecutive paths.

    Returns ``(k, censored, start_nonneg)`` arrays, plus the linearly
    interpolated crossing time when ``return_crossing`` is set.  Surviving
    paths are advanced ``block`` rows at a time with one matrix product per
    block; paths are dropped as soon as they reach ``x >= 0``.
    """
    A = table.a
    L = table.L
    if L + 1 > PATH_STRIDE:
        raise ValidationError("grid longer than the per-path stream block")
    base = (np.arange(n_paths, dtype=np.uint64) + np.uint64(first_path)) * np.uint64(PATH_STRIDE)

    eps0 = gaussian_at(seed, stream_id, base)
    x0 = A[0, 0] * eps0
    kstop = np.zeros(n_paths, dtype=np.int64)
    censored = np.zeros(n_paths, dtype=bool)
    start_nonneg = x0 >= 0
    frac = np.zeros(n_paths)

    active = np.flatnonzero(~start_nonneg)
    E = eps0[active, None]
    xlast = x0[active]
    k = 1
    while active.size and k <= L:
        k1 = min(k + block, L + 1)
        cols = np.arange(k, k1, dtype=np.uint64)
        new = gaussian_at(seed, stream_id, base[active, None] + cols[None, :])
        E = np.concatenate((E, new), axis=1)
        X = E @ A[k:k1, :k1].T
        hit = X >= 0
        done = hit.any(axis=1)
        if done.any():
            j = hit[done].argmax(axis=1)
            kstop[active[done]] = k + j
            if return_crossing:
                Xd = X[done]
                rows = np.arange(Xd.shape[0])
                after = Xd[rows, j]
                before = np.where(j > 0, Xd[rows, np.maximum(j - 1, 0)], xlast[done])
                frac[active[done]] = before / (before - after)
            keep = ~done
            active = active[keep]
            E = E[keep]
            X = X[keep]
        xlast = X[:, -1]
        k = k1
    kstop[active] = L
    censored[active] = True
    if return_crossing:
        cross = (kstop - 1 + frac) * table.delta
        cross[start_nonneg] = 0.0
        cross[censored] = L * table.delta
        return kstop, censored, start_nonneg, cross
    return kstop, censored, start_nonneg


def synthesize_first_zero(table: CoeffTable, stream: NoiseStream) -> FirstZeroRecord:
    """Simulate one path up to its first zero; advances ``stream`` to the next path.

    The stream position must be a multiple of ``PATH_STRIDE``; the path
    index is ``position // PATH_STRIDE``.
    """
    if stream.position % PATH_STRIDE:
        raise ValidationError("stream position must be aligned to PATH_STRIDE")
    k, c, s, x = first_zero_batch(table, stream.seed, stream.stream_id,
                                  stream.position // PATH_STRIDE, 1, return_crossing=True)
    stream.skip(PATH_STRIDE)
    return FirstZeroRecord(float(k[0] * table.delta), bool(c[0]),
                           "nonnegative" if s[0] else "negative", float(x[0]))


def full_paths(table: CoeffTable, seed, stream_id, first_path, n_paths) -> np.ndarray:
    """Complete paths ``x(0..L delta)``, shape ``(n_paths, L + 1)``."""
    pos = (np.uint64(first_path) + np.arange(n_paths, dtype=np.uint64))[:, None] * np.uint64(PATH_STRIDE)
    eps = gaussian_at(seed, stream_id, pos + np.arange(table.L + 1, dtype=np.uint64)[None, :])
    return eps @ table.a.T


def synthesize_full_path(table: CoeffTable, stream: NoiseStream) -> np.ndarray:
    """One complete path without early stopping; advances ``stream`` to the next path."""
    if stream.position % PATH_STRIDE:
        raise ValidationError("stream position must be aligned to PATH_STRIDE")
    x = full_paths(table, stream.seed, stream.stream_id, stream.position // PATH_STRIDE, 1)[0]
    stream.skip(PATH_STRIDE)
    return x


def sign_change_spacing(paths, delta):
    """Mean distance between sign changes over a batch of paths.

    Returns ``(mean_spacing, n_changes)``.
    """
    paths = np.atleast_2d(paths)
    s = np.signbit(paths)
    n = int((s[:, 1:] != s[:, :-1]).sum())
    total = paths.shape[0] * (paths.shape[1] - 1) * delta
    return (total / n if n else math.inf), n


def simulate_series(table: CoeffTable, seed, series_id, n_paths, batch=BATCH_PATHS) -> RecordSet:
    """All first-zero records of one series (stream ``series_id``).

    Grid indices do not depend on ``batch``; the interpolated crossings can
    differ in the last bit between batch sizes because the matrix products
    change shape.  For a fixed ``batch`` the output is bit-reproducible.
    """
    parts = [
        first_zero_batch(table, seed, series_id, start, min(batch, n_paths - start),
                         return_crossing=True)
        for start in range(0, n_paths, batch)
    ]
    if parts:
        k, c, s, x = (np.concatenate(col) for col in zip(*parts))
    else:
        k, c, s, x = (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=bool),
                      np.zeros(0, dtype=bool), np.zeros(0))
    return RecordSet(k, c, s, np.full(k.size, series_id, dtype=np.uint32),
                     table.delta, table.L, x)


def _series_job(args):
    table, seed, sid, n = args
    return simulate_series(table, seed, sid, n)


def series_sizes(n_total, series) -> list:
    """Paths per series; sizes differ by at most one when ``series`` does not divide ``n_total``."""
    if series < 1 or n_total < series:
        raise ValidationError("need 1 <= series <= n_total")
    q, r = divmod(int(n_total), int(series))
    return [q + (1 if s < r else 0) for s in range(series)]


def run_series(table: CoeffTable, seed, n_total, series, workers=1) -> list:
    """Simulate ``n_total`` paths split into ``series`` series.

    Series ``s`` always uses stream ``s``; ``workers`` only changes how the
    series are scheduled, never the records.
    """
    jobs = [(table, seed, s, n) for s, n in enumerate(series_sizes(n_total, series))]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_series_job, jobs))
    else:
        out = [_series_job(j) for j in jobs]
    return out


# -- direct-time IFBM -------------------------------------------------------


@dataclass
class DirectPath:
    """IFBM sampled at ``times = T/steps * (1..steps)``; ``IFBM(0) = 0`` is implicit.

    ``values`` has shape ``(steps,)`` or ``(n_paths, steps)``.
    """

    times: np.ndarray
    values: np.ndarray
    H: float

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def step(self) -> float:
        return float(self.times[0])


@dataclass
class PathStatistics:
    """Maximum ``M``, its first location ``G`` and occupation time ``A`` above 0."""

    M: np.ndarray
    G: np.ndarray
    A: np.ndarray


def direct_ifbm_paths(H, T, steps, stream: NoiseStream, n_paths=1) -> DirectPath:
    """Exact IFBM samples on a uniform grid by dense Cholesky factorization.

    The fBm has unit structure-function scale.  Each path consumes
    ``steps`` stream positions.
    """
    H = check_hurst(H)
    steps = int(steps)
    if not (1 <= steps <= DIRECT_MAX_STEPS):
        raise ValidationError(f"steps must lie in [1, {DIRECT_MAX_STEPS}]")
    if not T > 0:
        raise ValidationError("T must be positive")
    times = T / steps * np.arange(1, steps + 1)
    C = ifbm_covariance(H, times[:, None], times[None, :])
    try:
        Lc = np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        raise NonPositiveDefinite(-1) from None
    d = np.diag(Lc)
    if not np.all(np.isfinite(d) & (d > 0)):
        bad = int(np.argmin(np.where(np.isfinite(d), d, -np.inf)))
        raise NonPositiveDefinite(bad, float(d[bad] ** 2))
    eps = stream.normals(steps * n_paths).reshape(n_paths, steps)
    values = eps @ Lc.T
    if n_paths == 1:
        values = values[0]
    return DirectPath(times, values, H)


def path_statistics(path: DirectPath) -> PathStatistics:
    """Statistics of a direct path including the origin ``(0, 0)``.

    ``G`` is the first time the maximum is attained and ``A`` is ``step``
    times the number of grid points with ``x > 0``.
    """
    v = np.atleast_2d(path.values)
    if v.shape[1] == 0:
        raise ValidationError("empty path")
    full = np.concatenate((np.zeros((v.shape[0], 1)), v), axis=1)
    t = np.concatenate(([0.0], path.times))
    idx = full.argmax(axis=1)
    M = full[np.arange(v.shape[0]), idx]
    G = t[idx]
    A = path.step * (v > 0).sum(axis=1)
    if np.ndim(path.values) == 1:
        return PathStatistics(M[0], G[0], A[0])
    return PathStatistics(M, G, A)


# -- survival ---------------------------------------------------------------


@dataclass
class SurvivalCurve:
    """Step estimate of ``P(Z > t | x(0) < 0)`` at the grid times ``t``."""

    t: np.ndarray
    p: np.ndarray
    se: np.ndarray
    n: int
    n_total: int
    n_censored: int

    @property
    def start_negative_fraction(self) -> float:
        return self.n / self.n_total if self.n_total else math.nan

    def neg_log(self):
        with np.errstate(divide="ignore"):
            return -np.log(self.p)

    def loglinear_fit(self, lo, hi):
        """Least-squares ``ln p = intercept - slope t`` over ``lo <= t < hi``."""
        m = (self.t >= lo) & (self.t < hi) & (self.p > 0)
        if m.sum() < 2:
            raise ValidationError("fewer than two survival points in range")
        slope, intercept = np.polyfit(self.t[m], np.log(self.p[m]), 1)
        return -float(slope), float(intercept)


def survival_estimate(records) -> SurvivalCurve:
    """Empirical survival function of the first zero, given a negative start.

    Censored paths stay at risk until ``L delta``; since all censoring
    happens there the estimate is the plain fraction ``#{z > t} / n``.
    """
    if not isinstance(records, RecordSet):
        records = list(records)
        if not records:
            raise ValidationError("no records")
        z = np.array([r.z for r in records])
        c = np.array([r.censored for r in records])
        neg = np.array([r.start_sign == "negative" for r in records])
        n_total = len(records)
    else:
        z, c, neg = records.z, records.censored, ~records.start_nonneg
        n_total = len(records)
    zc, cc = z[neg], c[neg]
    n = zc.size
    if n == 0 or np.all(cc):
        raise ValidationError("need at least one uncensored record with negative start")
    last = zc[~cc].max()
    t = np.unique(np.concatenate(([0.0], zc[~cc])))
    t = t[t <= last]
    zs = np.sort(zc)
    # number of records with z > t
    greater = n - np.searchsorted(zs, t, side="right")
    p = greater / n
    se = np.sqrt(p * (1.0 - p) / n)
    return SurvivalCurve(t, p, se, n, n_total, int(cc.sum()))


# -- records file -----------------------------------------------------------

RECORDS_MAGIC = b"IFBMREC1"


def write_records(path, records: RecordSet, meta: dict) -> Path:
    """Write a columnar records file (layout in ``docs/formats.md``)."""
    path = Path(path)
    columns = ["z:<f8", "censored:u1", "start_sign:i1", "series_id:<u4"]
    if records.crossing is not None:
        columns.append("crossing:<f8")
    header = dict(meta)
    header.update({"n_records": len(records), "delta": records.delta, "L": records.L,
                   "columns": columns})
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    sign = np.where(records.start_nonneg, 1, -1).astype("i1")
    chunks = [
        RECORDS_MAGIC,
        np.array([len(hb)], dtype="<u4").tobytes(),
        hb,
        records.z.astype("<f8").tobytes(),
        records.censored.astype("u1").tobytes(),
        sign.tobytes(),
        records.series_id.astype("<u4").tobytes(),
    ]
    if records.crossing is not None:
        chunks.append(records.crossing.astype("<f8").tobytes())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(chunks))
    return path


def read_records(path):
    """Return ``(RecordSet, header)`` from a records file."""
    raw = Path(path).read_bytes()
    if raw[:8] != RECORDS_MAGIC:
        raise ValidationError(f"{path}: not a records file")
    hl = int(np.frombuffer(raw, "<u4", 1, 8)[0])
    header = json.loads(raw[12 : 12 + hl])
    n = header["n_records"]
    cols = {}
    off = 12 + hl
    for spec in header["columns"]:
        name, dt = spec.split(":")
        arr = np.frombuffer(raw, dt, n, off)
        cols[name] = arr.copy()
        off += arr.nbytes
    if off != len(raw):
        raise ValidationError(f"{path}: payload size mismatch")
    delta = header["delta"]
    k = np.rint(cols["z"] / delta).astype(np.int64)
    rs = RecordSet(k, cols["censored"].astype(bool), cols["start_sign"] > 0,
                   cols["series_id"], delta, header["L"], cols.get("crossing"))
    return rs, header
