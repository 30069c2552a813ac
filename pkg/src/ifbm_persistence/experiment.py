"""End-to-end experiments: coefficient caching, simulation campaigns,
estimation and the data behind the published figures and table.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InsufficientData, ValidationError
from .estimate import (
    PowerModel,
    _window_values,
    aggregate_series,
    expected_slope_power_model,
    ml_slope,
    pooled_slope,
    tail_window,
)
from .model import GridSpec, check_hurst, make_grid
from .simulate import RecordSet, run_series, survival_estimate, write_records
from .toeplitz import (
    PRECISION_MODES,
    CoeffTable,
    correlation_samples,
    load_table,
    save_table,
    schur_coefficients,
)

__all__ = [
    "CACHE_ENV",
    "ExperimentConfig",
    "ExperimentReport",
    "default_cache_dir",
    "cache_path",
    "get_table",
    "estimate_windows",
    "run_experiment",
    "reproduce",
    "REPRODUCE_TARGETS",
]

CACHE_ENV = "IFBM_PERSISTENCE_CACHE"
H_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
PAPER_WINDOWS = (0.01, 0.003, 0.001)


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "ifbm_persistence"


@dataclass
class ExperimentConfig:
    """Everything needed to rerun a simulation campaign bit for bit."""

    H: float
    N_total: int
    series: int = 16
    seed: int = 1
    n0: int = 50
    eps_L: float = 1e-4
    windows: tuple = PAPER_WINDOWS
    precision_mode: str = "standard"
    alpha_hypothesis: float | None = None
    use_crossing: bool = True
    estimation: str = "serial"

    def __post_init__(self):
        self.H = check_hurst(self.H)
        self.windows = tuple(float(e) for e in self.windows)
        self.validate()

    def validate(self):
        if int(self.N_total) != self.N_total or self.N_total < 1:
            raise ValidationError("N_total must be a positive integer")
        if int(self.series) != self.series or self.series < 1:
            raise ValidationError("series must be a positive integer")
        if self.N_total % self.series:
            raise ValidationError("N_total must be divisible by series")
        if int(self.n0) != self.n0 or self.n0 < 2:
            raise ValidationError("n0 must be an integer >= 2")
        if not (0.0 < self.eps_L < 1.0):
            raise ValidationError("eps_L must lie in (0, 1)")
        for e in self.windows:
            if not (0.0 < e < 1.0):
                raise ValidationError(f"window eps must lie in (0, 1), got {e}")
            # the window ends at Z_{eps/10}, which lies inside the grid
            # whenever eps >= 10 eps_L
            if e < 10.0 * self.eps_L * (1.0 - 1e-12):
                raise ValidationError(
                    f"window eps={e} needs eps >= 10*eps_L={10 * self.eps_L:g}; "
                    "lower --epsL so the window ends inside the grid"
                )
        if self.precision_mode not in PRECISION_MODES:
            raise ValidationError(f"precision must be one of {PRECISION_MODES}")
        if self.estimation not in ("serial", "pooled"):
            raise ValidationError("estimation must be 'serial' or 'pooled'")
        if self.estimation == "serial" and self.series < 2:
            raise ValidationError("serial estimation needs at least two series")

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["windows"] = list(self.windows)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ExperimentReport:
    config: dict
    grid: dict
    estimates: dict
    survival: dict
    censored: int
    n_negative_start: int
    stability: dict
    expected: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    code_version: str = __version__
    config_hash: str = ""

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, **kw)


def cache_path(cache_dir, grid: GridSpec, precision_mode) -> Path:
    name = f"coeffs_H{grid.H:.6g}_n0{grid.n0}_epsL{grid.eps_L:.6g}_{precision_mode}.bin"
    return Path(cache_dir) / name


def get_table(grid: GridSpec, precision_mode="standard", cache_dir=None):
    """Load the coefficient table from cache or compute and store it.

    Returns ``(table, cache_hit)``.  ``cache_dir=None`` disables caching.
    """
    if cache_dir is not None:
        path = cache_path(cache_dir, grid, precision_mode)
        if path.exists():
            table = load_table(path)
            if table.L == grid.L and math.isclose(table.delta, grid.delta, rel_tol=1e-15):
                return table, True
    table = schur_coefficients(correlation_samples(grid, precision_mode), precision_mode)
    if cache_dir is not None:
        save_table(path, table)
    return table, False


def estimate_windows(parts, H, windows, estimation="serial", use_crossing=True) -> dict:
    """Slope estimates keyed by window ``eps`` (as a string)."""
    out = {}
    for eps in windows:
        w = tail_window(H, eps)
        if estimation == "serial":
            est = aggregate_series([ml_slope(p, w, use_crossing) for p in parts])
        else:
            est = pooled_slope(parts, w, use_crossing)
        out[f"{eps:g}"] = est
    return out


def _survival_summary(curve, H, max_points=400):
    step = max(1, curve.t.size // max_points)
    t = curve.t[::step]
    p = curve.p[::step]
    theta0 = H * (1.0 - H)
    try:
        lo = -math.log(0.1) / theta0
        slope, intercept = curve.loglinear_fit(lo, lo + math.log(10.0) / theta0)
    except ValidationError:
        slope = intercept = None
    return {
        "n": curve.n,
        "start_negative_fraction": curve.start_negative_fraction,
        "loglinear_slope_eps0.1": slope,
        "loglinear_intercept_eps0.1": intercept,
        "t": t.tolist(),
        "p": p.tolist(),
    }


def run_experiment(config: ExperimentConfig, cache_dir=None, records_path=None,
                   workers=1, table: CoeffTable | None = None):
    """Run a campaign; returns ``(report, records)``."""
    t0 = time.perf_counter()
    grid = make_grid(config.H, config.n0, config.eps_L)
    hit = None
    if table is None:
        table, hit = get_table(grid, config.precision_mode, cache_dir)
    t1 = time.perf_counter()
    parts = run_series(table, config.seed, config.N_total, config.series, workers)
    t2 = time.perf_counter()
    records = RecordSet.concat(parts)
    estimates = estimate_windows(parts, config.H, config.windows, config.estimation,
                                 config.use_crossing)
    expected = {}
    if config.alpha_hypothesis is not None:
        pm = PowerModel(config.H * (1.0 - config.H), config.alpha_hypothesis)
        for key, est in estimates.items():
            expected[key] = expected_slope_power_model(pm, est.window)
    curve = survival_estimate(records)
    report = ExperimentReport(
        config=config.as_dict(),
        grid={"L": grid.L, "delta": grid.delta, "horizon": grid.horizon,
              "delta0": grid.delta0},
        estimates={k: v.as_dict() for k, v in estimates.items()},
        survival=_survival_summary(curve, config.H),
        censored=records.n_censored,
        n_negative_start=records.n_negative_start,
        stability=table.diagnostics.as_dict() if table.diagnostics else {},
        expected=expected,
        metrics={
            "factorization_seconds": t1 - t0,
            "simulation_seconds": t2 - t1,
            "paths_per_second": config.N_total / max(t2 - t1, 1e-12),
            "cache_hit": hit,
            "workers": workers,
        },
        config_hash=config.config_hash(),
    )
    if records_path is not None:
        write_records(records_path, records, {
            "H": config.H, "n0": config.n0, "eps_L": config.eps_L, "seed": config.seed,
            "series": config.series, "windows": list(config.windows),
            "code_version": __version__,
            "config_hash": config.config_hash(),
        })
    return report, records


# -- figure and table data ---------------------------------------------------

REPRODUCE_TARGETS = ("fig1", "fig2", "fig3", "fig4", "table1")

# path counts of the published experiments
PAPER_N = {
    "fig1": 100_000,
    "fig2": 16 * 300_000,
    "fig3": 25 * 300_000,
    "fig4": 25 * 300_000,
}
PAPER_SERIES = {"fig1": 1, "fig2": 16, "fig3": 25, "fig4": 25}
TABLE1_LAYOUT = {30: 120, 100: 90}  # n0 -> number of series of 10**6 paths
TABLE1_WINDOWS = (0.1, 0.01, 0.001)


def _csv_text(meta: dict, header, rows) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v if v is not None else ""


def _scaled(n_paper, scale):
    if not (0.0 < scale <= 1.0):
        raise ValidationError("scale must lie in (0, 1]")
    return max(1, int(round(scale * n_paper)))


def _require(parts, H, windows, n_total, series):
    # the left window edge is roughly the (1 - eps) quantile of Z and only
    # about half the paths start below zero
    for eps in windows:
        w = tail_window(H, eps)
        counts = [_window_values(p, w, True).size for p in parts]
        if min(counts) < 2:
            need = int(math.ceil(2 * series * 2 / eps))
            raise InsufficientData(
                f"H={H}, eps={eps}: a series has {min(counts)} in-window observations "
                f"with N={n_total}; need roughly N >= {need} (N_eps ~ N*eps/2)"
            )


def _campaign(H, n0, eps_L, n_total, series, seed, windows, cache_dir, workers):
    grid = make_grid(H, n0, eps_L)
    table, _ = get_table(grid, "standard", cache_dir)
    parts = run_series(table, seed, n_total, series, workers)
    _require(parts, H, windows, n_total, series)
    return grid, table, parts


def reproduce(target, scale=1.0, seed=1, out_dir=".", cache_dir=None, workers=1,
              H_values=H_GRID, progress=None):
    """Write the data behind one figure or Table 1; returns the written paths.

    ``scale`` multiplies the published number of paths.  Window geometry is
    never scaled.
    """
    if target not in REPRODUCE_TARGETS:
        raise ValidationError(f"target must be one of {REPRODUCE_TARGETS}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    say = progress or (lambda msg: None)
    meta = {"code_version": __version__, "seed": seed, "scale": scale, "target": target,
            "sigma_inflation": scale ** -0.5}
    if target == "table1":
        return _reproduce_table1(scale, seed, out_dir, cache_dir, workers, meta, say)

    n_total = _scaled(PAPER_N[target], scale)
    series = min(PAPER_SERIES[target], n_total)
    meta.update({"N": n_total, "series": series, "n0": 50})
    written = []
    if target == "fig1":
        rows, summary = [], []
        for H in H_values:
            say(f"fig1: H={H}")
            grid, table, parts = _campaign(H, 50, 1e-4, n_total, series, seed, (), cache_dir, workers)
            curve = survival_estimate(RecordSet.concat(parts))
            for t, p, se in zip(curve.t, curve.p, curve.se):
                if p > 0:
                    rows.append((H, float(t), float(-math.log(p)), float(se / p), H * (1 - H) * float(t)))
            summary.append(curve.start_negative_fraction)
        meta["config_hash"] = _hash(meta)
        text = _csv_text(meta, ["H", "t", "neg_log_survival", "se_neg_log", "hypothesis_line"], rows)
        written.append(_write(out_dir / "fig1.csv", text))
        return written

    eps_list = PAPER_WINDOWS if target == "fig2" else (0.01,)
    results = {}
    for H in H_values:
        say(f"{target}: H={H}")
        grid, table, parts = _campaign(H, 50, 1e-4, n_total, series, seed, eps_list,
                                       cache_dir, workers)
        results[H] = estimate_windows(parts, H, eps_list)
    meta["config_hash"] = _hash(meta)
    if target == "fig2":
        rows = []
        for H, ests in results.items():
            for key, e in ests.items():
                rows.append((H, float(key), e.theta_hat, e.sigma_theoretical,
                             e.sigma_empirical, H * (1 - H), e.n_obs))
        text = _csv_text(meta, ["H", "eps", "theta_hat", "sigma_theoretical",
                                "sigma_empirical", "theta0", "n_obs"], rows)
        written.append(_write(out_dir / "fig2.csv", text))
    else:
        rows3, rows4 = [], []
        for H, ests in results.items():
            e = ests["0.01"]
            tilde = expected_slope_power_model(PowerModel(H * (1 - H), H - 0.5), e.window)
            rows3.append((H, e.theta_hat, e.sigma_theoretical, e.theta_hat - e.sigma_theoretical,
                          e.theta_hat + e.sigma_theoretical, H * (1 - H), tilde))
            s = e.sigma_empirical
            rows4.append((H, tilde - e.theta_hat, s, -s, s, -2 * s, 2 * s))
        if target == "fig3":
            text = _csv_text(meta, ["H", "theta_hat", "sigma_theoretical", "lower", "upper",
                                    "theta0", "theta_tilde"], rows3)
            written.append(_write(out_dir / "fig3.csv", text))
        else:
            text = _csv_text(meta, ["H", "R", "sigma_empirical", "minus_1sigma", "plus_1sigma",
                                    "minus_2sigma", "plus_2sigma"], rows4)
            written.append(_write(out_dir / "fig4.csv", text))
    return written


def _reproduce_table1(scale, seed, out_dir, cache_dir, workers, meta, say):
    H = 0.7
    rows, records = [], []
    layout = {}
    for n0, r in TABLE1_LAYOUT.items():
        n_total = _scaled(r * 1_000_000, scale)
        series = min(r, n_total)
        layout[n0] = {"N": n_total, "series": series}
        say(f"table1: n0={n0}, N={n_total}")
        grid, table, parts = _campaign(H, n0, 1e-4, n_total, series, seed, TABLE1_WINDOWS,
                                       cache_dir, workers)
        ests = estimate_windows(parts, H, TABLE1_WINDOWS)
        for key, e in ests.items():
            rows.append((n0, float(key), e.theta_hat, e.sigma_empirical, e.sigma_theoretical))
            records.append({"H": H, "n0": n0, "seed": seed, "window_eps": float(key),
                            **e.as_dict()})
    meta.update({"H": H, "eps_L": 1e-4, "layout": {str(k): v for k, v in layout.items()}})
    meta["config_hash"] = _hash(meta)
    text = _csv_text(meta, ["n0", "eps", "theta_hat", "sigma_empirical", "sigma_theoretical"], rows)
    js = json.dumps({"meta": meta, "estimates": records}, sort_keys=True, indent=1)
    return [_write(out_dir / "table1.csv", text), _write(out_dir / "table1.json", js + "\n")]


def _hash(meta):
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path
