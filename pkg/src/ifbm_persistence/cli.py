"""Command line interface: ``ifbm-persistence {coeffs,simulate,estimate,reproduce}``.

Settings come from an optional JSON file (``--config``) overridden by
flags.  Exit codes: 0 success, 2 validation error, 3 numerical failure,
4 insufficient data.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import InsufficientData, NumericalError, PrecisionExhausted, ValidationError
from .estimate import PowerModel, expected_slope_power_model
from .experiment import (
    CACHE_ENV,
    REPRODUCE_TARGETS,
    ExperimentConfig,
    default_cache_dir,
    estimate_windows,
    get_table,
    reproduce,
    run_experiment,
)
from .model import make_grid
from .simulate import read_records

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_INSUFFICIENT = 4

# flag dest -> ExperimentConfig field
_FLAG_FIELDS = {
    "H": "H",
    "n0": "n0",
    "epsL": "eps_L",
    "N": "N_total",
    "series": "series",
    "seed": "seed",
    "precision": "precision_mode",
    "window_eps": "windows",
    "alpha": "alpha_hypothesis",
    "estimation": "estimation",
}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which matches the validation code
    pass


def _eps_list(text):
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty window list")
    return tuple(vals)


def _common(p, need_sim=False):
    p.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    p.add_argument("--H", type=float, default=None, help="Hurst parameter in (0, 1)")
    p.add_argument("--n0", type=int, default=None, help="grid points per interzero distance")
    p.add_argument("--epsL", type=float, default=None, help="tail level sizing the grid horizon")
    p.add_argument("--precision", choices=("standard", "extended"), default=None)
    p.add_argument("--cache", type=Path, default=None,
                   help=f"coefficient cache directory (default ${CACHE_ENV} or ~/.cache)")
    p.add_argument("--no-cache", action="store_true", help="do not read or write the cache")
    if need_sim:
        p.add_argument("--N", type=int, default=None, help="total number of paths")
        p.add_argument("--series", type=int, default=None, help="number of independent series")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--window-eps", type=_eps_list, default=None, dest="window_eps",
                       help="window levels, e.g. '0.01,0.003,0.001'")
        p.add_argument("--alpha", type=float, default=None,
                       help="power correction for the expected-slope forward check")
        p.add_argument("--estimation", choices=("serial", "pooled"), default=None)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", type=Path, default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ifbm-persistence", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", help="compute or reuse the cached Schur coefficient table")
    _common(p)

    p = sub.add_parser("simulate", help="simulate first zeros and report slope estimates")
    _common(p, need_sim=True)

    p = sub.add_parser("estimate", help="estimate slopes from a records file")
    p.add_argument("records", type=Path, help="records file written by 'simulate'")
    p.add_argument("--window-eps", type=_eps_list, default=None, dest="window_eps")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--estimation", choices=("serial", "pooled"), default="serial")
    p.add_argument("--grid-z", action="store_true",
                   help="use grid first-zero times instead of interpolated crossings")

    p = sub.add_parser("reproduce", help="write the data behind a figure or Table 1")
    p.add_argument("target", choices=REPRODUCE_TARGETS)
    p.add_argument("--scale", type=float, default=1.0,
                   help="fraction of the published number of paths, in (0, 1]")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--cache", type=Path, default=None)
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--H", type=_eps_list, default=None, dest="H_values",
                   help="restrict the H grid, e.g. '0.3,0.5'")
    return parser


def _cache_dir(args):
    if getattr(args, "no_cache", False):
        return None
    return args.cache if args.cache is not None else default_cache_dir()


def effective_config(args, defaults=None) -> dict:
    """Merge defaults, the JSON config file and explicit flags (flags win)."""
    cfg = dict(defaults or {})
    if getattr(args, "config", None) is not None:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ValidationError("config file must hold a JSON object")
        cfg.update(loaded)
    for flag, name in _FLAG_FIELDS.items():
        val = getattr(args, flag, None)
        if val is not None:
            cfg[name] = val
    return cfg


def _emit(obj):
    json.dump(obj, sys.stdout, sort_keys=True, indent=1, default=_json_default)
    sys.stdout.write("\n")


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(type(o).__name__)


def cmd_coeffs(args) -> int:
    cfg = effective_config(args)
    if "H" not in cfg:
        raise ValidationError("--H is required")
    grid = make_grid(cfg["H"], cfg.get("n0", 50), cfg.get("eps_L", 1e-4))
    mode = cfg.get("precision_mode", "standard")
    cache = _cache_dir(args)
    table, hit = get_table(grid, mode, cache)
    print(f"H={grid.H:g} n0={grid.n0} delta={grid.delta:.6g} L={grid.L} "
          f"horizon={grid.horizon:.4f} precision={mode}")
    print(f"cache: {'hit' if hit else ('written' if cache is not None else 'disabled')}"
          + (f" ({cache})" if cache is not None else ""))
    print(table.diagnostics.summary())
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = effective_config(args, {"series": 16, "seed": 1})
    for req in ("H", "N_total"):
        if req not in cfg:
            raise ValidationError(f"--{'N' if req == 'N_total' else req} is required")
    config = ExperimentConfig.from_dict(cfg)
    out = args.out
    records_path = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        records_path = out / "records.bin"
    report, _ = run_experiment(config, _cache_dir(args), records_path, workers=args.workers)
    if out is not None:
        (out / "report.json").write_text(report.to_json(indent=1) + "\n")
    _emit(report.as_dict())
    return EXIT_OK


def cmd_estimate(args) -> int:
    records, header = read_records(args.records)
    H = header.get("H")
    if H is None:
        raise ValidationError("records header lacks H")
    windows = args.window_eps or tuple(header.get("windows", (0.01, 0.003, 0.001)))
    parts = records.by_series()
    ests = estimate_windows(parts, H, windows, args.estimation, not args.grid_z)
    out = {"header": {k: v for k, v in header.items() if k != "columns"},
           "estimates": {k: e.as_dict() for k, e in ests.items()}}
    if args.alpha is not None:
        pm = PowerModel(H * (1.0 - H), args.alpha)
        out["expected"] = {k: expected_slope_power_model(pm, e.window) for k, e in ests.items()}
    _emit(out)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    kw = {}
    if args.H_values is not None:
        kw["H_values"] = args.H_values
    paths = reproduce(args.target, args.scale, args.seed, args.out, _cache_dir(args),
                      args.workers, progress=lambda m: print(m, file=sys.stderr), **kw)
    for p in paths:
        print(p)
    return EXIT_OK


_COMMANDS = {
    "coeffs": cmd_coeffs,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PrecisionExhausted as exc:
        print(f"error: {exc}\nhint: rerun with --precision extended", file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalError as exc:
        hint = "" if getattr(args, "precision", None) == "extended" else \
            "\nhint: rerun with --precision extended"
        print(f"error: {exc}{hint}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InsufficientData as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT


if __name__ == "__main__":
    sys.exit(main())
