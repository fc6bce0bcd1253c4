"""``catsim`` command line.

Exit codes: 0 success, 1 configuration or I/O error, 2 numerical or
cutoff failure, 3 fit did not converge (result still written), 4 oracle
comparison exceeded its gate.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .fitting import FitResult, fit
from .harness import (
    ScanKind,
    ScanPointError,
    ScanResult,
    compare_oracle,
    export,
    load_result,
    run_scan,
)
from .oracle import IntegratorError
from .plotting import line_plot
from .quantum import CutoffError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_FIT, EXIT_GATE = 0, 1, 2, 3, 4

_SCAN_COMMANDS = {
    "timescan": ScanKind.TIME,
    "freqscan": ScanKind.DETUNING,
    "phasescan": ScanKind.PHASE,
}
_AXES = {
    ScanKind.TIME: ("force duration (us)", 1e6),
    ScanKind.DETUNING: ("detuning / 2pi (kHz)", 1e-3 / (2 * math.pi)),
    ScanKind.PHASE: ("analysis phase (rad)", 1.0),
}


class _NumericalError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"catsim: error: {msg}", file=sys.stderr)


def _write_all(out_dir: Path, files: dict) -> list[Path]:
    """Write every file only after all content exists, so failures leave nothing behind."""
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, data in files.items():
            path = out_dir / name
            path.write_bytes(data)
            paths.append(path)
    except OSError as exc:
        raise OSError(f"cannot write output to {out_dir}: {exc.strerror or exc}") from exc
    return paths


def scan_plot(result: ScanResult) -> str:
    label, scale = _AXES[result.kind]
    x = result.swept * scale
    return line_plot(
        x,
        [("model", result.model, "line"), ("estimate", result.estimate, "points")],
        xlabel=label,
        ylabel="P(down)",
        title=result.kind.value,
    )


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, shots=args.shots, out=args.out, engine=args.engine)


def cmd_scan(args) -> int:
    expected = _SCAN_COMMANDS[args.command]
    cfg = _load(args)
    if cfg.scan is None:
        raise ConfigError(f"{args.config}: no [scan] section")
    if cfg.scan.kind is not expected:
        raise ConfigError(f"{args.config}: [scan] kind is {cfg.scan.kind.value}, but '{args.command}' runs a {expected.value}")
    try:
        result = run_scan(cfg.scan)
    except (ScanPointError, CutoffError, IntegratorError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise _NumericalError(str(exc)) from exc
    stem = f"{result.kind.value}_{cfg.seed}"
    files = {f"{stem}.{fmt}": export(result, fmt) for fmt in cfg.formats}
    if cfg.plot:
        files[f"{stem}.svg"] = scan_plot(result).encode()
    for path in _write_all(cfg.out, files):
        print(path)
    return EXIT_OK


def cmd_compare_oracle(args) -> int:
    cfg = _load(args)
    if cfg.oracle is None:
        raise ConfigError(f"{args.config}: no [oracle] section")
    grid = cfg.oracle
    try:
        cmp = compare_oracle(cfg.force, cfg.trap, grid.deltas, grid.taus, grid.accuracy)
    except (ScanPointError, CutoffError, IntegratorError, FloatingPointError) as exc:
        raise _NumericalError(str(exc)) from exc
    diff = cmp.abs_diff
    summary = {
        "points": int(diff.size),
        "max_abs_diff": float(diff.max()),
        "mean_abs_diff": float(diff.mean()),
        "gate": grid.gate,
        "passed": bool(diff.max() <= grid.gate),
        "nbar": cfg.trap.nbar,
        "nbar_dot": cfg.trap.nbar_dot,
        "omega_sb": cfg.force.omega_sb,
    }
    stem = f"compare_{cfg.seed}"
    files = {
        f"{stem}.csv": cmp.to_csv(),
        f"{stem}.json": (json.dumps(summary, indent=1) + "\n").encode(),
    }
    paths = _write_all(cfg.out, files)
    print(f"{'delta/2pi (kHz)':>16} {'tau (us)':>10} {'closed':>12} {'oracle':>12} {'|dP|':>10}")
    for d, t, c, o, e in zip(cmp.deltas, cmp.taus, cmp.closed, cmp.oracle, diff):
        print(f"{d / (2e3 * math.pi):16.4f} {t * 1e6:10.2f} {c:12.8f} {o:12.8f} {e:10.2e}")
    print(f"max |dP| = {summary['max_abs_diff']:.3e}, mean |dP| = {summary['mean_abs_diff']:.3e}, gate = {grid.gate:g}")
    for path in paths:
        print(path)
    if not summary["passed"]:
        _err(f"max |dP| {summary['max_abs_diff']:.3e} exceeds gate {grid.gate:g}")
        return EXIT_GATE
    return EXIT_OK


def _print_fit(res: FitResult) -> None:
    print(f"{'parameter':>16} {'value':>16} {'sigma':>12}  status")
    for name, value in res.values.items():
        status = "free" if name in res.free else "fixed"
        sig = res.uncertainties.get(name, math.nan)
        print(f"{name:>16} {value:16.8g} {sig:12.4g}  {status}")
    print(f"residual norm = {res.residual_norm:.6g}, iterations = {res.iterations}, converged = {res.converged}")
    if res.message:
        print(res.message)


def cmd_fit(args) -> int:
    cfg = _load(args)
    data_path = Path(args.data)
    kind = cfg.fit_model
    try:
        data = load_result(data_path, kind)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load data {data_path}: {exc}") from exc
    spec = cfg.fit_spec(data.kind)
    try:
        res = fit(data, spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out_dir = Path(args.out) if args.out is not None else cfg.out
    paths = _write_all(out_dir, {f"{data_path.stem}_fit.json": res.to_json().encode()})
    _print_fit(res)
    for path in paths:
        print(path)
    if not res.converged:
        _err("fit did not converge; values written with converged = false")
        return EXIT_FIT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="catsim", description="Bichromatic-force cat-state simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--seed", type=int, help="override [run] seed")
        p.add_argument("--shots", type=int, help="override [scan] shots (0 = model only)")
        p.add_argument("--out", help="override [run] out directory")
        p.add_argument("--engine", choices=("closed", "oracle"), help="override [run] engine")

    for name, kind in _SCAN_COMMANDS.items():
        common(sub.add_parser(name, help=f"run a {kind.value}"))
    common(sub.add_parser("compare-oracle", help="closed form vs Lindblad oracle on a grid"))
    p = sub.add_parser("fit", help="fit a model to scan data")
    p.add_argument("data", help="scan result (.json, or .csv named <kind>_<seed>.csv)")
    common(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"compare-oracle": cmd_compare_oracle, "fit": cmd_fit}
    handler = handlers.get(args.command, cmd_scan)
    try:
        return handler(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except _NumericalError as exc:
        _err(str(exc))
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
