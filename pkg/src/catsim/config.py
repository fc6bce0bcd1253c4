"""INI run configuration with unit-suffixed keys.

Every physical value names its unit in the key (``omega_sb_khz``,
``tau_us``, ...). Frequencies given in kHz/MHz/GHz are cycle frequencies
and are converted to rad/s on load. Unknown sections or keys are errors.

Example::

    [run]
    seed = 3
    out = out/thermal_timescan

    [trap]
    nbar = 8.1
    nbar_dot_per_ms = 0

    [force]
    omega_sb_khz = 2.2
    delta_khz = -5.46

    [scan]
    kind = timescan
    start_us = 0
    stop_us = 400
    points = 161
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import constants as const
from .beams import BeamSetup, Constant, Geometry, RandomWalk, Sinusoid
from .dynamics import ForceParams
from .fitting import FitSpec, model_parameters
from .harness import Nuisance, ScanKind, ScanSpec
from .pulses import CLOSED, ORACLE
from .quantum import TrapConfig

KHZ = 2.0 * math.pi * 1e3


class ConfigError(ValueError):
    """Unreadable, malformed or inconsistent configuration."""


# key -> SI conversion factor
_TRAP_KEYS = {
    "mass_amu": ("mass", const.AMU),
    "omega_z_mhz": ("omega_z", 2.0 * math.pi * 1e6),
    "omega_hf_ghz": ("omega_hf", 2.0 * math.pi * 1e9),
    "nbar": ("nbar", 1.0),
    "nbar_dot_per_ms": ("nbar_dot", 1e3),
}
_FORCE_KEYS = {
    "omega_sb_khz": ("omega_sb", KHZ),
    "delta_khz": ("delta", KHZ),
    "phi_s_rad": ("phi_s", 1.0),
    "phi_m_rad": ("phi_m", 1.0),
    "tau_us": ("tau", 1e-6),
}
# fit-block keys use the same units as the trap/force blocks
_FIT_VALUE_KEYS = {
    "omega_sb_khz": ("omega_sb", KHZ),
    "delta_khz": ("delta", KHZ),
    "tau_us": ("tau", 1e-6),
    "nbar": ("nbar", 1.0),
    "nbar_dot_per_ms": ("nbar_dot", 1e3),
    "phi_s_rad": ("phi_s", 1.0),
    "contrast0": ("contrast0", 1.0),
    "contrast1": ("contrast1", 1.0),
    "baseline0": ("baseline0", 1.0),
    "baseline1": ("baseline1", 1.0),
    "detuning_drift_khz": ("detuning_drift", KHZ),
}
_SWEEP_UNITS = {
    ScanKind.TIME: ("us", 1e-6),
    ScanKind.DETUNING: ("khz", KHZ),
    ScanKind.PHASE: ("rad", 1.0),
}
_KIND_ALIASES = {
    "timescan": ScanKind.TIME,
    "detuningscan": ScanKind.DETUNING,
    "freqscan": ScanKind.DETUNING,
    "phasescan": ScanKind.PHASE,
}

_ALLOWED = {
    "run": {"seed", "out", "engine", "plot", "formats"},
    "trap": set(_TRAP_KEYS),
    "force": set(_FORCE_KEYS),
    "scan": {
        "kind", "points", "shots", "smoothing", "shot_period_ms", "stark_khz",
        "start_us", "stop_us", "start_khz", "stop_khz", "start_rad", "stop_rad",
    },
    "beam": {"geometry"},
    "drift": {"kind", "offset_rad", "amplitude_rad", "frequency_hz", "phase_rad", "diffusion_rad2_per_s", "seed"},
    "nuisance": {"detuning_drift_khz", "contrast_drift", "baseline_drift"},
    "oracle": {"delta_khz", "tau_us", "gate", "accuracy"},
    "fit": {"model", "free", "max_iter"}
    | set(_FIT_VALUE_KEYS)
    | {f"{k}_bounds" for k in _FIT_VALUE_KEYS},
}


@dataclass(frozen=True)
class OracleGrid:
    deltas: tuple  # rad/s
    taus: tuple  # s
    gate: float = 1e-6
    accuracy: float = 0.25


@dataclass(frozen=True)
class RunConfig:
    trap: TrapConfig
    force: ForceParams
    seed: int = 0
    out: Path = Path("out")
    engine: str = CLOSED
    plot: bool = True
    formats: tuple = ("csv", "json")
    scan: ScanSpec | None = None
    oracle: OracleGrid | None = None
    fit_values: dict = field(default_factory=dict)
    fit_free: tuple = ()
    fit_bounds: dict = field(default_factory=dict)
    fit_model: ScanKind | None = None
    fit_max_iter: int = 4000
    source: Path | None = None

    def with_overrides(self, seed=None, shots=None, out=None, engine=None) -> "RunConfig":
        """Apply command-line overrides; the scan is rebuilt so its own checks rerun."""
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if out is not None:
            cfg = replace(cfg, out=Path(out))
        if engine is not None:
            cfg = replace(cfg, engine=engine)
        if cfg.scan is not None:
            changes = {"seed": cfg.seed, "engine": cfg.engine}
            if shots is not None:
                changes["shots"] = shots
            try:
                cfg = replace(cfg, scan=replace(cfg.scan, **changes))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        elif shots is not None:
            raise ConfigError("--shots needs a [scan] section")
        return cfg

    def fit_spec(self, kind: ScanKind) -> FitSpec:
        """FitSpec for data of ``kind``; unset values fall back to the trap/force blocks."""
        kind = ScanKind(self.fit_model or kind)
        if self.fit_model is not None and ScanKind(self.fit_model) != ScanKind(kind):
            raise ConfigError(f"fit model {self.fit_model.value} does not match data kind {kind.value}")
        defaults = {
            "omega_sb": self.force.omega_sb,
            "delta": self.force.delta,
            "tau": self.force.tau,
            "phi_s": self.force.phi_s,
            "nbar": self.trap.nbar,
            "nbar_dot": self.trap.nbar_dot,
        }
        names = model_parameters(kind)
        values = {k: v for k, v in defaults.items() if k in names}
        values.update(self.fit_values)
        for name in self.fit_values:
            if name not in names:
                raise ConfigError(f"[fit] value for {name!r} is not a parameter of the {kind.value} model")
        try:
            return FitSpec(kind, values, self.fit_free, self.fit_bounds, self.fit_max_iter)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _float(sec, key):
    try:
        return sec.getfloat(key)
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] {key}: expected a number, got {sec[key]!r}") from exc


def _int(sec, key):
    try:
        return sec.getint(key)
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] {key}: expected an integer, got {sec[key]!r}") from exc


def _floats(sec, key):
    try:
        return tuple(float(v) for v in sec[key].replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] {key}: expected numbers, got {sec[key]!r}") from exc


def _converted(sec, table: dict) -> dict:
    return {table[k][0]: _float(sec, k) * table[k][1] for k in sec if k in table}


def _drift(sec):
    if sec is None:
        return Constant()
    kind = sec.get("kind", "constant").strip().lower()
    allowed = {
        "constant": {"offset_rad"},
        "sinusoid": {"amplitude_rad", "frequency_hz", "phase_rad"},
        "randomwalk": {"diffusion_rad2_per_s", "seed"},
    }
    if kind not in allowed:
        raise ConfigError(f"[drift] kind must be one of {sorted(allowed)}, got {kind!r}")
    extra = set(sec) - allowed[kind] - {"kind"}
    if extra:
        raise ConfigError(f"[drift] keys {sorted(extra)} do not apply to kind {kind!r}")
    if kind == "constant":
        return Constant(_float(sec, "offset_rad") if "offset_rad" in sec else 0.0)
    if kind == "sinusoid":
        return Sinusoid(
            _float(sec, "amplitude_rad") if "amplitude_rad" in sec else 0.0,
            _float(sec, "frequency_hz") if "frequency_hz" in sec else 1.0,
            _float(sec, "phase_rad") if "phase_rad" in sec else 0.0,
        )
    return RandomWalk(
        _float(sec, "diffusion_rad2_per_s") if "diffusion_rad2_per_s" in sec else 1.0,
        _int(sec, "seed") if "seed" in sec else 0,
    )


def _scan(sec, cp, force, trap, seed, engine) -> ScanSpec:
    if "kind" not in sec:
        raise ConfigError("[scan] kind is required")
    kind = _KIND_ALIASES.get(sec["kind"].strip().lower())
    if kind is None:
        raise ConfigError(f"[scan] unknown kind {sec['kind']!r}")
    unit, factor = _SWEEP_UNITS[kind]
    start_key, stop_key = f"start_{unit}", f"stop_{unit}"
    wrong = {k for k in sec if k.startswith(("start_", "stop_"))} - {start_key, stop_key}
    if wrong:
        raise ConfigError(f"[scan] {sorted(wrong)} do not fit a {kind.value} (use {start_key}/{stop_key})")
    for k in (start_key, stop_key, "points"):
        if k not in sec:
            raise ConfigError(f"[scan] {k} is required")
    setup = BeamSetup()
    if cp.has_section("beam") or cp.has_section("drift"):
        geometry = cp["beam"].get("geometry", "co") if cp.has_section("beam") else "co"
        try:
            geometry = Geometry(geometry.strip().lower())
        except ValueError as exc:
            raise ConfigError(f"[beam] geometry must be 'co' or 'counter', got {geometry!r}") from exc
        setup = BeamSetup(geometry, _drift(cp["drift"] if cp.has_section("drift") else None))
    nuisance = Nuisance()
    if cp.has_section("nuisance"):
        n = cp["nuisance"]
        nuisance = Nuisance(
            detuning_drift=_float(n, "detuning_drift_khz") * KHZ if "detuning_drift_khz" in n else 0.0,
            contrast_drift=_float(n, "contrast_drift") if "contrast_drift" in n else 0.0,
            baseline_drift=_float(n, "baseline_drift") if "baseline_drift" in n else 0.0,
        )
    kw = {}
    if "shots" in sec:
        kw["shots"] = _int(sec, "shots")
    if "smoothing" in sec:
        kw["smoothing"] = _int(sec, "smoothing")
    if "shot_period_ms" in sec:
        kw["shot_period"] = _float(sec, "shot_period_ms") * 1e-3
    if "stark_khz" in sec:
        kw["stark_rate"] = _float(sec, "stark_khz") * KHZ
    try:
        return ScanSpec(
            kind=kind,
            start=_float(sec, start_key) * factor,
            stop=_float(sec, stop_key) * factor,
            points=_int(sec, "points"),
            force=force,
            trap=trap,
            engine=engine,
            setup=setup,
            nuisance=nuisance,
            seed=seed,
            **kw,
        )
    except ValueError as exc:
        raise ConfigError(f"[scan] {exc}") from exc


def parse_config(text: str, source: Path | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=str(source) if source else "<config>")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    for name in cp.sections():
        if name not in _ALLOWED:
            raise ConfigError(f"unknown section [{name}]")
        unknown = set(cp[name]) - _ALLOWED[name]
        if unknown:
            raise ConfigError(f"[{name}] unknown keys {sorted(unknown)}")

    run = cp["run"] if cp.has_section("run") else {}
    seed = _int(run, "seed") if "seed" in run else 0
    engine = run.get("engine", CLOSED).strip() if run else CLOSED
    if engine not in (CLOSED, ORACLE):
        raise ConfigError(f"[run] engine must be 'closed' or 'oracle', got {engine!r}")
    plot = True
    if "plot" in run:
        try:
            plot = run.getboolean("plot")
        except ValueError as exc:
            raise ConfigError(f"[run] plot: expected yes/no, got {run['plot']!r}") from exc
    formats = ("csv", "json")
    if "formats" in run:
        formats = tuple(v.strip().lower() for v in run["formats"].replace(",", " ").split())
        bad = set(formats) - {"csv", "json"}
        if bad or not formats:
            raise ConfigError(f"[run] formats must be csv and/or json, got {run['formats']!r}")
    out = Path(run.get("out", "out")) if run else Path("out")

    try:
        trap_kw = _converted(cp["trap"], _TRAP_KEYS) if cp.has_section("trap") else {}
        trap = TrapConfig(**trap_kw)
    except ValueError as exc:
        raise ConfigError(f"[trap] {exc}") from exc
    force_kw = {"omega_sb": 2.0 * KHZ, "delta": 5.0 * KHZ}
    if cp.has_section("force"):
        force_kw.update(_converted(cp["force"], _FORCE_KEYS))
    try:
        force = ForceParams(**force_kw)
    except ValueError as exc:
        raise ConfigError(f"[force] {exc}") from exc

    scan = _scan(cp["scan"], cp, force, trap, seed, engine) if cp.has_section("scan") else None

    oracle = None
    if cp.has_section("oracle"):
        o = cp["oracle"]
        deltas = tuple(v * KHZ for v in _floats(o, "delta_khz")) if "delta_khz" in o else (force.delta,)
        taus = tuple(v * 1e-6 for v in _floats(o, "tau_us")) if "tau_us" in o else (force.tau,)
        if not deltas or not taus:
            raise ConfigError("[oracle] grid is empty")
        if any(d == 0 for d in deltas):
            raise ConfigError("[oracle] delta_khz must be nonzero (the closed form excludes resonance)")
        if any(t < 0 for t in taus):
            raise ConfigError("[oracle] tau_us must be non-negative")
        gate = _float(o, "gate") if "gate" in o else 1e-6
        accuracy = _float(o, "accuracy") if "accuracy" in o else 0.25
        if gate <= 0 or accuracy <= 0:
            raise ConfigError("[oracle] gate and accuracy must be positive")
        oracle = OracleGrid(deltas, taus, gate, accuracy)

    fit_values, fit_free, fit_bounds, fit_model, max_iter = {}, (), {}, None, 4000
    if cp.has_section("fit"):
        s = cp["fit"]
        fit_values = _converted(s, _FIT_VALUE_KEYS)
        if "free" in s:
            fit_free = tuple(v.strip() for v in s["free"].replace(",", " ").split())
        if "model" in s:
            fit_model = _KIND_ALIASES.get(s["model"].strip().lower())
            if fit_model is None:
                raise ConfigError(f"[fit] unknown model {s['model']!r}")
        if "max_iter" in s:
            max_iter = _int(s, "max_iter")
        for key in s:
            if key.endswith("_bounds"):
                name, factor = _FIT_VALUE_KEYS[key[: -len("_bounds")]]
                lo_hi = _floats(s, key)
                if len(lo_hi) != 2 or not lo_hi[0] < lo_hi[1]:
                    raise ConfigError(f"[fit] {key}: expected 'low, high' with low < high")
                fit_bounds[name] = (lo_hi[0] * factor, lo_hi[1] * factor)

    return RunConfig(
        trap=trap,
        force=force,
        seed=seed,
        out=out,
        engine=engine,
        plot=plot,
        formats=formats,
        scan=scan,
        oracle=oracle,
        fit_values=fit_values,
        fit_free=fit_free,
        fit_bounds=fit_bounds,
        fit_model=fit_model,
        fit_max_iter=max_iter,
        source=source,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return parse_config(text, source=path)
