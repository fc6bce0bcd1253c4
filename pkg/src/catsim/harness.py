"""Parameter scans with shot noise, phase drift and slow nuisance drifts."""

from __future__ import annotations

import csv
import datetime as _dt
import enum
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import constants as const
from .beams import BeamSetup, drift_from_dict, drift_to_dict, sample_drift
from .dynamics import ForceParams, cat_probability_grid, max_alpha
from .oracle import IntegratorSpec, evolve, initial_state, pdown_vs_time
from .pulses import CLOSED, ORACLE, build_echo_sequence, echo_initial_state, run_sequence
from .quantum import TrapConfig, default_cutoff, spin_populations

CSV_COLUMNS = ("swept", "model", "estimate", "smoothed", "drift")


class ScanKind(str, enum.Enum):
    TIME = "timescan"
    DETUNING = "detuningscan"
    PHASE = "phasescan"


class ScanPointError(RuntimeError):
    """An engine failed while evaluating one scan point."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"scan point {index}: {type(cause).__name__}: {cause}")
        self.index = index


@dataclass(frozen=True)
class Nuisance:
    """Linear drifts across a scan: values are the total change from first to last point."""

    detuning_drift: float = 0.0  # rad/s
    contrast_drift: float = 0.0  # fractional change of the signal amplitude
    baseline_drift: float = 0.0  # absolute probability offset


@dataclass(frozen=True)
class ScanSpec:
    """One experiment: the swept quantity is tau (s), delta (rad/s) or phi_o (rad).

    ``shots = 0`` selects infinite-shot mode, where the estimate equals the
    model probability.
    """

    kind: ScanKind
    start: float
    stop: float
    points: int
    force: ForceParams
    trap: TrapConfig = field(default_factory=TrapConfig)
    shots: int = 100
    engine: str = CLOSED
    setup: BeamSetup = field(default_factory=BeamSetup)
    nuisance: Nuisance = field(default_factory=Nuisance)
    smoothing: int = 3
    seed: int = 0
    shot_period: float = const.SHOT_PERIOD
    stark_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScanKind(self.kind))
        if self.points < 2:
            raise ValueError("a scan needs at least 2 points")
        if self.shots < 0:
            raise ValueError("shots must be >= 0 (0 selects infinite-shot mode)")
        if self.smoothing < 1 or self.smoothing % 2 == 0 or self.smoothing > self.points:
            raise ValueError("smoothing window must be odd and no larger than the number of points")
        if self.engine not in (CLOSED, ORACLE):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.shot_period <= 0:
            raise ValueError("shot_period must be positive")

    @property
    def swept(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind.value,
            "start": self.start,
            "stop": self.stop,
            "points": self.points,
            "force": asdict(self.force),
            "trap": {k: getattr(self.trap, k) for k in ("mass", "omega_z", "omega_hf", "nbar", "nbar_dot")},
            "shots": self.shots,
            "engine": self.engine,
            "setup": {"geometry": self.setup.geometry.value, "drift": drift_to_dict(self.setup.drift)},
            "nuisance": asdict(self.nuisance),
            "smoothing": self.smoothing,
            "seed": self.seed,
            "shot_period": self.shot_period,
            "stark_rate": self.stark_rate,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScanSpec":
        d = dict(d)
        d["force"] = ForceParams(**d["force"])
        d["trap"] = TrapConfig(**d["trap"])
        setup = d["setup"]
        d["setup"] = BeamSetup(setup["geometry"], drift_from_dict(setup["drift"]))
        d["nuisance"] = Nuisance(**d["nuisance"])
        return cls(**d)


@dataclass(eq=False)
class ScanResult:
    kind: ScanKind
    swept: np.ndarray
    model: np.ndarray
    estimate: np.ndarray
    smoothed: np.ndarray
    drift: np.ndarray
    drift_samples: list | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = ScanKind(self.kind)
        n = len(self.swept)
        for name in CSV_COLUMNS:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"column {name!r} has shape {arr.shape}, expected ({n},)")
            setattr(self, name, arr)
        if np.any(self.estimate < 0) or np.any(self.estimate > 1):
            raise ValueError("estimates must lie in [0, 1]")

    @property
    def spec(self) -> ScanSpec | None:
        d = self.metadata.get("spec")
        return None if d is None else ScanSpec.from_dict(d)

    def drift_coordinate(self) -> np.ndarray:
        """Position of each point along the scan in [0, 1]; nuisance drifts are linear in it."""
        spec = self.metadata.get("spec")
        if spec is not None:
            lo, hi = spec["start"], spec["stop"]
        else:
            lo, hi = float(self.swept.min()), float(self.swept.max())
        return (self.swept - lo) / (hi - lo)


def smooth(values, window: int = 3) -> np.ndarray:
    """Centered moving average; the window is truncated at the ends."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if window < 1 or window % 2 == 0:
        raise ValueError("smoothing window must be a positive odd integer")
    if window > n:
        raise ValueError(f"smoothing window {window} exceeds series length {n}")
    if window == 1:
        return values.copy()
    kernel = np.ones(window)
    sums = np.convolve(values, kernel, mode="same")
    counts = np.convolve(np.ones(n), kernel, mode="same")
    return sums / counts


def _threads() -> int:
    cap = os.environ.get("CATSIM_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = max(1, min(n, int(cap)))
    return n


def _oracle_points(spec: ScanSpec, taus, deltas) -> np.ndarray:
    trap = spec.trap
    fs = [replace(spec.force, delta=d, tau=t) for d, t in zip(deltas, taus)]
    reach = max(max_alpha(f) for f in fs)
    cutoff = default_cutoff(reach, trap.nbar + trap.nbar_dot * max(taus))
    rho0 = initial_state(trap.nbar, cutoff)
    if spec.kind is ScanKind.TIME and np.all(deltas == deltas[0]) and np.all(np.diff(taus) >= 0):
        f = fs[-1]
        ispec = IntegratorSpec.auto(f, nbar_dot=trap.nbar_dot, cutoff=cutoff)
        return pdown_vs_time(rho0, f, ispec, taus)
    out = np.empty(len(fs))
    for i, f in enumerate(fs):
        try:
            ispec = IntegratorSpec.auto(f, nbar_dot=trap.nbar_dot, cutoff=cutoff)
            out[i] = spin_populations(evolve(rho0, f, ispec))[1]
        except Exception as exc:
            raise ScanPointError(i, exc) from exc
    return out


def _core_probabilities(spec: ScanSpec, x, u):
    """Model probability before nuisance contrast/baseline, and per-point drift record."""
    f = spec.force
    trap = spec.trap
    ddelta = spec.nuisance.detuning_drift * u
    if spec.kind is ScanKind.TIME:
        deltas = f.delta + ddelta
        taus = x
    elif spec.kind is ScanKind.DETUNING:
        deltas = x + ddelta
        taus = np.full_like(x, f.tau)
    else:
        raise AssertionError
    if spec.engine == CLOSED:
        zero = np.flatnonzero(deltas == 0)
        if zero.size:
            raise ScanPointError(int(zero[0]), ValueError("cat_probability requires a nonzero detuning"))
        p = cat_probability_grid(f.omega_sb, deltas, trap.nbar, trap.nbar_dot, taus)
    else:
        p = _oracle_points(spec, taus, deltas)
    return np.asarray(p, dtype=float), ddelta


def _phase_point(spec: ScanSpec, i: int, phi_o: float, delta: float, dphis, initial):
    f = replace(spec.force, delta=delta)
    seq = build_echo_sequence(phi_o, f, spec.stark_rate)
    try:
        return np.array(
            [
                run_sequence(initial, seq, spec.engine, dphi=d, setup=spec.setup, nbar_dot=spec.trap.nbar_dot)
                for d in dphis
            ]
        )
    except Exception as exc:
        raise ScanPointError(i, exc) from exc


def run_scan(spec: ScanSpec) -> ScanResult:
    """Evaluate the model across the scan, then sample shots; deterministic under ``spec.seed``."""
    x = spec.swept
    u = np.linspace(0.0, 1.0, spec.points)
    contrast = 1.0 + spec.nuisance.contrast_drift * u
    baseline = spec.nuisance.baseline_drift * u
    rng = np.random.default_rng(spec.seed)
    drift_samples = None

    if spec.kind is ScanKind.PHASE:
        per_point = max(spec.shots, 1)
        times = np.arange(spec.points * per_point) * spec.shot_period
        dphi = sample_drift(spec.setup.drift, times).reshape(spec.points, per_point)
        deltas = spec.force.delta + spec.nuisance.detuning_drift * u
        reach = max(max_alpha(replace(spec.force, delta=d)) for d in deltas)
        initial = echo_initial_state(spec.force, spec.trap.nbar, default_cutoff(reach, spec.trap.nbar))
        args = [(spec, i, x[i], deltas[i], dphi[i], initial) for i in range(spec.points)]
        workers = _threads()
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                shot_p = list(pool.map(lambda a: _phase_point(*a), args))
        else:
            shot_p = [_phase_point(*a) for a in args]
        shot_p = np.clip(baseline[:, None] + contrast[:, None] * np.array(shot_p), 0.0, 1.0)
        model = shot_p.mean(axis=1)
        drift = dphi.mean(axis=1)
        drift_samples = dphi.tolist()
        if spec.shots:
            hits = rng.random(shot_p.shape) < shot_p
            estimate = hits.sum(axis=1) / spec.shots
        else:
            estimate = model.copy()
    else:
        core, drift = _core_probabilities(spec, x, u)
        model = np.clip(baseline + contrast * core, 0.0, 1.0)
        if spec.shots:
            estimate = rng.binomial(spec.shots, model) / spec.shots
        else:
            estimate = model.copy()

    return ScanResult(
        kind=spec.kind,
        swept=x,
        model=model,
        estimate=estimate,
        smoothed=smooth(estimate, spec.smoothing),
        drift=drift,
        drift_samples=drift_samples,
        metadata={
            "spec": spec.to_dict(),
            "seed": spec.seed,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        },
    )


@dataclass(frozen=True)
class OracleComparison:
    deltas: np.ndarray
    taus: np.ndarray
    closed: np.ndarray
    oracle: np.ndarray

    @property
    def abs_diff(self) -> np.ndarray:
        return np.abs(self.closed - self.oracle)

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("delta", "tau", "closed", "oracle", "abs_diff"))
        for row in zip(self.deltas, self.taus, self.closed, self.oracle, self.abs_diff):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue().encode()


def compare_oracle(
    force: ForceParams, trap: TrapConfig, deltas, taus, accuracy: float = 0.25
) -> OracleComparison:
    """Closed-form vs oracle spin-down probability on the grid deltas x taus.

    One continuous integration per detuning covers all durations.
    """
    taus = np.sort(np.asarray(taus, dtype=float))
    rows_d, rows_t, closed, oracle = [], [], [], []
    for i, d in enumerate(deltas):
        f = replace(force, delta=float(d), tau=float(taus[-1]))
        try:
            cutoff = default_cutoff(max_alpha(f), trap.nbar + trap.nbar_dot * taus[-1])
            rho0 = initial_state(trap.nbar, cutoff)
            ispec = IntegratorSpec.auto(f, nbar_dot=trap.nbar_dot, cutoff=cutoff, accuracy=accuracy)
            p_oracle = pdown_vs_time(rho0, f, ispec, taus)
        except Exception as exc:
            raise ScanPointError(i, exc) from exc
        rows_d.extend([float(d)] * taus.size)
        rows_t.extend(taus.tolist())
        closed.extend(np.atleast_1d(cat_probability_grid(f.omega_sb, f.delta, trap.nbar, trap.nbar_dot, taus)))
        oracle.extend(p_oracle)
    return OracleComparison(*(np.array(v, dtype=float) for v in (rows_d, rows_t, closed, oracle)))


# --- serialization ---------------------------------------------------------


def to_json_dict(result: ScanResult) -> dict:
    return {
        "kind": result.kind.value,
        "columns": {name: getattr(result, name).tolist() for name in CSV_COLUMNS},
        "drift_samples": result.drift_samples,
        "metadata": result.metadata,
    }


def export(result: ScanResult, fmt: str = "json") -> bytes:
    """Serialize to CSV or JSON bytes. Floats are written with round-trip precision."""
    fmt = fmt.lower()
    if fmt == "json":
        return (json.dumps(to_json_dict(result), indent=1) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        cols = [getattr(result, name) for name in CSV_COLUMNS]
        for row in zip(*cols):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue().encode()
    raise ValueError(f"unknown export format {fmt!r}")


def import_json(data: bytes | str) -> ScanResult:
    d = json.loads(data)
    cols = d["columns"]
    return ScanResult(
        kind=d["kind"],
        drift_samples=d.get("drift_samples"),
        metadata=d.get("metadata", {}),
        **{name: np.array(cols[name], dtype=float) for name in CSV_COLUMNS},
    )


def import_csv(data: bytes | str, kind: ScanKind | str) -> ScanResult:
    if isinstance(data, bytes):
        data = data.decode()
    rows = list(csv.reader(io.StringIO(data)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"CSV header must be {','.join(CSV_COLUMNS)}")
    body = rows[1:]
    try:
        arr = np.array([[float(v) for v in row] for row in body], dtype=float)
    except ValueError as exc:
        raise ValueError(f"malformed CSV row: {exc}") from exc
    if arr.ndim != 2 or arr.shape[1] != len(CSV_COLUMNS) or arr.shape[0] < 2:
        raise ValueError("CSV must contain at least 2 rows of 5 columns")
    return ScanResult(kind=kind, **{name: arr[:, i] for i, name in enumerate(CSV_COLUMNS)})


def load_result(path: str | Path, kind: ScanKind | str | None = None) -> ScanResult:
    """Read a ScanResult from a .json or .csv file (CSV needs ``kind``)."""
    path = Path(path)
    data = path.read_bytes()
    if path.suffix.lower() == ".json":
        return import_json(data)
    if kind is None:
        kind = path.stem.split("_")[0]
    return import_csv(data, kind)


def write_result(result: ScanResult, out_dir: str | Path, formats=("csv", "json")) -> list[Path]:
    """Write ``<kind>_<seed>.<ext>`` files and return their paths."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for fmt in formats:
            path = out_dir / f"{result.kind.value}_{result.metadata.get('seed', 0)}.{fmt}"
            path.write_bytes(export(result, fmt))
            paths.append(path)
    except OSError as exc:
        raise OSError(f"cannot write scan output to {out_dir}: {exc}") from exc
    return paths


def strip_timestamp(json_bytes: bytes) -> bytes:
    """JSON export with the timestamp metadata removed, for determinism checks."""
    d = json.loads(json_bytes)
    d.get("metadata", {}).pop("timestamp", None)
    return json.dumps(d, indent=1).encode()


__all__ = [
    "Nuisance",
    "OracleComparison",
    "ScanKind",
    "ScanPointError",
    "ScanResult",
    "ScanSpec",
    "export",
    "import_csv",
    "import_json",
    "load_result",
    "compare_oracle",
    "run_scan",
    "smooth",
    "write_result",
]
