"""Raman beam geometry and optical phase drift.

A common optical phase fluctuation ``dphi`` enters the red and blue
sideband fields with the same sign for co-propagating beat waves and with
opposite signs for counter-propagating ones. Only common-mode fluctuations
are modelled.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class Geometry(str, enum.Enum):
    CO_PROPAGATING = "co"
    COUNTER_PROPAGATING = "counter"


@dataclass(frozen=True)
class Constant:
    offset: float = 0.0


@dataclass(frozen=True)
class Sinusoid:
    amplitude: float
    frequency: float
    phase: float = 0.0


@dataclass(frozen=True)
class RandomWalk:
    """Brownian phase with increment variance ``diffusion * dt`` (rad^2/s), starting at 0."""

    diffusion: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.diffusion < 0:
            raise ValueError("diffusion must be non-negative")


DriftProcess = Constant | Sinusoid | RandomWalk


@dataclass(frozen=True)
class BeamSetup:
    geometry: Geometry = Geometry.CO_PROPAGATING
    drift: DriftProcess = field(default_factory=Constant)

    def __post_init__(self):
        object.__setattr__(self, "geometry", Geometry(self.geometry))


def wrap_phase(x):
    """Wrap angles to (-pi, pi]."""
    out = math.pi - np.mod(math.pi - np.asarray(x, dtype=float), 2.0 * math.pi)
    return float(out) if np.ndim(out) == 0 else out


def sideband_phases(setup: BeamSetup | Geometry, dphi: float) -> tuple[float, float]:
    """Return (phi_r, phi_b) produced by a common optical phase shift ``dphi``."""
    geometry = setup.geometry if isinstance(setup, BeamSetup) else Geometry(setup)
    if geometry is Geometry.CO_PROPAGATING:
        return dphi, dphi
    return -dphi, dphi


def ms_phases(phi_r: float, phi_b: float, wrap: bool = True) -> tuple[float, float]:
    """Spin and motional phases (half sum and half difference of the sideband phases)."""
    phi_s = 0.5 * (phi_b + phi_r)
    phi_m = 0.5 * (phi_b - phi_r)
    if wrap:
        return wrap_phase(phi_s), wrap_phase(phi_m)
    return phi_s, phi_m


def sample_drift(p: DriftProcess, times) -> np.ndarray:
    """Evaluate the drift process at ascending ``times`` (s)."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1:
        raise ValueError("times must be one-dimensional")
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be ascending")
    if isinstance(p, Constant):
        return np.full(times.shape, float(p.offset))
    if isinstance(p, Sinusoid):
        return p.amplitude * np.sin(2.0 * math.pi * p.frequency * times + p.phase)
    if isinstance(p, RandomWalk):
        rng = np.random.default_rng(p.seed)
        if times.size == 0:
            return times.copy()
        steps = np.diff(times)
        incr = rng.standard_normal(steps.size) * np.sqrt(p.diffusion * steps)
        return np.concatenate(([0.0], np.cumsum(incr)))
    raise TypeError(f"unknown drift process {p!r}")


def drift_to_dict(p: DriftProcess) -> dict:
    if isinstance(p, Constant):
        return {"kind": "constant", "offset": p.offset}
    if isinstance(p, Sinusoid):
        return {"kind": "sinusoid", "amplitude": p.amplitude, "frequency": p.frequency, "phase": p.phase}
    return {"kind": "randomwalk", "diffusion": p.diffusion, "seed": p.seed}


def drift_from_dict(d: dict) -> DriftProcess:
    d = dict(d)
    kind = d.pop("kind")
    return {"constant": Constant, "sinusoid": Sinusoid, "randomwalk": RandomWalk}[kind](**d)
