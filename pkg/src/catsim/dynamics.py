"""Closed-form model of the bichromatic spin-dependent force.

Each spin eigenstate of sigma_phi is displaced along a circle in phase
space, alpha(t) = alpha0 exp(-i phi_m) (1 - exp(-i delta t)) with
alpha0 = Omega_sb / (2 delta). The spin-down probability after the force
(starting in |up>) follows from the overlap of the two displaced thermal
wavepackets plus a heating-induced loss of coherence.

Angular frequencies are in rad/s, times in s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quantum import (
    FockSpace,
    TrapConfig,
    displacement_operator,
    sigma_phi_eigenbasis,
)


@dataclass(frozen=True)
class ForceParams:
    """Balanced bichromatic force: equal sideband Rabi frequencies, detunings -delta_r = delta_b = delta."""

    omega_sb: float
    delta: float
    phi_s: float = 0.0
    phi_m: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if not self.omega_sb > 0:
            raise ValueError(f"omega_sb must be positive, got {self.omega_sb!r}")
        if self.tau < 0:
            raise ValueError(f"tau must be non-negative, got {self.tau!r}")

    @property
    def alpha0(self) -> float:
        if self.delta == 0:
            raise ValueError("alpha0 is undefined on resonance (delta = 0)")
        return self.omega_sb / (2.0 * self.delta)

    def with_(self, **changes) -> "ForceParams":
        fields = dict(
            omega_sb=self.omega_sb,
            delta=self.delta,
            phi_s=self.phi_s,
            phi_m=self.phi_m,
            tau=self.tau,
        )
        fields.update(changes)
        return ForceParams(**fields)


def alpha_trajectory(f: ForceParams, t):
    """Phase-space displacement alpha(t); accepts scalar or array ``t``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be non-negative")
    rot = np.exp(-1j * f.phi_m)
    if f.delta == 0:
        out = 0.5j * f.omega_sb * t_arr * rot
    else:
        # 1 - exp(-ix) = 2i sin(x/2) exp(-ix/2); exact zero at closure.
        half = 0.5 * f.delta * t_arr
        out = f.alpha0 * rot * 2j * np.sin(half) * np.exp(-1j * half)
    return complex(out) if out.ndim == 0 else out


def max_alpha(f: ForceParams, tau: float | None = None) -> float:
    """Largest |alpha(t)| reached for 0 <= t <= tau (defaults to f.tau)."""
    tau = f.tau if tau is None else tau
    if f.delta == 0:
        return 0.5 * f.omega_sb * tau
    if abs(f.delta) * tau >= math.pi:
        return 2.0 * abs(f.alpha0)
    return abs(alpha_trajectory(f, tau))


def position_momentum(alpha: complex, trap: TrapConfig) -> tuple[float, float]:
    """Position (m) and momentum (kg m/s) displacements for phase-space point ``alpha``."""
    z = 2.0 * trap.z0 * alpha.real
    p = 2.0 * trap.mass * trap.omega_z * trap.z0 * alpha.imag
    return z, p


def sd_displacement_unitary(f: ForceParams, t: float, space: FockSpace) -> np.ndarray:
    """Spin-dependent displacement D(alpha) |up_phi><up_phi| + D(-alpha) |down_phi><down_phi|.

    The common geometric phase of both branches is dropped.
    """
    alpha = alpha_trajectory(f, t)
    d_plus = displacement_operator(alpha, space)
    d_minus = d_plus.conj().T
    v = sigma_phi_eigenbasis(f.phi_s)
    proj_up = np.outer(v[:, 0], v[:, 0].conj())
    proj_down = np.outer(v[:, 1], v[:, 1].conj())
    return np.kron(proj_up, d_plus) + np.kron(proj_down, d_minus)


def heating_exponent(f: ForceParams, nbar_dot, tau):
    """Heating contribution (1/2) nbar_dot tau |4 alpha0|^2 to the cat decay exponent."""
    return 8.0 * np.asarray(nbar_dot) * np.asarray(tau) * f.alpha0**2


def cat_probability(f: ForceParams, nbar: float, nbar_dot: float, tau=None):
    """Spin-down probability after the force acts for ``tau`` on |up> (x) thermal(nbar).

    ``tau`` defaults to ``f.tau`` and may be an array. Requires delta != 0.
    Vectorized over ``tau``; for a vector of detunings use ``cat_probability_grid``.
    """
    if f.delta == 0:
        raise ValueError("cat_probability requires a nonzero detuning")
    if nbar < 0 or nbar_dot < 0:
        raise ValueError("nbar and nbar_dot must be non-negative")
    tau = f.tau if tau is None else tau
    return cat_probability_grid(f.omega_sb, f.delta, nbar, nbar_dot, tau)


def cat_probability_grid(omega_sb, delta, nbar, nbar_dot, tau):
    """Broadcasting form of ``cat_probability`` over any of its arguments."""
    delta = np.asarray(delta, dtype=float)
    if np.any(delta == 0):
        raise ValueError("cat_probability requires a nonzero detuning")
    tau = np.asarray(tau, dtype=float)
    alpha0 = np.asarray(omega_sb) / (2.0 * delta)
    # |2 alpha(tau)|^2 = 16 alpha0^2 sin^2(delta tau / 2)
    sep2 = 16.0 * alpha0**2 * np.sin(0.5 * delta * tau) ** 2
    expo = 8.0 * np.asarray(nbar_dot) * tau * alpha0**2 + (np.asarray(nbar) + 0.5) * sep2
    p = np.clip(0.5 * (1.0 - np.exp(-expo)), 0.0, 0.5)
    return float(p) if p.ndim == 0 else p


def ramsey_signal(phi_o, phi_s, pcat):
    """Interferometric spin-down probability pcat * sin^2(phi_o - phi_s)."""
    pcat_arr = np.asarray(pcat)
    if np.any(pcat_arr < 0) or np.any(pcat_arr > 0.5):
        raise ValueError("pcat must lie in [0, 1/2]")
    out = pcat_arr * np.sin(np.asarray(phi_o) - np.asarray(phi_s)) ** 2
    return float(out) if np.ndim(out) == 0 else out


def cat_separation(f: ForceParams, t: float, trap: TrapConfig | None = None) -> float:
    """Distance between the two cat components in units of z0.

    The +/- alpha branches sit at positions +/- 2 z0 Re(alpha); along the
    direction of alpha the separation is 4 |alpha|. ``trap`` only fixes the
    length unit and is accepted for symmetry with ``position_momentum``.
    """
    return 4.0 * abs(alpha_trajectory(f, t))


def thermal_rms(nbar: float) -> float:
    """RMS position spread of a thermal state in units of z0."""
    return math.sqrt(2.0 * nbar + 1.0)


def revival_times(delta: float, m_max: int) -> list[float]:
    """Times 2 pi m / |delta| (m = 1..m_max) at which the trajectory closes."""
    if delta == 0:
        raise ValueError("revival times are undefined on resonance")
    if m_max < 0:
        raise ValueError("m_max must be non-negative")
    return [2.0 * math.pi * m / abs(delta) for m in range(1, m_max + 1)]


def echo_signal(phi_prep, phi_analysis, phi_s, pcat):
    """Spin-down probability when preparation and analysis pulses have different phases.

    Generalizes ``ramsey_signal`` (recovered for ``phi_analysis == phi_prep``);
    used to predict the effect of an uncompensated Stark phase.
    """
    u = np.exp(1j * (np.asarray(phi_prep) - phi_s))
    v = np.exp(1j * (phi_s - np.asarray(phi_analysis)))
    a1 = 0.25 * (1 + u) * (1 - v)
    a2 = 0.25 * (1 - u) * (1 + v)
    overlap = 1.0 - 2.0 * np.asarray(pcat)
    out = np.abs(a1) ** 2 + np.abs(a2) ** 2 + 2.0 * np.real(np.conj(a1) * a2) * overlap
    return float(out) if np.ndim(out) == 0 else out
