"""Pulse sequences for the photon-echo interferometer.

Carrier rotations are ideal, instantaneous spin rotations with a
bookkept duration. An MS pulse displaces the two sigma_phi branches in
opposite directions, either with the closed-form unitary or with the
Lindblad oracle. AC Stark shifts are sigma_z phases.

Phase convention: ``carrier_unitary(pi/2, phi)`` takes |up> to
(|up> + exp(i phi)|down>)/sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from . import constants as const
from .beams import BeamSetup, ms_phases, sideband_phases
from .dynamics import ForceParams, alpha_trajectory, heating_exponent, max_alpha
from .oracle import IntegratorSpec, evolve
from .quantum import (
    KET_UP,
    SIGMA_Z,
    CutoffError,
    FockSpace,
    QuantumState,
    _displacement,
    default_cutoff,
    sigma_phi,
    sigma_phi_eigenbasis,
    thermal_state,
)

CLOSED = "closed"
ORACLE = "oracle"


@dataclass(frozen=True)
class CarrierRotation:
    angle: float
    phase: float
    duration: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.angle <= 2.0 * math.pi:
            raise ValueError(f"rotation angle {self.angle!r} outside [0, 2 pi]")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")


@dataclass(frozen=True)
class MSForce:
    """Bichromatic force for ``force.tau``; ``stark_rate`` is a concurrent sigma_z shift (rad/s)."""

    force: ForceParams
    stark_rate: float = 0.0

    @property
    def duration(self) -> float:
        return self.force.tau


@dataclass(frozen=True)
class StarkPhase:
    rate: float
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("duration must be non-negative")


@dataclass(frozen=True)
class Wait:
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("duration must be non-negative")


Pulse = Union[CarrierRotation, MSForce, StarkPhase, Wait]


@dataclass(frozen=True)
class PulseSequence:
    """Ordered pulses. Carrier phases always follow the optical drift; whether the
    MS spin phase follows it too is decided by the beam geometry at run time."""

    pulses: tuple

    def __iter__(self):
        return iter(self.pulses)

    def __len__(self):
        return len(self.pulses)

    @property
    def duration(self) -> float:
        return sum(p.duration for p in self.pulses)


def carrier_unitary(theta: float, phi: float, space: FockSpace | None = None) -> np.ndarray:
    """Spin rotation by ``theta`` about the equatorial axis at azimuth phi + pi/2.

    Returns the 2x2 spin matrix, or the operator on spin (x) motion when
    ``space`` is given.
    """
    u = math.cos(theta / 2) * np.eye(2) - 1j * math.sin(theta / 2) * sigma_phi(phi + math.pi / 2)
    if space is None:
        return u
    return np.kron(u, np.eye(space.cutoff))


def stark_unitary(phase: float) -> np.ndarray:
    """exp(-i phase sigma_z / 2)."""
    return np.diag(np.exp(-0.5j * phase * np.diag(SIGMA_Z)))


def build_echo_sequence(
    phi_o: float,
    f: ForceParams,
    stark_rate: float = 0.0,
    *,
    pi_half_time: float = const.PI_HALF_TIME,
    compensate: bool = True,
    echo_phase: float | None = None,
    analysis_phase: float | None = None,
) -> PulseSequence:
    """pi/2 - MS force - pi - Stark compensation - pi/2, all carriers at ``phi_o`` by default."""
    echo_phase = phi_o if echo_phase is None else echo_phase
    analysis_phase = phi_o if analysis_phase is None else analysis_phase
    if compensate and stark_rate != 0:
        second_zone = StarkPhase(stark_rate, f.tau)
    else:
        second_zone = Wait(f.tau)
    return PulseSequence(
        (
            CarrierRotation(math.pi / 2, phi_o, pi_half_time),
            MSForce(f, stark_rate),
            CarrierRotation(math.pi, echo_phase, 2 * pi_half_time),
            second_zone,
            CarrierRotation(math.pi / 2, analysis_phase, pi_half_time),
        )
    )


def echo_initial_state(f: ForceParams, nbar: float, cutoff: int | None = None) -> QuantumState:
    """|up><up| (x) thermal(nbar) on a cutoff large enough for ``f``."""
    if cutoff is None:
        cutoff = default_cutoff(max_alpha(f), nbar)
    return QuantumState.product(KET_UP, thermal_state(nbar, FockSpace(cutoff), tail_tol=1e-6))


def _spin_apply(u: np.ndarray, rho4: np.ndarray) -> np.ndarray:
    return np.einsum("ac,cmdn,bd->ambn", u, rho4, u.conj(), optimize=True)


def _displacement_rotated(alpha: complex, n: int) -> np.ndarray:
    """D(alpha) from a cached D(|alpha|) and a number-operator rotation."""
    if abs(alpha) ** 2 > n / 4:
        raise CutoffError(f"|alpha|^2 = {abs(alpha) ** 2:.3g} exceeds N/4 = {n / 4:.3g}")
    base = _displacement(complex(abs(alpha)), n)
    phase = np.exp(1j * math.atan2(alpha.imag, alpha.real) * np.arange(n))
    return phase[:, None] * base * phase.conj()[None, :]


def _motional_trace(d: np.ndarray, x: np.ndarray) -> complex:
    """Tr(D X D): motional trace of the (+, -) branch block after displacement."""
    offdiag = x.copy()
    np.fill_diagonal(offdiag, 0)
    if not offdiag.any():
        dx = d * np.diagonal(x)[None, :]
    else:
        dx = d @ x
    return complex(np.sum(dx * d.T))


def _closed_form_ms(rho4, f: ForceParams, nbar_dot: float, reduce: bool):
    n = rho4.shape[1]
    v = sigma_phi_eigenbasis(f.phi_s)
    e = _spin_apply(v.conj().T, rho4)
    d = _displacement_rotated(alpha_trajectory(f, f.tau), n)
    decay = 1.0
    if nbar_dot and f.delta != 0:
        decay = math.exp(-float(heating_exponent(f, nbar_dot, f.tau)))
    if reduce:
        r = np.empty((2, 2), dtype=complex)
        r[0, 0] = np.trace(e[0, :, 0, :])
        r[1, 1] = np.trace(e[1, :, 1, :])
        # branch +: D, branch -: D^dag, so Tr_m(D X D) for the (+, -) block
        r[0, 1] = decay * _motional_trace(d, e[0, :, 1, :])
        r[1, 0] = np.conj(r[0, 1])
        return v @ r @ v.conj().T
    dm = d.conj().T
    ds = (d, dm)
    out = np.empty_like(e)
    for a in range(2):
        for b in range(2):
            out[a, :, b, :] = ds[a] @ e[a, :, b, :] @ ds[b].conj().T
    if decay != 1.0:
        out[0, :, 1, :] *= decay
        out[1, :, 0, :] *= decay
    return _spin_apply(v, out)


_LAST_FACTORED: tuple = (None, (None, None))


def _factorize(state: QuantumState):
    """(spin, motion) if the state is an exact product with unit-trace motion, else (None, None).

    The last answer is memoized by identity, since scans reuse one initial state for every shot.
    """
    global _LAST_FACTORED
    cached_state, cached = _LAST_FACTORED
    if cached_state is state:
        return cached
    n = state.space.cutoff
    rho4 = np.asarray(state.rho).reshape(2, n, 2, n)
    motion = rho4[0, :, 0, :] + rho4[1, :, 1, :]
    spin = np.einsum("ambm->ab", rho4)
    out = (None, None)
    if abs(np.trace(motion)) > 0:
        motion = motion / np.trace(motion)
        if np.max(np.abs(np.einsum("ab,mn->ambn", spin, motion) - rho4)) <= 1e-14:
            out = (spin, motion)
    _LAST_FACTORED = (state, out)
    return out


def _closed_form_ms_product(spin, motion, f: ForceParams, nbar_dot: float):
    """Reduced spin matrix after the force acts on spin (x) motion."""
    n = motion.shape[0]
    v = sigma_phi_eigenbasis(f.phi_s)
    e = v.conj().T @ spin @ v
    d = _displacement_rotated(alpha_trajectory(f, f.tau), n)
    decay = 1.0
    if nbar_dot and f.delta != 0:
        decay = math.exp(-float(heating_exponent(f, nbar_dot, f.tau)))
    r = np.array(e, dtype=complex)
    r[0, 0] *= np.trace(motion)
    r[1, 1] *= np.trace(motion)
    r[0, 1] *= decay * _motional_trace(d, motion)
    r[1, 0] = np.conj(r[0, 1])
    return v @ r @ v.conj().T


def _oracle_ms(rho4, f: ForceParams, nbar_dot: float, accuracy: float):
    n = rho4.shape[1]
    state = QuantumState(rho4.reshape(2 * n, 2 * n))
    spec = IntegratorSpec.auto(f, nbar_dot=nbar_dot, cutoff=n, accuracy=accuracy)
    return np.array(evolve(state, f, spec).rho).reshape(2, n, 2, n)


def run_sequence(
    initial: QuantumState,
    seq: PulseSequence,
    engine: str = CLOSED,
    dphi: float = 0.0,
    setup: BeamSetup | None = None,
    nbar_dot: float = 0.0,
    oracle_accuracy: float = 0.25,
) -> float:
    """Execute ``seq`` on ``initial`` and return the spin-down probability.

    ``dphi`` is a quasi-static optical phase offset for this shot. It shifts
    every carrier phase, and shifts the MS spin/motional phases according to
    the beam geometry of ``setup``.
    """
    if engine not in (CLOSED, ORACLE):
        raise ValueError(f"unknown engine {engine!r}")
    setup = BeamSetup() if setup is None else setup
    phi_r, phi_b = sideband_phases(setup, dphi)
    shift_s, shift_m = ms_phases(phi_r, phi_b, wrap=False)

    pulses = list(seq)
    last_ms = max((i for i, p in enumerate(pulses) if isinstance(p, MSForce)), default=-1)
    n = initial.space.cutoff
    rho4 = None
    # Keep spin (x) motion factorized while that is exact; carriers only touch the spin.
    spin, motion = _factorize(initial)
    if spin is None:
        rho4 = np.array(initial.rho).reshape(2, n, 2, n)
        if last_ms < 0:
            spin, rho4 = np.einsum("ambm->ab", rho4), None

    def spin_op(u):
        nonlocal rho4, spin
        if rho4 is None:
            spin = u @ spin @ u.conj().T
        else:
            rho4 = _spin_apply(u, rho4)

    for i, p in enumerate(pulses):
        if isinstance(p, CarrierRotation):
            spin_op(carrier_unitary(p.angle, p.phase + dphi))
        elif isinstance(p, StarkPhase):
            spin_op(stark_unitary(p.rate * p.duration))
        elif isinstance(p, Wait):
            continue
        elif isinstance(p, MSForce):
            f = replace(p.force, phi_s=p.force.phi_s + shift_s, phi_m=p.force.phi_m + shift_m)
            reduce = i == last_ms
            if engine == CLOSED and reduce and rho4 is None:
                spin = _closed_form_ms_product(spin, motion, f, nbar_dot)
            else:
                if rho4 is None:
                    rho4 = np.einsum("ab,mn->ambn", spin, motion)
                if engine == CLOSED:
                    out = _closed_form_ms(rho4, f, nbar_dot, reduce)
                else:
                    out = _oracle_ms(rho4, f, nbar_dot, oracle_accuracy)
                    if reduce:
                        out = np.einsum("ambm->ab", out)
                if reduce:
                    spin, rho4 = out, None
                else:
                    rho4 = out
            if p.stark_rate:
                spin_op(stark_unitary(p.stark_rate * f.tau))
        else:
            raise TypeError(f"unknown pulse {p!r}")

    return float(np.clip(np.real(spin[1, 1]), 0.0, 1.0))
