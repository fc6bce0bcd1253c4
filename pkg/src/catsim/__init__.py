"""Simulation and analysis of a bichromatic spin-dependent force on one trapped ion.

Closed-form cat-state formulas, a truncated-Hilbert-space Lindblad oracle,
photon-echo pulse sequences, scan generation with shot noise and drifts,
and least-squares fitting.
"""

__version__ = "0.1.0"

from .beams import BeamSetup, Constant, Geometry, RandomWalk, Sinusoid, ms_phases, sample_drift, sideband_phases
from .dynamics import (
    ForceParams,
    alpha_trajectory,
    cat_probability,
    cat_separation,
    echo_signal,
    position_momentum,
    ramsey_signal,
    revival_times,
    sd_displacement_unitary,
    thermal_rms,
)
from .fitting import FitResult, FitSpec, fit, residuals, two_stage_fit
from .harness import Nuisance, ScanKind, ScanResult, ScanSpec, export, run_scan, smooth
from .oracle import IntegratorError, IntegratorSpec, evolve, hamiltonian_at, pdown_vs_time
from .pulses import (
    CarrierRotation,
    MSForce,
    PulseSequence,
    StarkPhase,
    Wait,
    build_echo_sequence,
    carrier_unitary,
    run_sequence,
)
from .quantum import (
    CutoffError,
    FockSpace,
    QuantumState,
    TrapConfig,
    displacement_operator,
    ladder_operators,
    spin_populations,
    thermal_state,
)
