"""Linear algebra on the spin (x) Fock Hilbert space.

Basis ordering is spin-major and fixed: index ``s * N + n`` with spin
``s = 0`` for |up> and ``s = 1`` for |down>, and Fock level ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from . import constants as const

UP = 0
DOWN = 1


class CutoffError(ValueError):
    """The Fock cutoff is too small for the requested state or operator."""


@dataclass(frozen=True)
class FockSpace:
    cutoff: int

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 2:
            raise ValueError(f"Fock cutoff must be an integer >= 2, got {self.cutoff!r}")

    @property
    def dim(self) -> int:
        """Dimension of spin (x) motion."""
        return 2 * self.cutoff


def default_cutoff(alpha_max: float = 0.0, nbar: float = 0.0) -> int:
    """Cutoff giving negligible truncation loss for thermal states displaced by up to ``alpha_max``."""
    return max(32, math.ceil(8.0 * (abs(alpha_max) ** 2 + 4.0 * nbar)))


@dataclass(frozen=True)
class TrapConfig:
    """Ion and trap constants. Frequencies in rad/s, heating rate in quanta/s."""

    mass: float = const.CD111_MASS
    omega_z: float = const.OMEGA_Z
    omega_hf: float = const.OMEGA_HF
    nbar: float = const.NBAR_DOPPLER
    nbar_dot: float = const.HEATING_RATE

    def __post_init__(self):
        if self.mass <= 0 or self.omega_z <= 0:
            raise ValueError("mass and omega_z must be positive")
        if self.nbar < 0 or self.nbar_dot < 0:
            raise ValueError("nbar and nbar_dot must be non-negative")

    @cached_property
    def z0(self) -> float:
        """Ground-state wavepacket size sqrt(hbar / 2 m omega_z) in metres."""
        return math.sqrt(const.HBAR / (2.0 * self.mass * self.omega_z))


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Density operator on spin (x) Fock space, shape (2N, 2N)."""

    rho: np.ndarray
    pure: bool = False
    space: FockSpace = field(init=False)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] % 2:
            raise ValueError(f"density matrix must be square with even dimension, got {rho.shape}")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "space", FockSpace(rho.shape[0] // 2))

    @classmethod
    def from_ket(cls, psi) -> "QuantumState":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        return cls(np.outer(psi, psi.conj()), pure=True)

    @classmethod
    def product(cls, spin, motion) -> "QuantumState":
        """Tensor product of a spin part (ket of length 2 or 2x2 matrix) and a motional part."""
        spin = np.asarray(spin, dtype=complex)
        motion = np.asarray(motion, dtype=complex)
        spin_pure = spin.ndim == 1
        motion_pure = motion.ndim == 1
        if spin_pure:
            spin = np.outer(spin, spin.conj())
        if motion_pure:
            motion = np.outer(motion, motion.conj())
        return cls(np.kron(spin, motion), pure=spin_pure and motion_pure)

    @property
    def blocks(self) -> np.ndarray:
        """View with axes (spin, n, spin', n')."""
        n = self.space.cutoff
        return self.rho.reshape(2, n, 2, n)

    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)))

    def check(self, full: bool = False) -> None:
        """Raise ValueError if Hermiticity, trace or (with ``full``) positivity is violated."""
        herm = np.max(np.abs(self.rho - self.rho.conj().T))
        if herm > 1e-12:
            raise ValueError(f"density matrix not Hermitian (max deviation {herm:.3e})")
        tr = self.trace()
        if abs(tr - 1.0) > 1e-4:
            raise CutoffError(f"trace deficit {1.0 - tr:.3e}; Fock cutoff likely too small")
        if abs(tr - 1.0) > 1e-9:
            raise ValueError(f"trace {tr!r} differs from 1")
        if full:
            lowest = np.linalg.eigvalsh(self.rho)[0]
            if lowest < -1e-10:
                raise ValueError(f"density matrix has negative eigenvalue {lowest:.3e}")


def ladder_operators(space: FockSpace) -> tuple[np.ndarray, np.ndarray]:
    """Return the truncated (lowering, raising) operators."""
    if not isinstance(space, FockSpace):
        space = FockSpace(space)
    a = np.diag(np.sqrt(np.arange(1, space.cutoff, dtype=float)), k=1).astype(complex)
    return a, a.conj().T


@lru_cache(maxsize=64)
def _displacement(alpha: complex, cutoff: int) -> np.ndarray:
    a, ad = ladder_operators(FockSpace(cutoff))
    # exp(alpha a^dag - alpha* a) = exp(-i G) with G Hermitian
    gen = 1j * (alpha * ad - np.conj(alpha) * a)
    w, v = np.linalg.eigh(gen)
    d = (v * np.exp(-1j * w)) @ v.conj().T
    d.setflags(write=False)
    return d


def displacement_operator(alpha: complex, space: FockSpace) -> np.ndarray:
    """Displacement operator D(alpha) on the truncated Fock space.

    Raises CutoffError when ``|alpha|**2 > N/4``, where truncation would
    distort the low-lying matrix elements.
    """
    if not isinstance(space, FockSpace):
        space = FockSpace(space)
    alpha = complex(alpha)
    if abs(alpha) ** 2 > space.cutoff / 4:
        raise CutoffError(
            f"|alpha|^2 = {abs(alpha) ** 2:.3g} exceeds N/4 = {space.cutoff / 4:.3g}"
        )
    return _displacement(alpha, space.cutoff).copy()


def thermal_weights(nbar: float, space: FockSpace, tail_tol: float = 1e-4) -> np.ndarray:
    """Renormalized Bose-Einstein occupation probabilities p_n for n < N."""
    if not isinstance(space, FockSpace):
        space = FockSpace(space)
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    n = np.arange(space.cutoff)
    if nbar == 0:
        p = (n == 0).astype(float)
        return p
    ratio = nbar / (nbar + 1.0)
    tail = ratio**space.cutoff
    if tail >= tail_tol:
        raise CutoffError(
            f"thermal tail mass {tail:.3g} beyond cutoff {space.cutoff} exceeds {tail_tol:g}"
        )
    p = ratio**n / (nbar + 1.0)
    return p / p.sum()


def thermal_state(nbar: float, space: FockSpace, tail_tol: float = 1e-4) -> np.ndarray:
    """Motional thermal density matrix (N x N); combine with a spin via QuantumState.product."""
    return np.diag(thermal_weights(nbar, space, tail_tol)).astype(complex)


def spin_populations(state: QuantumState) -> tuple[float, float]:
    """Return (P_up, P_down) after tracing out the motion."""
    b = state.blocks
    p_up = float(np.real(np.trace(b[UP, :, UP, :])))
    p_down = float(np.real(np.trace(b[DOWN, :, DOWN, :])))
    return p_up, p_down


def mean_phonon(state: QuantumState) -> float:
    b = state.blocks
    n = np.arange(state.space.cutoff)
    diag = np.real(np.diagonal(b[UP, :, UP, :]) + np.diagonal(b[DOWN, :, DOWN, :]))
    return float(diag @ n)


def fidelity(a: QuantumState, b: QuantumState) -> float:
    """Fidelity Tr(rho sigma), exact when either state is pure."""
    return float(np.real(np.vdot(a.rho, b.rho)))


# Spin operators in the (|up>, |down>) basis.
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
KET_UP = np.array([1, 0], dtype=complex)
KET_DOWN = np.array([0, 1], dtype=complex)


def sigma_phi(phi: float) -> np.ndarray:
    """Equatorial spin operator exp(-i phi) sigma_+ + exp(i phi) sigma_-."""
    return np.exp(-1j * phi) * SIGMA_PLUS + np.exp(1j * phi) * SIGMA_MINUS


def sigma_phi_eigenbasis(phi: float) -> np.ndarray:
    """Unitary whose columns are |up_phi> (eigenvalue +1) and |down_phi> (eigenvalue -1)."""
    e = np.exp(1j * phi)
    return np.array([[1, 1], [e, -e]], dtype=complex) / math.sqrt(2.0)
