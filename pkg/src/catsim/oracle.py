"""Brute-force reference engine for the bichromatic force.

Integrates the interaction-frame Hamiltonian

    H(t) = -(Omega_sb / 2) sigma_phi (x) (a exp(i(delta t + phi_m)) + h.c.)

on the truncated Fock space with fixed-step RK4, optionally with motional
heating modelled by the Lindblad pair sqrt(nbar_dot) a^dag, sqrt(nbar_dot) a
(d<n>/dt = nbar_dot). Nothing here uses the closed-form trajectory; it is
the independent check on :mod:`catsim.dynamics`.

Internally the spin is expressed in the sigma_phi eigenbasis, where H is
block diagonal, and all operator products are banded shifts costing O(N^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .dynamics import ForceParams, max_alpha
from .quantum import (
    KET_UP,
    CutoffError,
    FockSpace,
    QuantumState,
    default_cutoff,
    ladder_operators,
    sigma_phi,
    sigma_phi_eigenbasis,
    spin_populations,
    thermal_state,
)


class IntegratorError(RuntimeError):
    """Integration lost trace or otherwise failed."""


def max_step(f: ForceParams) -> float:
    """Upper bound on the RK4 step: 1/200 of the shortest dynamical period."""
    periods = [2.0 * math.pi / f.omega_sb]
    if f.delta != 0:
        periods.append(2.0 * math.pi / abs(f.delta))
    return min(periods) / 200.0


@dataclass(frozen=True)
class IntegratorSpec:
    dt: float
    cutoff: int
    nbar_dot: float = 0.0
    method: str = "rk4"

    def __post_init__(self):
        if self.method != "rk4":
            raise ValueError(f"unsupported integration method {self.method!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.nbar_dot < 0:
            raise ValueError("nbar_dot must be non-negative")
        FockSpace(self.cutoff)

    @property
    def space(self) -> FockSpace:
        return FockSpace(self.cutoff)

    @classmethod
    def auto(
        cls,
        f: ForceParams,
        tau: float | None = None,
        nbar: float = 0.0,
        nbar_dot: float = 0.0,
        cutoff: int | None = None,
        accuracy: float = 0.25,
    ) -> "IntegratorSpec":
        """Pick cutoff and step for evolving ``f`` up to ``tau``.

        The step keeps ``dt`` times the largest generator rate near
        ``accuracy`` (and within :func:`max_step`).
        """
        tau = f.tau if tau is None else tau
        heat_quanta = nbar_dot * tau
        if cutoff is None:
            cutoff = default_cutoff(max_alpha(f, tau), nbar + heat_quanta)
        rate = f.omega_sb * math.sqrt(cutoff) + 2.0 * nbar_dot * cutoff
        dt = min(max_step(f), accuracy / rate)
        return cls(dt=dt, cutoff=cutoff, nbar_dot=nbar_dot)


def hamiltonian_at(f: ForceParams, t: float, space: FockSpace) -> np.ndarray:
    """Interaction-frame Hamiltonian in units of hbar (rad/s), shape (2N, 2N)."""
    if not isinstance(space, FockSpace):
        space = FockSpace(space)
    a, ad = ladder_operators(space)
    theta = f.delta * t + f.phi_m
    quad = a * np.exp(1j * theta) + ad * np.exp(-1j * theta)
    return -0.5 * f.omega_sb * np.kron(sigma_phi(f.phi_s), quad)


class _Generator:
    """Right-hand sides in the sigma_phi eigenbasis for a fixed force and cutoff."""

    def __init__(self, f: ForceParams, cutoff: int, nbar_dot: float):
        self.f = f
        self.n = cutoff
        self.gamma = nbar_dot
        self.sq = np.sqrt(np.arange(1, cutoff, dtype=float))
        # eigenvalue +1 branch first
        self.h = np.array([-0.5 * f.omega_sb, 0.5 * f.omega_sb])

    def _quad(self, x, t):
        """Apply the rotating quadrature to axis 1 of x (shape (2, N, ...))."""
        theta = self.f.delta * t + self.f.phi_m
        c_lo = np.exp(1j * theta)
        c_hi = np.exp(-1j * theta)
        shape = (1, self.n - 1) + (1,) * (x.ndim - 2)
        sq = self.sq.reshape(shape)
        out = np.empty_like(x)
        out[:, :-1] = (c_lo * sq) * x[:, 1:]
        out[:, -1] = 0.0
        out[:, 1:] += (c_hi * sq) * x[:, :-1]
        return out

    def ket(self, psi, t):
        return -1j * self.h[:, None] * self._quad(psi, t)

    def density(self, rho, t):
        theta = self.f.delta * t + self.f.phi_m
        out = np.empty_like(rho)
        _density_rhs(
            rho, out, self.h[0], self.h[1], np.exp(1j * theta), self.sq, self.gamma, self.n
        )
        return out

    def advance(self, rho, t0, h, steps):
        _rk4_density(
            rho, t0, h, steps, self.h[0], self.h[1],
            float(self.f.delta), float(self.f.phi_m), self.sq, float(self.gamma), self.n,
        )


@numba.njit(cache=True)
def _density_rhs(rho, out, h0, h1, c_lo, sq, gamma, n):
    """out = -i[H, rho] + gamma (D[a] + D[a^dag]) rho for H = diag(h0, h1) (x) X.

    rho must be Hermitian; only the upper triangle is computed and mirrored.
    """
    c_hi = np.conj(c_lo)
    dim = 2 * n
    for i in range(dim):
        a = i // n
        m = i - a * n
        ha = h0 if a == 0 else h1
        for j in range(i, dim):
            b = j // n
            k = j - b * n
            hb = h0 if b == 0 else h1
            xr = 0j
            if m < n - 1:
                xr += c_lo * sq[m] * rho[i + 1, j]
            if m > 0:
                xr += c_hi * sq[m - 1] * rho[i - 1, j]
            rx = 0j
            if k > 0:
                rx += c_lo * sq[k - 1] * rho[i, j - 1]
            if k < n - 1:
                rx += c_hi * sq[k] * rho[i, j + 1]
            val = -1j * (ha * xr - hb * rx)
            if gamma != 0.0:
                heat = 0j
                if m < n - 1 and k < n - 1:
                    heat += sq[m] * sq[k] * rho[i + 1, j + 1]
                if m > 0 and k > 0:
                    heat += sq[m - 1] * sq[k - 1] * rho[i - 1, j - 1]
                # truncated a a^dag vanishes on the top level
                km = 2.0 * m + 1.0 if m < n - 1 else n - 1.0
                kk = 2.0 * k + 1.0 if k < n - 1 else n - 1.0
                heat -= 0.5 * (km + kk) * rho[i, j]
                val += gamma * heat
            out[i, j] = val
            out[j, i] = np.conj(val)


@numba.njit(cache=True)
def _rk4_density(y, t0, h, steps, h0, h1, delta, phi_m, sq, gamma, n):
    """Advance a Hermitian density matrix ``steps`` RK4 steps of size ``h`` in place."""
    k = np.empty_like(y)
    acc = np.empty_like(y)
    tmp = np.empty_like(y)
    dim = y.shape[0]
    for s in range(steps):
        t = t0 + s * h
        for stage in range(4):
            if stage == 0:
                tt = t
                src = y
            elif stage == 3:
                tt = t + h
                src = tmp
            else:
                tt = t + 0.5 * h
                src = tmp
            _density_rhs(src, k, h0, h1, np.exp(1j * (delta * tt + phi_m)), sq, gamma, n)
            w = 1.0 if stage == 0 or stage == 3 else 2.0
            step = 0.5 * h if stage < 2 else h
            for i in range(dim):
                for j in range(dim):
                    kv = k[i, j]
                    if stage == 0:
                        acc[i, j] = kv
                    else:
                        acc[i, j] += w * kv
                    if stage < 3:
                        tmp[i, j] = y[i, j] + step * kv
        for i in range(dim):
            for j in range(dim):
                y[i, j] += (h / 6.0) * acc[i, j]


def _rk4(rhs, y, t, dt):
    k1 = rhs(y, t)
    k2 = rhs(y + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = rhs(y + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = rhs(y + dt * k3, t + dt)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _to_eigenbasis(rho: np.ndarray, phi_s: float, n: int) -> np.ndarray:
    v = sigma_phi_eigenbasis(phi_s)
    r4 = rho.reshape(2, n, 2, n)
    return np.einsum("ca,cmdn,db->ambn", v.conj(), r4, v).reshape(2 * n, 2 * n)


def _from_eigenbasis(rho: np.ndarray, phi_s: float, n: int) -> np.ndarray:
    v = sigma_phi_eigenbasis(phi_s)
    r4 = rho.reshape(2, n, 2, n)
    return np.einsum("ac,cmdn,bd->ambn", v, r4, v.conj()).reshape(2 * n, 2 * n)


def _pure_ket(state: QuantumState):
    """Return a ket if the state is pure (to 1e-12 in purity), else None."""
    rho = state.rho
    purity = float(np.real(np.vdot(rho, rho)))
    if abs(purity - 1.0) > 1e-12:
        return None
    w, v = np.linalg.eigh(rho)
    return v[:, -1] * math.sqrt(w[-1])


def _trajectory(rho0: QuantumState, f: ForceParams, spec: IntegratorSpec, t_grid):
    """Yield the state (standard basis, 2N x 2N) at each grid time."""
    n = rho0.space.cutoff
    if n != spec.cutoff:
        raise ValueError(f"state cutoff {n} does not match integrator cutoff {spec.cutoff}")
    limit = max_step(f)
    if spec.dt > limit * (1 + 1e-12):
        raise ValueError(f"dt = {spec.dt:.3e} s exceeds the stability bound {limit:.3e} s")
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0) or np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be non-negative and ascending")
    if t_grid.size:
        reach = max_alpha(f, float(t_grid[-1]))
        if reach**2 > n / 4:
            raise CutoffError(f"|alpha|^2 = {reach**2:.3g} exceeds N/4 = {n / 4:.3g}")

    gen = _Generator(f, n, spec.nbar_dot)
    v = sigma_phi_eigenbasis(f.phi_s)
    psi = _pure_ket(rho0) if spec.nbar_dot == 0 else None
    if psi is not None:
        y = (v.conj().T @ psi.reshape(2, n)).astype(complex)
    else:
        y = np.ascontiguousarray(_to_eigenbasis(np.array(rho0.rho), f.phi_s, n))

    t = 0.0
    for target in t_grid:
        span = target - t
        if span > 0:
            steps = max(1, math.ceil(span / spec.dt - 1e-9))
            h = span / steps
            if psi is not None:
                for i in range(steps):
                    y = _rk4(gen.ket, y, t + i * h, h)
            else:
                gen.advance(y, t, h, steps)
            t = float(target)
        if psi is not None:
            ket = (v @ y).reshape(-1)
            out = np.outer(ket, ket.conj())
        else:
            out = _from_eigenbasis(y, f.phi_s, n)
            out = 0.5 * (out + out.conj().T)
        tr = float(np.real(np.trace(out)))
        if not abs(tr - 1.0) <= 1e-5:
            raise IntegratorError(f"trace drifted to {tr!r} at t = {t:.6e} s; reduce dt")
        yield out


def evolve(rho0: QuantumState, f: ForceParams, spec: IntegratorSpec, tau: float | None = None) -> QuantumState:
    """Evolve ``rho0`` under the force (and heating) for ``tau`` (default ``f.tau``)."""
    tau = f.tau if tau is None else tau
    (rho,) = _trajectory(rho0, f, spec, [tau])
    return QuantumState(rho, pure=spec.nbar_dot == 0 and rho0.pure)


def pdown_vs_time(rho0: QuantumState, f: ForceParams, spec: IntegratorSpec, t_grid) -> np.ndarray:
    """Spin-down probability at each time in ``t_grid`` from one continuous integration."""
    out = []
    for rho in _trajectory(rho0, f, spec, t_grid):
        b = rho.reshape(2, spec.cutoff, 2, spec.cutoff)
        out.append(float(np.real(np.trace(b[1, :, 1, :]))))
    return np.array(out)


def initial_state(nbar: float, cutoff: int) -> QuantumState:
    """|up><up| (x) thermal(nbar) with a tail tolerance matched to the cutoff policy."""
    return QuantumState.product(KET_UP, thermal_state(nbar, FockSpace(cutoff), tail_tol=1e-6))


__all__ = [
    "IntegratorError",
    "IntegratorSpec",
    "evolve",
    "hamiltonian_at",
    "initial_state",
    "max_step",
    "pdown_vs_time",
    "spin_populations",
]
