import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catsim.dynamics import (
    ForceParams,
    alpha_trajectory,
    cat_probability,
    cat_probability_grid,
    cat_separation,
    echo_signal,
    max_alpha,
    position_momentum,
    ramsey_signal,
    revival_times,
    sd_displacement_unitary,
    thermal_rms,
)
from catsim.quantum import FockSpace, QuantumState, TrapConfig, displacement_operator, sigma_phi_eigenbasis

KHZ = 2 * math.pi * 1e3


def test_force_validation():
    with pytest.raises(ValueError):
        ForceParams(0.0, 1.0)
    with pytest.raises(ValueError):
        ForceParams(1.0, 1.0, tau=-1)
    with pytest.raises(ValueError):
        ForceParams(1.0, 0.0).alpha0


def test_alpha_closure_example():
    f = ForceParams(2 * KHZ, 5 * KHZ, phi_m=0.4)
    assert abs(alpha_trajectory(f, 200e-6)) <= 1e-12


def test_alpha_half_period():
    f = ForceParams(2 * KHZ, 5 * KHZ)
    assert alpha_trajectory(f, math.pi / f.delta) == pytest.approx(0.4, abs=1e-12)


def test_alpha_resonance_limit():
    f = ForceParams(1.62 * KHZ, 0.0)
    a = alpha_trajectory(f, 500e-6)
    assert abs(a) == pytest.approx(2.545, abs=1e-3)
    # continuity with small nonzero detuning
    near = alpha_trajectory(f.with_(delta=1e-3), 500e-6)
    assert abs(near - a) <= 1e-6


def test_alpha_rejects_negative_time():
    with pytest.raises(ValueError):
        alpha_trajectory(ForceParams(1.0, 1.0), -1.0)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(100.0, 1e5),
    st.floats(100.0, 1e5) | st.floats(-1e5, -100.0),
    st.floats(-math.pi, math.pi),
    st.integers(1, 6),
)
def test_closure_property(omega, delta, phi_m, m):
    f = ForceParams(omega, delta, phi_m=phi_m)
    assert abs(alpha_trajectory(f, 2 * math.pi * m / abs(delta))) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(100.0, 1e5), st.floats(100.0, 1e5), st.floats(-math.pi, math.pi))
def test_circle_property(omega, delta, phi_m):
    f = ForceParams(omega, delta, phi_m=phi_m)
    t = np.linspace(0, 2 * math.pi / delta, 2001)
    a = alpha_trajectory(f, t)
    centre = f.alpha0 * np.exp(-1j * phi_m)
    np.testing.assert_allclose(np.abs(a - centre), abs(f.alpha0), rtol=1e-10)
    assert np.max(np.abs(a)) == pytest.approx(2 * abs(f.alpha0), rel=1e-6)
    assert max_alpha(f, t[-1]) == pytest.approx(2 * abs(f.alpha0))


def test_position_momentum():
    trap = TrapConfig()
    z, p = position_momentum(1.0 + 0j, trap)
    assert z == pytest.approx(2 * trap.z0) and p == 0
    z, p = position_momentum(1j, trap)
    assert z == 0 and p == pytest.approx(2 * trap.mass * trap.omega_z * trap.z0)


def test_sd_unitary_identity_at_revival():
    f = ForceParams(2 * KHZ, 5 * KHZ, phi_s=0.3)
    u = sd_displacement_unitary(f, 2 * math.pi / f.delta, FockSpace(32))
    assert np.max(np.abs(u - np.eye(64))) <= 1e-8


def test_sd_unitary_makes_cat():
    f = ForceParams(2 * KHZ, 5 * KHZ)
    s = FockSpace(32)
    t = math.pi / f.delta
    psi0 = np.zeros(64, complex)
    psi0[0] = 1
    out = sd_displacement_unitary(f, t, s) @ psi0
    alpha = alpha_trajectory(f, t)
    vac = np.zeros(32)
    vac[0] = 1
    v = sigma_phi_eigenbasis(0.0)
    cat = (np.kron(v[:, 0], displacement_operator(alpha, s) @ vac) + np.kron(v[:, 1], displacement_operator(-alpha, s) @ vac)) / math.sqrt(2)
    assert abs(np.vdot(cat, out)) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(500.0, 2e4), st.floats(2e3, 5e4), st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 1e-3))
def test_sd_unitary_unitary(omega, delta, ps, pm, t):
    u = sd_displacement_unitary(ForceParams(omega, delta, ps, pm), t, FockSpace(64))
    assert np.max(np.abs(u @ u.conj().T - np.eye(128))) <= 1e-9


def test_cat_probability_revival_zero():
    f = ForceParams(2 * KHZ, 5 * KHZ)
    assert cat_probability(f, 0, 0, 2 * 2 * math.pi / f.delta) <= 1e-12


def test_cat_probability_large_separation():
    f = ForceParams(50 * KHZ, 5 * KHZ)
    assert cat_probability(f, 0, 0, math.pi / f.delta) == pytest.approx(0.5, abs=1e-12)


def test_cat_probability_thermal_point():
    f = ForceParams(2.2 * KHZ, 5.46 * KHZ)
    assert cat_probability(f, 8.1, 0, math.pi / f.delta) == pytest.approx(0.498, abs=5e-4)


def test_cat_probability_hot_revival():
    f = ForceParams(1.62 * KHZ, 2 * KHZ, tau=500e-6)
    assert cat_probability(f, 5.6, 620.0) == pytest.approx(0.167, abs=1e-3)


def test_cat_probability_rejects_resonance():
    with pytest.raises(ValueError):
        cat_probability(ForceParams(1.0, 0.0, tau=1.0), 0, 0)
    with pytest.raises(ValueError):
        cat_probability_grid(1.0, [1.0, 0.0], 0, 0, 1.0)
    with pytest.raises(ValueError):
        cat_probability(ForceParams(1.0, 1.0, tau=1.0), -1, 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 2000), st.floats(0, 2000), st.floats(0, 500e-6))
def test_cat_probability_monotone(n1, n2, h1, h2, tau):
    f = ForceParams(2 * KHZ, 5 * KHZ)
    lo_n, hi_n = sorted((n1, n2))
    lo_h, hi_h = sorted((h1, h2))
    assert cat_probability(f, lo_n, h1, tau) <= cat_probability(f, hi_n, h1, tau) + 1e-15
    assert cat_probability(f, n1, lo_h, tau) <= cat_probability(f, n1, hi_h, tau) + 1e-15
    p = cat_probability(f, n1, h1, tau)
    assert 0 <= p <= 0.5


def test_cat_probability_monotone_in_alpha():
    # |alpha(tau)| grows with omega at fixed delta, tau
    taus = 90e-6
    ps = [cat_probability(ForceParams(w * KHZ, 5 * KHZ), 3, 100, taus) for w in (0.5, 1, 2, 4)]
    assert ps == sorted(ps)


def test_ramsey_signal():
    assert ramsey_signal(0.3, 0.3, 0.5) == 0
    assert ramsey_signal(math.pi / 2, 0, 0.5) == pytest.approx(0.5)
    grid = np.linspace(0, 2 * math.pi, 1000, endpoint=False)
    assert np.mean(ramsey_signal(grid, 0.2, 0.4)) == pytest.approx(0.2, abs=1e-12)
    with pytest.raises(ValueError):
        ramsey_signal(0, 0, 0.6)


def test_echo_signal_reduces_to_ramsey():
    grid = np.linspace(0, 2 * math.pi, 17)
    np.testing.assert_allclose(echo_signal(grid, grid, 0.4, 0.3), ramsey_signal(grid, 0.4, 0.3), atol=1e-15)


def test_cat_separation_on_resonance():
    f = ForceParams(1.62 * KHZ, 0.0)
    dz = cat_separation(f, 500e-6, TrapConfig())
    assert dz == pytest.approx(10.2, abs=0.1)
    assert dz / thermal_rms(5.6) == pytest.approx(2.9, abs=0.1)
    assert cat_separation(ForceParams(1.0, 1.0), 0.0) == 0


def test_revival_times():
    assert revival_times(5.46 * KHZ, 1)[0] == pytest.approx(183.2e-6, abs=0.05e-6)
    assert revival_times(5 * KHZ, 2)[1] == pytest.approx(400e-6)
    assert revival_times(-5 * KHZ, 2)[1] == pytest.approx(400e-6)
    assert revival_times(1.0, 0) == []
    with pytest.raises(ValueError):
        revival_times(0.0, 2)
    with pytest.raises(ValueError):
        revival_times(1.0, -1)


@pytest.mark.parametrize("nbar", [0.0, 2.0, 8.0])
def test_closed_form_matches_unitary(nbar):
    from catsim.quantum import KET_UP, spin_populations, thermal_state

    f = ForceParams(2.2 * KHZ, 5.46 * KHZ, phi_s=0.3, phi_m=1.1, tau=70e-6)
    s = FockSpace(300 if nbar else 32)
    rho0 = QuantumState.product(KET_UP, thermal_state(nbar, s, tail_tol=1e-9))
    u = sd_displacement_unitary(f, f.tau, s)
    out = QuantumState(u @ rho0.rho @ u.conj().T)
    tol = 1e-6 if nbar == 0 else 1e-3
    assert abs(spin_populations(out)[1] - cat_probability(f, nbar, 0)) <= tol
