import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from ufoctl import dynamics, qops
from ufoctl.control import ControlTrajectory, NoiseModel, random_band_limited
from ufoctl.gmon import GmonModel

from conftest import random_hermitian


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-4, 0.01))
def test_step_unitary_matches_expm(seed, dt):
    H = 2 * np.pi * 20 * random_hermitian(np.random.default_rng(seed), 9)
    np.testing.assert_allclose(dynamics.step_unitaries(H, dt), expm(-1j * H * dt), atol=1e-11)


def test_chain_time_order(rng):
    steps = np.array([expm(-1j * random_hermitian(rng, 3)) for _ in range(4)])
    ref = steps[3] @ steps[2] @ steps[1] @ steps[0]
    np.testing.assert_allclose(dynamics.chain(steps), ref, atol=1e-13)


def test_propagation_is_unitary(rng, model):
    traj = ControlTrajectory(1.0, rng.uniform(-20, 20, (60, 7)))
    U = dynamics.propagate(traj, model).unitary
    assert np.max(np.abs(U.conj().T @ U - np.eye(9))) < 1e-9
    Uq = dynamics.propagate(traj, model, space="qubit").unitary
    assert Uq.shape == (4, 4) and qops.is_unitary(Uq)
    with pytest.raises(ValueError):
        dynamics.propagate(traj, model, space="bogus")


def test_noise_changes_propagator_deterministically(rng, model):
    traj = random_band_limited(30, rng)
    a = dynamics.propagate(traj, model, NoiseModel(1.0, 5)).unitary
    b = dynamics.propagate(traj, model, NoiseModel(1.0, 5)).unitary
    c = dynamics.propagate(traj, model).unitary
    np.testing.assert_array_equal(a, b)
    assert np.max(np.abs(a - c)) > 1e-6


def test_gate_fidelity_phase_invariance_and_range(rng):
    V = expm(-1j * random_hermitian(rng, 4))
    assert dynamics.gate_fidelity(V, V) == pytest.approx(1.0)
    assert dynamics.gate_fidelity(np.exp(0.7j) * V, V) == pytest.approx(1.0)
    W = expm(-1j * random_hermitian(rng, 4))
    f = dynamics.gate_fidelity(W, V)
    assert 0 <= f <= 1
    batch = dynamics.gate_fidelity(np.stack([V, W]), V)
    np.testing.assert_allclose(batch, [1.0, f])
    with pytest.raises(ValueError):
        dynamics.gate_fidelity(np.eye(9), V)


def test_zero_controls_give_identity_block(model):
    U = dynamics.propagate(ControlTrajectory.zeros(20), model).unitary
    np.testing.assert_allclose(dynamics.qubit_block(U), np.eye(4), atol=1e-12)
    assert dynamics.exact_leakage(ControlTrajectory.zeros(5), model) < 1e-14
    assert dynamics.qubit_block_unitarity_defect(U) < 1e-12


def test_single_qubit_drive_rotation():
    # resonant drive on qubit 2 with phi = pi/2: H = -2 pi f X on the qubit pair
    f, T = 5.0, 0.025   # quarter period of the Rabi cycle
    k = np.zeros((25, 7))
    k[:, 4] = f
    k[:, 6] = np.pi / 2
    U = dynamics.propagate(ControlTrajectory(1.0, k), GmonModel(), space="qubit").unitary
    ref = expm(1j * 2 * np.pi * f * T * qops.two_qubit(qops.PAULI_I, qops.PAULI_X))
    assert dynamics.gate_fidelity(U, ref) == pytest.approx(1.0, abs=1e-12)


def test_leakage_report_fields(rng, model):
    traj = random_band_limited(40, rng)
    rep = dynamics.exact_leakage(traj, model, report=True)
    assert rep.amplitude_max >= rep.amplitude_mean >= 0
    assert rep.population_max <= rep.amplitude_max ** 2 + 1e-15
    U = dynamics.propagate(traj, model).unitary
    # population lost equals the Omega_0 block defect from unitarity
    B = dynamics.qubit_block(U)
    lost = 1 - np.sum(np.abs(B) ** 2, axis=0)
    assert rep.population_max == pytest.approx(lost.max(), abs=1e-12)
    dressed = dynamics.exact_leakage(traj, model, "dressed")
    assert dressed < rep.amplitude_max
    with pytest.raises(ValueError):
        dynamics.exact_leakage(traj, model, "nope")


def test_interpolated_converges_for_constant_controls(model):
    k = np.tile([3.0, 1.0, -2.0, 4.0, 5.0, 0.3, 1.1], (11, 1))
    traj = ControlTrajectory(1.0, k)
    U_lin = dynamics.propagate_interpolated(traj, model, substeps=7)
    U_pc = dynamics.propagate(traj.prefix(10), model).unitary
    np.testing.assert_allclose(U_lin, U_pc, atol=1e-10)
