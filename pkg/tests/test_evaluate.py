import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from ufoctl import evaluate
from ufoctl.control import random_band_limited
from ufoctl.evaluate import DepolarizingChannel, SampledChannel
from ufoctl.gmon import GmonModel
from ufoctl.targets import canonical_gate

from conftest import random_hermitian


def test_pauli_basis_orthogonality():
    P = evaluate.pauli_basis()
    gram = np.einsum("aij,bij->ab", P, P.conj())
    np.testing.assert_allclose(gram, 4 * np.eye(16), atol=1e-14)


@pytest.mark.parametrize("p", [0.0, 0.1, 0.5])
def test_depolarizing_analytic(p):
    f = evaluate.average_fidelity_nielsen(DepolarizingChannel(p), np.eye(4))
    assert abs(f - (1 - 3 * p / 4)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_nielsen_matches_unitary_closed_form(seed):
    rng = np.random.default_rng(seed)
    U = expm(-1j * random_hermitian(rng, 4))
    V = expm(-1j * random_hermitian(rng, 4))
    ref = (abs(np.trace(V.conj().T @ U)) ** 2 + 4) / 20
    assert evaluate.average_fidelity_nielsen(SampledChannel(U), V) == pytest.approx(ref)


def test_nielsen_vs_haar_on_mixed_unitary_channel(rng):
    ops = np.array([expm(-0.3j * random_hermitian(rng, 4)) for _ in range(5)])
    ch = SampledChannel(ops)
    assert abs(ch.trace_defect()) < 1e-12
    V = canonical_gate("CZ").matrix
    f_n = evaluate.average_fidelity_nielsen(ch, V)
    f_h, se = evaluate.haar_average_fidelity(ch, V, 20_000, np.random.default_rng(1), 7000)
    assert abs(f_n - f_h) < 5 * se + 1e-3


def test_depolarizing_haar_agrees():
    ch = DepolarizingChannel(0.1)
    f, se = evaluate.haar_average_fidelity(ch, np.eye(4), 10_000)
    assert f == pytest.approx(1 - 0.075, abs=5 * se)


def test_random_states_are_normalized(rng):
    psi = evaluate.random_states(100, rng)
    np.testing.assert_allclose(np.linalg.norm(psi, axis=1), 1)


def test_sampled_channel_validation():
    with pytest.raises(ValueError):
        SampledChannel(np.eye(3))
    assert len(SampledChannel(np.eye(4))) == 1


def test_fidelity_variance_report(rng):
    traj = random_band_limited(20, rng, amplitude_mhz=5.0)
    m = GmonModel()
    V = canonical_gate("IDENTITY").matrix
    rep = evaluate.fidelity_variance(traj, m, V, 1.0, n=12, seed=3, space="qubit", n_haar=2000)
    f = np.array(rep.per_sample)
    assert rep.f_ave == pytest.approx(f.mean())
    assert rep.sigma_fidelity == pytest.approx(f.var())
    assert abs(rep.f_ave_haar - rep.f_ave_nielsen) < 0.02
    again = evaluate.fidelity_variance(traj, m, V, 1.0, n=12, seed=3, space="qubit")
    assert again.per_sample == rep.per_sample
    assert set(rep.to_row()) == set(evaluate.REPORT_COLUMNS)
    quiet = evaluate.fidelity_variance(traj, m, V, 0.0, n=4)
    assert quiet.sigma_fidelity == 0.0
    with pytest.raises(ValueError):
        evaluate.fidelity_variance(traj, m, V, 1.0, n=1)


def test_leaky_channel_has_trace_defect(rng):
    traj = random_band_limited(40, rng)
    ch = evaluate.noisy_channel(traj, GmonModel(), evaluate.NoiseModel(0.5, 2), 3)
    assert ch.trace_defect() > 0


def test_robustness_check_and_spec():
    spec = evaluate.RobustnessSpec()
    assert spec.epsilon0 == 0.007 and spec.samples_per_point == 60
    rep = evaluate.EvaluationReport(0.99, 0.99, np.nan, 0.0)
    assert evaluate.robustness_check(rep, 0.995, spec)
    assert not evaluate.robustness_check(rep, 0.999, spec)
    with pytest.raises(ValueError):
        evaluate.RobustnessSpec(sigma_grid=(2.0, 1.0))
    with pytest.raises(ValueError):
        evaluate.RobustnessSpec(epsilon0=0)
