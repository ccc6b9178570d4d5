import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ufoctl import gmon, qops
from ufoctl.gmon import ControlKnobs, GmonModel

knob_arrays = st.lists(st.floats(-20, 20), min_size=5, max_size=5).flatmap(
    lambda amps: st.lists(st.floats(0, 2 * np.pi), min_size=2, max_size=2).map(
        lambda ph: np.array(amps + ph)))


def reference_h(k, eta):
    """Element-by-element construction in the |n1 n2> basis (cyclic MHz)."""
    g, d1, d2, f1, f2, p1, p2 = k
    H = np.zeros((9, 9), dtype=complex)
    idx = qops.basis_index
    for n1 in range(3):
        for n2 in range(3):
            i = idx(n1, n2)
            H[i, i] = eta / 2 * (n1 * (n1 - 1) + n2 * (n2 - 1)) + d1 * n1 + d2 * n2
            # hopping a2^dag a1: |n1, n2> -> |n1-1, n2+1>
            if n1 > 0 and n2 < 2:
                j = idx(n1 - 1, n2 + 1)
                v = g * np.sqrt(n1 * (n2 + 1))
                H[j, i] += v
                H[i, j] += v
            # drive i f (a e^{-i phi} - a^dag e^{i phi}) on each mode
            if n1 > 0:
                j = idx(n1 - 1, n2)
                H[j, i] += 1j * f1 * np.exp(-1j * p1) * np.sqrt(n1)
                H[i, j] += -1j * f1 * np.exp(1j * p1) * np.sqrt(n1)
            if n2 > 0:
                j = idx(n1, n2 - 1)
                H[j, i] += 1j * f2 * np.exp(-1j * p2) * np.sqrt(n2)
                H[i, j] += -1j * f2 * np.exp(1j * p2) * np.sqrt(n2)
    return 2 * np.pi * H


@settings(max_examples=40, deadline=None)
@given(knob_arrays)
def test_hamiltonian_matches_elementwise_reference(k):
    m = GmonModel()
    H = gmon.hamiltonians(k, m)
    np.testing.assert_allclose(H, reference_h(k, m.eta), atol=1e-10)
    assert qops.is_hermitian(H)


def test_static_spectrum(model):
    H0 = gmon.static_h(model)
    e = np.diag(H0).real / (2 * np.pi)
    lab = model.layout.labels()
    np.testing.assert_allclose(e[lab == 0], 0)
    np.testing.assert_allclose(e[lab == 1], 200)
    np.testing.assert_allclose(e[lab == 2], 400)


@settings(max_examples=40, deadline=None)
@given(knob_arrays)
def test_decompose_reconstructs(k):
    m = GmonModel()
    H = gmon.hamiltonians(k, m)
    H0, H1, H2 = gmon.decompose(H, m)
    assert np.max(np.abs(H0 + H1 + H2 - H)) < 1e-12
    mask = m.layout.same_block_mask()
    assert np.all(H2[mask] == 0) and np.all(H1[~mask] == 0)


def test_decompose_zero_controls(model):
    H = gmon.hamiltonians(np.zeros(7), model)
    _, H1, H2 = gmon.decompose(H, model)
    assert not H1.any() and not H2.any()


def test_g_only_coupling_11_to_20(model):
    k = ControlKnobs(g=10.0)
    H = gmon.assemble_h(k, model)
    v = H[qops.basis_index(2, 0), qops.basis_index(1, 1)]
    assert v == pytest.approx(2 * np.pi * 10 * np.sqrt(2))


@settings(max_examples=40, deadline=None)
@given(knob_arrays)
def test_projection_is_mirrored_omega0_block(k):
    Hq = gmon.qubit_hamiltonians(k)
    Hf = gmon.hamiltonians(gmon.mirror_knobs(k), GmonModel())
    block = Hf[np.ix_(qops.DEFAULT_LAYOUT.omega0, qops.DEFAULT_LAYOUT.omega0)]
    diff = Hq - block
    # equal up to a multiple of the identity
    np.testing.assert_allclose(diff, diff[0, 0] * np.eye(4), atol=1e-10)


def test_projection_literal_terms():
    Z = qops.two_qubit(qops.PAULI_Z, qops.PAULI_I)
    H = gmon.project_to_qubits(ControlKnobs(delta1=4.0)) / (2 * np.pi)
    np.testing.assert_allclose(H, 2.0 * Z)
    X1 = qops.two_qubit(qops.PAULI_X, qops.PAULI_I)
    H = gmon.project_to_qubits(ControlKnobs(f1=3.0, phi1=np.pi / 2)) / (2 * np.pi)
    np.testing.assert_allclose(H, -3.0 * X1, atol=1e-12)


def test_errors_and_ranges():
    with pytest.raises(ValueError):
        gmon.hamiltonians(np.array([np.nan] + [0] * 6), GmonModel())
    with pytest.raises(ValueError):
        GmonModel(eta=-1)
    with pytest.raises(ValueError):
        ControlKnobs(g=25).check_range()
    k = ControlKnobs(phi1=7.0).normalized()
    assert 0 <= k.phi1 < 2 * np.pi
