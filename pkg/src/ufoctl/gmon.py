"""Two-qubit gmon Hamiltonian in the rotating frame.

Knob amplitudes are cyclic frequencies in MHz; every matrix returned here is
in angular units (rad/us), i.e. scaled by 2*pi.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qops
from .qops import DIM, SubspaceLayout

TWO_PI = 2 * np.pi
KNOB_NAMES = ("g", "delta1", "delta2", "f1", "f2", "phi1", "phi2")
AMPLITUDE_SLOTS = (0, 1, 2, 3, 4)
PHASE_SLOTS = (5, 6)
DEFAULT_RANGE_MHZ = 20.0


@dataclass(frozen=True)
class GmonModel:
    eta: float = 200.0
    layout: SubspaceLayout = field(default=None)

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise ValueError("eta must be a positive finite frequency in MHz")
        if self.layout is None:
            object.__setattr__(self, "layout", SubspaceLayout.for_eta(self.eta))
        elif not np.isclose(self.layout.gap, TWO_PI * self.eta, rtol=1e-12):
            raise ValueError("layout.gap must equal 2*pi*eta")

    @property
    def gap(self) -> float:
        return self.layout.gap


@dataclass(frozen=True)
class ControlKnobs:
    g: float = 0.0
    delta1: float = 0.0
    delta2: float = 0.0
    f1: float = 0.0
    f2: float = 0.0
    phi1: float = 0.0
    phi2: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.g, self.delta1, self.delta2, self.f1, self.f2,
                         self.phi1, self.phi2], dtype=float)

    @classmethod
    def from_array(cls, values) -> "ControlKnobs":
        v = [float(x) for x in np.asarray(values, dtype=float).reshape(7)]
        return cls(*v)

    def normalized(self) -> "ControlKnobs":
        v = self.as_array()
        v[list(PHASE_SLOTS)] = np.mod(v[list(PHASE_SLOTS)], TWO_PI)
        return ControlKnobs.from_array(v)

    def check_range(self, limit_mhz: float = DEFAULT_RANGE_MHZ) -> None:
        amps = self.as_array()[list(AMPLITUDE_SLOTS)]
        if np.any(np.abs(amps) > limit_mhz):
            raise ValueError(f"knob amplitude outside +/-{limit_mhz} MHz: {amps}")


# Operator basis, built once.
_A1 = qops.annihilation(1)
_A2 = qops.annihilation(2)
_N1 = qops.number_op(1)
_N2 = qops.number_op(2)
_EYE = np.eye(DIM)
_ANHARM = 0.5 * (_N1 @ (_N1 - _EYE) + _N2 @ (_N2 - _EYE))
_HOP = _A2.conj().T @ _A1 + _A1.conj().T @ _A2
# i f (a e^{-i phi} - a^dag e^{i phi}) = f [cos(phi) i(a - a^dag) + sin(phi) (a + a^dag)]
_DRIVE_COS = (1j * (_A1 - _A1.conj().T), 1j * (_A2 - _A2.conj().T))
_DRIVE_SIN = (_A1 + _A1.conj().T, _A2 + _A2.conj().T)


def static_h(model: GmonModel, eta_mhz=None) -> np.ndarray:
    """H0 = (eta/2) sum_j n_j (n_j - 1); ``eta_mhz`` may be an array of values."""
    eta = model.eta if eta_mhz is None else np.asarray(eta_mhz, dtype=float)
    return TWO_PI * np.multiply.outer(eta, _ANHARM)


def hamiltonians(knobs: np.ndarray, model: GmonModel, eta_mhz=None) -> np.ndarray:
    """Vectorised assembly: ``knobs`` has shape (..., 7), result (..., 9, 9).

    ``eta_mhz`` defaults to the model value and otherwise broadcasts against
    the leading axes of ``knobs`` (used for per-step anharmonicity noise).
    """
    k = np.asarray(knobs, dtype=float)
    if k.shape[-1] != 7:
        raise ValueError("knob arrays need a trailing axis of length 7")
    if not np.all(np.isfinite(k)):
        raise ValueError("non-finite control knob")
    g, d1, d2, f1, f2, p1, p2 = np.moveaxis(k, -1, 0)
    eta = np.full(g.shape, model.eta) if eta_mhz is None else np.broadcast_to(
        np.asarray(eta_mhz, dtype=float), g.shape)
    if not np.all(np.isfinite(eta)):
        raise ValueError("non-finite anharmonicity")

    def term(c, op):
        return np.multiply.outer(c, op)

    H = (term(eta, _ANHARM) + term(g, _HOP) + term(d1, _N1) + term(d2, _N2)
         + term(f1 * np.cos(p1), _DRIVE_COS[0]) + term(f1 * np.sin(p1), _DRIVE_SIN[0])
         + term(f2 * np.cos(p2), _DRIVE_COS[1]) + term(f2 * np.sin(p2), _DRIVE_SIN[1]))
    return TWO_PI * H


def assemble_h(knobs: ControlKnobs, model: GmonModel) -> np.ndarray:
    return hamiltonians(knobs.as_array(), model)


def decompose(H: np.ndarray, model: GmonModel):
    """Return (H0, H1, H2) with H0 static, H1 intra-subspace, H2 inter-subspace."""
    H = np.asarray(H)
    H0 = np.broadcast_to(static_h(model), H.shape).copy()
    H1, H2 = qops.block_split(H - H0, model.layout)
    return H0, H1, H2


_X, _Y, _Z, _I2 = qops.PAULI_X, qops.PAULI_Y, qops.PAULI_Z, qops.PAULI_I
_XX_YY = qops.two_qubit(_X, _X) + qops.two_qubit(_Y, _Y)
_Z1, _Z2 = qops.two_qubit(_Z, _I2), qops.two_qubit(_I2, _Z)
_X1, _X2 = qops.two_qubit(_X, _I2), qops.two_qubit(_I2, _X)
_Y1, _Y2 = qops.two_qubit(_Y, _I2), qops.two_qubit(_I2, _Y)


def qubit_hamiltonians(knobs: np.ndarray) -> np.ndarray:
    """Vectorised qubit-projected Hamiltonian, shape (..., 4, 4).

    (g/2)(XX + YY) + sum_j [(delta_j/2) Z_j - f_j (sin(phi_j) X_j + cos(phi_j) Y_j)]
    with Z|0> = +|0>.
    """
    k = np.asarray(knobs, dtype=float)
    if not np.all(np.isfinite(k)):
        raise ValueError("non-finite control knob")
    g, d1, d2, f1, f2, p1, p2 = np.moveaxis(k, -1, 0)

    def term(c, op):
        return np.multiply.outer(c, op)

    H = (term(0.5 * g, _XX_YY) + term(0.5 * d1, _Z1) + term(0.5 * d2, _Z2)
         - term(f1 * np.sin(p1), _X1) - term(f1 * np.cos(p1), _Y1)
         - term(f2 * np.sin(p2), _X2) - term(f2 * np.cos(p2), _Y2))
    return TWO_PI * H


def project_to_qubits(knobs: ControlKnobs, model: GmonModel | None = None) -> np.ndarray:
    return qubit_hamiltonians(knobs.as_array())


def mirror_knobs(knobs: np.ndarray) -> np.ndarray:
    """Flip detuning and phase signs.

    The projected qubit Hamiltonian of ``k`` equals the Omega_0 block of the
    full Hamiltonian of ``mirror_knobs(k)`` up to a multiple of the identity.
    """
    k = np.array(knobs, dtype=float, copy=True)
    k[..., [1, 2, 5, 6]] *= -1
    return k
