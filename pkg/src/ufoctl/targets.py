"""Two-qubit target gates and the circuit-synthesis runtime reference."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qops

CANONICAL_NAMES = ("CZ", "CNOT", "ISWAP", "SWAP", "FSWAP", "IDENTITY")


@dataclass(frozen=True)
class GateTarget:
    matrix: np.ndarray
    label: str
    alpha: float = float("nan")
    gamma: float = float("nan")

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("target must be 4x4")
        if not qops.is_unitary(m, tol=1e-12):
            raise ValueError(f"target {self.label!r} is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def n_gate(alpha: float, gamma: float) -> GateTarget:
    """exp[i(alpha XX + alpha YY + gamma ZZ)] in closed form.

    ZZ is +1 on |00>,|11> and -1 on |01>,|10>; XX + YY is 2 sigma_x on the
    odd-parity pair and zero elsewhere, so the exponential factorises.
    """
    alpha, gamma = float(alpha), float(gamma)
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = m[3, 3] = np.exp(1j * gamma)
    c, s = np.cos(2 * alpha), np.sin(2 * alpha)
    ph = np.exp(-1j * gamma)
    m[1, 1] = m[2, 2] = ph * c
    m[1, 2] = m[2, 1] = 1j * ph * s
    return GateTarget(m, f"N:{alpha:g}:{gamma:g}", alpha, gamma)


def n_gate_generator(alpha: float, gamma: float) -> np.ndarray:
    """The Hermitian exponent alpha XX + alpha YY + gamma ZZ."""
    X, Y, Z = qops.PAULI_X, qops.PAULI_Y, qops.PAULI_Z
    return (alpha * qops.two_qubit(X, X) + alpha * qops.two_qubit(Y, Y)
            + gamma * qops.two_qubit(Z, Z))


def canonical_gate(name: str) -> GateTarget:
    key = name.strip().upper()
    if key == "CZ":
        m = np.diag([1, 1, 1, -1]).astype(complex)
    elif key == "CNOT":
        m = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
    elif key == "ISWAP":
        m = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]])
    elif key == "SWAP":
        m = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
    elif key == "FSWAP":
        m = canonical_gate("SWAP").matrix @ canonical_gate("CZ").matrix
    elif key in ("IDENTITY", "I"):
        m = np.eye(4, dtype=complex)
        key = "IDENTITY"
    else:
        raise ValueError(f"unknown gate {name!r}; expected one of {CANONICAL_NAMES}")
    return GateTarget(m, key)


def parse_target(spec: str) -> GateTarget:
    """'CZ'-style names or 'N:alpha:gamma' with radians."""
    text = str(spec).strip()
    if text.upper().startswith("N:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad target {spec!r}; use N:alpha:gamma")
        try:
            alpha, gamma = float(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ValueError(f"bad target {spec!r}: {exc}") from None
        if not (np.isfinite(alpha) and np.isfinite(gamma)):
            raise ValueError(f"bad target {spec!r}: non-finite angle")
        return n_gate(alpha, gamma)
    return canonical_gate(text)


@dataclass(frozen=True)
class SynthesisReference:
    single_qubit_ns: float = 20.0
    two_qubit_ns: float = 45.0
    total_ns: float = 215.0
    depth: int = 7
    n_single: int = 5
    n_two: int = 3
    notes: str = field(default="total_ns is the quoted schedule length; naive_sum_ns "
                                "is the serial sum of gate times")

    @property
    def naive_sum_ns(self) -> float:
        return self.n_single * self.single_qubit_ns + self.n_two * self.two_qubit_ns

    def to_dict(self) -> dict:
        return {"single_qubit_ns": self.single_qubit_ns, "two_qubit_ns": self.two_qubit_ns,
                "total_ns": self.total_ns, "naive_sum_ns": self.naive_sum_ns,
                "depth": self.depth, "n_single": self.n_single, "n_two": self.n_two}


def synthesis_runtime() -> SynthesisReference:
    return SynthesisReference()
