"""Operator algebra for two bosonic modes truncated at three levels.

Basis states are |n1 n2> with mode 1 as the major index, so the flat index
of |n1 n2> is ``3 * n1 + n2``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

LEVELS = 3
DIM = LEVELS * LEVELS
HERMITIAN_TOL = 1e-10


def basis_index(n1: int, n2: int) -> int:
    if not (0 <= n1 < LEVELS and 0 <= n2 < LEVELS):
        raise ValueError(f"occupation ({n1}, {n2}) outside truncation")
    return LEVELS * n1 + n2


def basis_label(index: int) -> str:
    n1, n2 = divmod(index, LEVELS)
    return f"{n1}{n2}"


@dataclass(frozen=True)
class SubspaceLayout:
    """Partition of the 9 basis states into Omega_0, Omega_1, Omega_2.

    ``gap`` is the angular frequency (rad/us) separating Omega_0 and Omega_1.
    """

    gap: float = 2 * np.pi * 200.0
    levels_per_mode: int = LEVELS
    omega0: tuple = field(default=(basis_index(0, 0), basis_index(0, 1),
                                   basis_index(1, 0), basis_index(1, 1)))
    omega1: tuple = field(default=(basis_index(2, 0), basis_index(2, 1),
                                   basis_index(1, 2), basis_index(0, 2)))
    omega2: tuple = field(default=(basis_index(2, 2),))

    def __post_init__(self):
        if self.levels_per_mode != LEVELS:
            raise ValueError("only 3 levels per mode are supported")
        if not self.gap > 0:
            raise ValueError("gap must be positive")
        flat = sorted(self.omega0 + self.omega1 + self.omega2)
        if flat != list(range(DIM)):
            raise ValueError("subspaces must partition the 9 basis states")

    @classmethod
    def for_eta(cls, eta_mhz: float) -> "SubspaceLayout":
        return cls(gap=2 * np.pi * float(eta_mhz))

    @property
    def subspaces(self) -> tuple:
        return (self.omega0, self.omega1, self.omega2)

    def labels(self) -> np.ndarray:
        """Subspace index (0, 1, 2) of every basis state."""
        lab = np.empty(DIM, dtype=int)
        for alpha, idx in enumerate(self.subspaces):
            lab[list(idx)] = alpha
        return lab

    def same_block_mask(self) -> np.ndarray:
        lab = self.labels()
        return lab[:, None] == lab[None, :]


DEFAULT_LAYOUT = SubspaceLayout()


def _check_mode(mode: int) -> None:
    if mode not in (1, 2):
        raise ValueError(f"mode must be 1 or 2, got {mode!r}")


def annihilation(mode: int, layout: SubspaceLayout | None = None) -> np.ndarray:
    """Lowering operator of ``mode`` on the truncated tensor-product space."""
    _check_mode(mode)
    a = np.diag(np.sqrt(np.arange(1, LEVELS, dtype=float)), k=1).astype(complex)
    eye = np.eye(LEVELS, dtype=complex)
    return np.kron(a, eye) if mode == 1 else np.kron(eye, a)


def creation(mode: int, layout: SubspaceLayout | None = None) -> np.ndarray:
    return annihilation(mode, layout).conj().T


def number_op(mode: int, layout: SubspaceLayout | None = None) -> np.ndarray:
    a = annihilation(mode, layout)
    return a.conj().T @ a


def projector(alpha: int, layout: SubspaceLayout | None = None) -> np.ndarray:
    layout = layout or DEFAULT_LAYOUT
    p = np.zeros((DIM, DIM), dtype=complex)
    idx = list(layout.subspaces[alpha])
    p[idx, idx] = 1.0
    return p


def block_split(H: np.ndarray, layout: SubspaceLayout | None = None):
    """Split ``H`` into intra-subspace and inter-subspace parts.

    Works on stacks of matrices (leading batch axes). The two parts add up to
    ``H`` exactly since each entry lands in exactly one of them.
    """
    layout = layout or DEFAULT_LAYOUT
    H = np.asarray(H)
    if H.shape[-2:] != (DIM, DIM):
        raise ValueError(f"expected (..., 9, 9) input, got {H.shape}")
    if not is_hermitian(H):
        warnings.warn("block_split received a non-Hermitian matrix", RuntimeWarning)
    mask = layout.same_block_mask()
    diag = np.where(mask, H, 0)
    off = np.where(mask, 0, H)
    return diag, off


def dagger(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


def spectral_norm(A: np.ndarray) -> np.ndarray:
    """Largest singular value, vectorised over leading axes."""
    A = np.asarray(A)
    if A.ndim == 2:
        return float(np.linalg.norm(A, 2))
    return np.linalg.svd(A, compute_uv=False)[..., 0]


def is_hermitian(A: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    A = np.asarray(A)
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    return bool(np.max(np.abs(A - dagger(A)), initial=0.0) <= tol * scale)


def is_unitary(U: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    U = np.asarray(U)
    eye = np.eye(U.shape[-1])
    return bool(np.max(np.abs(dagger(U) @ U - eye), initial=0.0) <= tol)


# single-qubit Paulis with Z|0> = +|0>
PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def two_qubit(op1: np.ndarray, op2: np.ndarray) -> np.ndarray:
    """Tensor product with qubit 1 as the major index (|q1 q2> ordering)."""
    return np.kron(op1, op2)
