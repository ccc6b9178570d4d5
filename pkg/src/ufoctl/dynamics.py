"""Time-ordered propagation, gate fidelity and the exact leakage oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import gmon, qops, tswt
from .control import ControlTrajectory, NoiseModel, perturb
from .gmon import GmonModel

OMEGA0 = list(qops.DEFAULT_LAYOUT.omega0)


@dataclass(frozen=True)
class PropagationResult:
    unitary: np.ndarray
    per_step_unitaries: np.ndarray | None = None
    frame: str = "bare"


def step_unitaries(H: np.ndarray, dt_us: float) -> np.ndarray:
    """exp(-i H dt) for a stack of Hermitian generators via eigendecomposition."""
    w, v = np.linalg.eigh(H)
    phase = np.exp(-1j * dt_us * w)
    return (v * phase[..., None, :]) @ qops.dagger(v)


def chain(steps: np.ndarray) -> np.ndarray:
    """Time-ordered product U_{N-1} ... U_1 U_0 along axis -3."""
    steps = np.asarray(steps)
    U = steps[..., 0, :, :]
    for k in range(1, steps.shape[-3]):
        U = steps[..., k, :, :] @ U
    return U


def trajectory_hamiltonians(traj: ControlTrajectory, model: GmonModel,
                            noise: NoiseModel | None = None, space: str = "full"):
    """Per-step generators (N, d, d) after optional noise injection."""
    eta_seq = None
    if noise is not None:
        traj, eta_seq = perturb(traj, model, noise)
    if space == "full":
        return gmon.hamiltonians(traj.knobs, model, eta_seq)
    if space == "qubit":
        return gmon.qubit_hamiltonians(traj.knobs)
    raise ValueError(f"unknown space {space!r}")


def propagate(traj: ControlTrajectory, model: GmonModel, noise: NoiseModel | None = None,
              space: str = "full", keep_steps: bool = False) -> PropagationResult:
    H = trajectory_hamiltonians(traj, model, noise, space)
    if not np.all(np.isfinite(H)):
        raise FloatingPointError("non-finite Hamiltonian entries")
    steps = step_unitaries(H, traj.dt_us)
    return PropagationResult(chain(steps), steps if keep_steps else None, "bare")


def propagate_interpolated(traj: ControlTrajectory, model: GmonModel,
                           substeps: int = 20) -> np.ndarray:
    """Propagator of the piecewise-linear interpolant of the knob samples.

    Sample k sits at t = k dt, so the evolution spans (N - 1) dt. Used as a
    smooth-control reference for the leakage bound, whose derivative terms
    assume a differentiable Hamiltonian.
    """
    n = traj.n_steps
    if n < 2:
        raise ValueError("need at least 2 samples to interpolate")
    t = (np.arange((n - 1) * substeps) + 0.5) / substeps
    grid = np.arange(n)
    knobs = np.stack([np.interp(t, grid, traj.knobs[:, c]) for c in range(traj.knobs.shape[1])],
                     axis=1)
    H = gmon.hamiltonians(knobs, model)
    return chain(step_unitaries(H, traj.dt_us / substeps))


def qubit_block(U: np.ndarray) -> np.ndarray:
    """Omega_0 block of a 9x9 operator; 4x4 input is returned unchanged."""
    U = np.asarray(U)
    if U.shape[-1] == 4:
        return U
    return U[..., OMEGA0, :][..., :, OMEGA0]


def gate_fidelity(U: np.ndarray, target: np.ndarray) -> float:
    """|Tr(U^dag V)|^2 / 16, invariant under global phase."""
    U, V = np.asarray(U), np.asarray(target)
    if U.shape[-2:] != (4, 4) or V.shape[-2:] != (4, 4):
        raise ValueError("gate_fidelity expects 4x4 operators")
    tr = np.einsum("...ij,...ij->...", U.conj(), V)
    f = np.abs(tr) ** 2 / 16.0
    return float(f) if np.ndim(f) == 0 else f


def qubit_block_unitarity_defect(U: np.ndarray) -> float:
    """1 - smallest singular value of the Omega_0 block."""
    s = np.linalg.svd(qubit_block(U), compute_uv=False)
    return float(np.clip(1.0 - s[-1], 0.0, 1.0))


@dataclass(frozen=True)
class LeakageReport:
    amplitude_max: float
    amplitude_mean: float
    population_max: float
    population_mean: float
    frame: str

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("amplitude_max", "amplitude_mean",
                                               "population_max", "population_mean")}


def dressed_unitary(U: np.ndarray, traj: ControlTrajectory, model: GmonModel) -> np.ndarray:
    """e^{-S(T)} U e^{S(0)} with S = S1 + S2 from the second-order transformation."""
    stack = tswt.trajectory_frames(traj, model)
    s_start = stack.s1[0] + stack.s2[0]
    s_end = stack.s1[-1] + stack.s2[-1]
    return expm(-s_end) @ U @ expm(s_start)


def leakage_report(U: np.ndarray, frame: str = "bare") -> LeakageReport:
    U = np.asarray(U)
    outside = [i for i in range(qops.DIM) if i not in OMEGA0]
    cols = U[:, OMEGA0]
    amp = np.abs(cols[outside, :])
    amp_sum = amp.sum(axis=0)
    pop_sum = (amp ** 2).sum(axis=0)
    return LeakageReport(float(amp_sum.max()), float(amp_sum.mean()),
                         float(pop_sum.max()), float(pop_sum.mean()), frame)


def exact_leakage(traj: ControlTrajectory, model: GmonModel, frame: str = "bare",
                  report: bool = False):
    """Leakage amplitude sum out of Omega_0, maximised over computational inputs.

    With ``report=True`` a ``LeakageReport`` (max/mean, amplitude/population)
    is returned instead of the scalar.
    """
    U = propagate(traj, model).unitary
    if frame == "dressed":
        U = dressed_unitary(U, traj, model)
    elif frame != "bare":
        raise ValueError(f"unknown frame {frame!r}")
    rep = leakage_report(U, frame)
    return rep if report else rep.amplitude_max
