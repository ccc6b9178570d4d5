"""Average gate fidelity of noisy control channels and fidelity-spread statistics."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import dynamics, qops
from .control import ControlTrajectory, NoiseModel
from .gmon import GmonModel

D = 4
REPORT_COLUMNS = ("sigma_mhz", "f_ave", "sigma_fidelity", "n_samples", "seed")


def pauli_basis() -> np.ndarray:
    """The 16 two-qubit Pauli products, shape (16, 4, 4), Tr(P_j P_k^dag) = 4 delta_jk."""
    singles = (qops.PAULI_I, qops.PAULI_X, qops.PAULI_Y, qops.PAULI_Z)
    return np.array([np.kron(a, b) for a, b in itertools.product(singles, singles)])


_PAULIS = pauli_basis()


@dataclass(frozen=True)
class SampledChannel:
    """E(rho) = mean_i K_i rho K_i^dag over sampled Omega_0 blocks."""

    operators: np.ndarray

    def __post_init__(self):
        ops = np.asarray(self.operators, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.shape[1:] != (D, D) or ops.shape[0] < 1:
            raise ValueError("expected a non-empty stack of 4x4 operators")
        object.__setattr__(self, "operators", ops)

    def __len__(self) -> int:
        return self.operators.shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        K = self.operators
        out = np.einsum("kij,...jl,kml->...im", K, rho, K.conj()) / len(self)
        return out

    def trace_defect(self) -> float:
        """1 - mean trace of E(I/4): the mean population lost from Omega_0."""
        K = self.operators
        kept = np.einsum("kij,kij->", K.conj(), K).real / (len(self) * D)
        return float(1.0 - kept)

    def state_fidelities(self, psi: np.ndarray, target: np.ndarray) -> np.ndarray:
        """<psi|V^dag E(|psi><psi|) V|psi> for a stack of kets (n, 4)."""
        phi = psi @ np.asarray(target).T              # V|psi>
        kpsi = np.einsum("kij,nj->nki", self.operators, psi)
        amp = np.einsum("ni,nki->nk", phi.conj(), kpsi)
        return (np.abs(amp) ** 2).mean(axis=1)


@dataclass(frozen=True)
class DepolarizingChannel:
    """E(rho) = (1 - p) rho + p Tr(rho) I / 4."""

    p: float

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho)
        tr = np.trace(rho, axis1=-2, axis2=-1)
        return (1 - self.p) * rho + self.p * tr[..., None, None] * np.eye(D) / D

    def state_fidelities(self, psi: np.ndarray, target: np.ndarray) -> np.ndarray:
        phi = psi @ np.asarray(target).T
        overlap = np.abs(np.einsum("ni,ni->n", phi.conj(), psi)) ** 2
        return (1 - self.p) * overlap + self.p / D


def average_fidelity_nielsen(channel, target: np.ndarray) -> float:
    """[sum_j Tr(V P_j^dag V^dag E(P_j)) + d^2] / (d^2 (d + 1)) over the 16 Paulis."""
    V = np.asarray(getattr(target, "matrix", target))
    images = channel.apply(_PAULIS)
    lhs = V @ np.conj(np.swapaxes(_PAULIS, -1, -2)) @ V.conj().T
    s = np.einsum("kij,kji->", lhs, images)
    return float(((s + D * D) / (D * D * (D + 1))).real)


def random_states(n: int, rng: np.random.Generator, dim: int = D) -> np.ndarray:
    """Haar-random pure states from normalised complex Gaussian vectors."""
    z = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_average_fidelity(channel, target: np.ndarray, n_states: int = 100_000,
                          rng: np.random.Generator | None = None, chunk: int = 20_000):
    """Monte-Carlo mean of <psi|V^dag E(psi) V|psi>; returns (mean, standard error)."""
    V = np.asarray(getattr(target, "matrix", target))
    rng = rng if rng is not None else np.random.default_rng(0)
    vals = []
    left = n_states
    while left > 0:
        m = min(chunk, left)
        vals.append(channel.state_fidelities(random_states(m, rng), V))
        left -= m
    vals = np.concatenate(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.size))


def sampled_unitaries(traj: ControlTrajectory, model: GmonModel, noise: NoiseModel,
                      n_samples: int, space: str = "full") -> np.ndarray:
    """Full propagators for ``n_samples`` independent noise draws (sample i uses noise.spawn(i))."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    out = []
    for i in range(n_samples):
        nm = noise.spawn(i) if noise.sigma_mhz > 0 else None
        out.append(dynamics.propagate(traj, model, nm, space).unitary)
    return np.array(out)


def noisy_channel(traj: ControlTrajectory, model: GmonModel, noise: NoiseModel,
                  n_samples: int, space: str = "full") -> SampledChannel:
    Us = sampled_unitaries(traj, model, noise, n_samples, space)
    return SampledChannel(dynamics.qubit_block(Us))


@dataclass(frozen=True)
class EvaluationReport:
    f_ave: float
    f_ave_nielsen: float
    f_ave_haar: float
    sigma_fidelity: float
    per_sample: tuple = field(default=())
    sigma_mhz: float = 0.0
    n_samples: int = 0
    seed: int = 0
    leakage_population: float = 0.0

    def to_row(self) -> dict:
        return {"sigma_mhz": self.sigma_mhz, "f_ave": self.f_ave,
                "sigma_fidelity": self.sigma_fidelity, "n_samples": self.n_samples,
                "seed": self.seed}

    def to_dict(self) -> dict:
        d = self.to_row()
        d.update(f_ave_nielsen=self.f_ave_nielsen, f_ave_haar=self.f_ave_haar,
                 leakage_population=self.leakage_population,
                 per_sample=list(self.per_sample))
        return d


def fidelity_variance(traj: ControlTrajectory, model: GmonModel, target, sigma: float,
                      n: int = 60, seed: int = 0, space: str = "full",
                      n_haar: int = 0) -> EvaluationReport:
    """Spread of the gate fidelity over ``n`` noise draws.

    ``sigma_fidelity`` is the population variance E[(F - F_ave)^2]. The
    Haar Monte-Carlo average is computed only when ``n_haar`` > 0.
    """
    if n < 2:
        raise ValueError("need at least two samples")
    V = np.asarray(getattr(target, "matrix", target))
    noise = NoiseModel(sigma_mhz=sigma, seed=seed)
    Us = sampled_unitaries(traj, model, noise, n, space)
    blocks = dynamics.qubit_block(Us)
    fids = np.asarray(dynamics.gate_fidelity(blocks, V), dtype=float).reshape(n)
    f_ave = float(fids.mean())
    var = float(np.mean((fids - f_ave) ** 2))
    channel = SampledChannel(blocks)
    f_haar = float("nan")
    if n_haar > 0:
        f_haar = haar_average_fidelity(channel, V, n_haar, np.random.default_rng(seed))[0]
    return EvaluationReport(f_ave, average_fidelity_nielsen(channel, V), f_haar, var,
                            tuple(float(f) for f in fids), float(sigma), n, int(seed),
                            channel.trace_defect())


@dataclass(frozen=True)
class RobustnessSpec:
    epsilon0: float = 0.007
    sigma_grid: tuple = (0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5)
    samples_per_point: int = 60

    def __post_init__(self):
        if not self.epsilon0 > 0:
            raise ValueError("epsilon0 must be positive")
        grid = tuple(float(s) for s in self.sigma_grid)
        if list(grid) != sorted(grid) or any(s < 0 for s in grid):
            raise ValueError("sigma_grid must be sorted and nonnegative")
        if self.samples_per_point < 2:
            raise ValueError("samples_per_point must be >= 2")
        object.__setattr__(self, "sigma_grid", grid)


def robustness_check(report: EvaluationReport, f_ideal: float,
                     spec: RobustnessSpec = RobustnessSpec()) -> bool:
    """|average gate fidelity - f_ideal| < epsilon0."""
    return bool(abs(report.f_ave_nielsen - f_ideal) < spec.epsilon0)
