"""UFO cost: infidelity, leakage bound, boundary penalty and runtime in one number."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dynamics, gmon, tswt
from .control import ControlTrajectory, boundary_values
from .gmon import DEFAULT_RANGE_MHZ, GmonModel

CSV_COLUMNS = ("infidelity", "leakage", "boundary", "time", "total")


@dataclass(frozen=True)
class UfoWeights:
    chi: float = 10.0
    beta: float = 10.0
    mu: float = 0.2
    kappa: float = 0.1   # per microsecond

    def __post_init__(self):
        for name in ("chi", "beta", "mu", "kappa"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"weight {name} must be finite and >= 0, got {v}")

    def to_dict(self) -> dict:
        return {"chi": self.chi, "beta": self.beta, "mu": self.mu, "kappa": self.kappa}


@dataclass(frozen=True)
class CostBreakdown:
    infidelity_term: float
    leakage_term: float
    boundary_term: float
    time_term: float
    total: float
    fidelity: float = float("nan")

    def to_row(self) -> dict:
        return dict(zip(CSV_COLUMNS, (self.infidelity_term, self.leakage_term,
                                      self.boundary_term, self.time_term, self.total)))

    def to_dict(self) -> dict:
        d = self.to_row()
        d["fidelity"] = self.fidelity
        return d


def boundary_penalty(traj: ControlTrajectory) -> float:
    """g^2 + f1^2 + f2^2 at both ends, in units of the knob range squared."""
    return float(sum(boundary_values(traj))) / DEFAULT_RANGE_MHZ ** 2


def make_breakdown(fidelity: float, ledger_l_tot: float, boundary: float, duration_us: float,
                   weights: UfoWeights) -> CostBreakdown:
    terms = (weights.chi * (1.0 - fidelity), weights.beta * ledger_l_tot,
             weights.mu * boundary, weights.kappa * duration_us)
    return CostBreakdown(*terms, total=float(sum(terms)), fidelity=float(fidelity))


def ufo_cost(traj: ControlTrajectory, model: GmonModel, target, weights: UfoWeights = None,
             ledger: tswt.LeakageLedger | None = None, space: str = "full",
             eta_seq=None, unitary: np.ndarray | None = None) -> CostBreakdown:
    """Cost of a realised trajectory.

    ``target`` is a 4x4 matrix or anything with a ``matrix`` attribute.
    ``eta_seq`` carries per-step anharmonicity when the trajectory was
    produced under noise; ``unitary`` skips propagation when already known.
    """
    weights = weights or UfoWeights()
    V = getattr(target, "matrix", target)
    if unitary is None:
        if space == "full":
            H = gmon.hamiltonians(traj.knobs, model, eta_seq)
        else:
            H = dynamics.trajectory_hamiltonians(traj, model, space=space)
        unitary = dynamics.chain(dynamics.step_unitaries(H, traj.dt_us))
    fid = dynamics.gate_fidelity(dynamics.qubit_block(unitary), V)
    if ledger is None:
        ledger = tswt.trajectory_ledger(traj, model, eta_seq) if traj.n_steps >= 3 else None
    l_tot = ledger.l_tot if ledger is not None else 0.0
    return make_breakdown(fid, l_tot, boundary_penalty(traj), traj.duration_us, weights)


def step_reward(weights: UfoWeights, dt_us: float, integral_before: float,
                integral_after: float) -> float:
    """Non-terminal reward: runtime charge plus the growth of the leakage integral."""
    return -weights.kappa * dt_us - weights.beta * (integral_after - integral_before)


def terminal_reward(weights: UfoWeights, fidelity: float, boundary: float,
                    ledger: tswt.LeakageLedger | None) -> float:
    r = -weights.chi * (1.0 - fidelity) - weights.mu * boundary
    if ledger is not None:
        r -= weights.beta * (ledger.boundary_start + ledger.boundary_end)
    return float(r)


def stepwise_reward(step_index: int, traj_prefix: ControlTrajectory, terminal: bool,
                    model: GmonModel, target, weights: UfoWeights = None,
                    mode: str = "per_step", eta_seq=None, space: str = "full") -> float:
    """Reward for the step that produced ``traj_prefix`` (length step_index + 1).

    Recomputes the prefix ledgers from scratch; the environment uses the
    incremental tracker instead. In ``terminal`` mode the whole cost is paid
    at the last step.
    """
    weights = weights or UfoWeights()
    n = step_index + 1
    if traj_prefix.n_steps != n:
        raise ValueError("prefix length must equal step_index + 1")
    if mode == "terminal":
        if not terminal:
            return 0.0
        return -ufo_cost(traj_prefix, model, target, weights, space=space,
                         eta_seq=eta_seq).total

    def integral(m):
        if m < 3:
            return 0.0
        eta = None if eta_seq is None else np.asarray(eta_seq)[:m]
        return tswt.trajectory_ledger(traj_prefix.prefix(m), model, eta).integral_term

    r = step_reward(weights, traj_prefix.dt_us, integral(n - 1), integral(n))
    if terminal:
        cost = ufo_cost(traj_prefix, model, target, weights, space=space, eta_seq=eta_seq)
        ledger = tswt.trajectory_ledger(traj_prefix, model, eta_seq) if n >= 3 else None
        r += terminal_reward(weights, cost.fidelity, boundary_penalty(traj_prefix), ledger)
    return float(r)


def terminal_check(cost: CostBreakdown, threshold: float = 0.05) -> bool:
    return bool(cost.total <= threshold)
