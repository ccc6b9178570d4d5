"""Episodic control environment: one action sets the knobs for one time step."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import dynamics, gmon, tswt
from ..control import ControlTrajectory, FilterConfig, _filter_values
from ..gmon import AMPLITUDE_SLOTS, DEFAULT_RANGE_MHZ, PHASE_SLOTS, GmonModel
from ..objective import (CostBreakdown, UfoWeights, boundary_penalty, make_breakdown,
                         step_reward, terminal_reward)

ACT_DIM = 7


@dataclass(frozen=True)
class EnvConfig:
    target: np.ndarray
    n_max: int = 60
    dt_ns: float = 1.0
    space: str = "full"
    weights: UfoWeights = field(default_factory=UfoWeights)
    model: GmonModel = field(default_factory=GmonModel)
    noise_sigma: float = 0.0
    per_episode_eta: bool = False
    filter: FilterConfig | None = None
    threshold: float = 0.05
    min_steps: int = 3
    reward_mode: str = "per_step"
    full_state: bool = False
    range_mhz: float = DEFAULT_RANGE_MHZ

    def __post_init__(self):
        if self.n_max < self.min_steps or self.min_steps < 3:
            raise ValueError("need n_max >= min_steps >= 3")
        if self.space not in ("full", "qubit"):
            raise ValueError(f"unknown space {self.space!r}")
        if self.reward_mode not in ("per_step", "terminal"):
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")
        if self.filter is not None and self.filter.dt_ns != self.dt_ns:
            raise ValueError("filter dt must match the environment dt")

    @property
    def obs_dim(self) -> int:
        d = 9 if (self.full_state and self.space == "full") else 4
        return 2 * d * d + 1


def action_to_knobs(action: np.ndarray, range_mhz: float = DEFAULT_RANGE_MHZ) -> np.ndarray:
    """Clip to [-1, 1]; amplitudes scale to +/-range, phases map to pi (a + 1)."""
    a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
    k = np.empty(ACT_DIM)
    k[list(AMPLITUDE_SLOTS)] = range_mhz * a[list(AMPLITUDE_SLOTS)]
    k[list(PHASE_SLOTS)] = np.pi * (a[list(PHASE_SLOTS)] + 1.0)
    return k


class GmonEnv:
    def __init__(self, config: EnvConfig):
        self.cfg = config
        self.dt_us = config.dt_ns * 1e-3
        self._target = np.asarray(getattr(config.target, "matrix", config.target))
        self.reset()

    def reset(self, noise_rng: np.random.Generator | None = None) -> np.ndarray:
        cfg = self.cfg
        d = 4 if cfg.space == "qubit" else 9
        self.U = np.eye(d, dtype=complex)
        self.step_index = 0
        self.knobs: list = []
        self.etas: list = []
        self.history = np.zeros((2, ACT_DIM))
        self.tracker = tswt.LeakageTracker(cfg.model, self.dt_us)
        self.noise_rng = noise_rng if noise_rng is not None else np.random.default_rng(0)
        self._eta_episode = None
        self.done = False
        self.final_cost: CostBreakdown | None = None
        return self.observation()

    def observation(self) -> np.ndarray:
        U = self.U if self.cfg.full_state else dynamics.qubit_block(self.U)
        t = self.step_index / self.cfg.n_max
        return np.concatenate([U.real.ravel(), U.imag.ravel(), [t]])

    def _draw(self) -> np.ndarray:
        cfg = self.cfg
        if cfg.noise_sigma == 0:
            return np.zeros(6)
        draw = cfg.noise_sigma * self.noise_rng.standard_normal(6)
        if cfg.per_episode_eta:
            if self._eta_episode is None:
                self._eta_episode = draw[0]
            draw[0] = self._eta_episode
        return draw

    def trajectory(self) -> ControlTrajectory:
        return ControlTrajectory(self.cfg.dt_ns, np.array(self.knobs).reshape(-1, ACT_DIM))

    def cost(self) -> CostBreakdown:
        """UFO cost of the realised prefix (ledger from the incremental tracker)."""
        traj = self.trajectory()
        fid = dynamics.gate_fidelity(dynamics.qubit_block(self.U), self._target)
        return make_breakdown(fid, self.tracker.l_tot(), boundary_penalty(traj),
                              traj.duration_us, self.cfg.weights)

    def step(self, action: np.ndarray):
        if self.done:
            raise RuntimeError("episode finished; call reset()")
        cfg = self.cfg
        if not np.all(np.isfinite(action)):
            raise ValueError("non-finite action")
        proposal = action_to_knobs(action, cfg.range_mhz)
        if cfg.filter is not None:
            proposal = _filter_values(proposal, self.history[1], self.history[0], cfg.filter)
        self.history = np.array([self.history[1], proposal])
        draw = self._draw()
        knob = proposal.copy()
        knob[list(AMPLITUDE_SLOTS)] += draw[1:]
        eta = cfg.model.eta + draw[0]
        self.knobs.append(knob)
        self.etas.append(eta)

        H_full = gmon.hamiltonians(knob, cfg.model, eta)
        H = gmon.qubit_hamiltonians(knob) if cfg.space == "qubit" else H_full
        self.U = dynamics.step_unitaries(H, self.dt_us) @ self.U
        before = self.tracker.integral_term()
        self.tracker.append(H_full)
        self.step_index += 1

        reward = 0.0
        if cfg.reward_mode == "per_step":
            reward = step_reward(cfg.weights, self.dt_us, before, self.tracker.integral_term())
        n = self.step_index
        cost = None
        if n >= cfg.min_steps:
            cost = self.cost()
            self.done = cost.total <= cfg.threshold or n >= cfg.n_max
        if self.done:
            self.final_cost = cost
            if cfg.reward_mode == "terminal":
                reward = -cost.total
            else:
                start, end = self.tracker.boundary_terms()
                reward += terminal_reward(cfg.weights, cost.fidelity,
                                          boundary_penalty(self.trajectory()), None)
                reward -= cfg.weights.beta * (start + end)
        return self.observation(), float(reward), self.done
