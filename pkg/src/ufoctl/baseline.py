"""Adam on the flattened control trajectory with finite-difference gradients."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import dynamics, gmon, tswt
from .control import ControlTrajectory, NoiseModel, draw_noise
from .gmon import AMPLITUDE_SLOTS, DEFAULT_RANGE_MHZ, PHASE_SLOTS, GmonModel
from .objective import UfoWeights, make_breakdown
from .qops import spectral_norm

FD_STEP = 1e-3
DIVERGENCE_LIMIT = 1e6


class DivergenceError(FloatingPointError):
    """Raised when the optimised cost blows past ``DIVERGENCE_LIMIT``."""


@dataclass
class AdamState:
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    step: int = 0

    def to_dict(self) -> dict:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps,
                "step": self.step,
                "m": None if self.m is None else self.m.tolist(),
                "v": None if self.v is None else self.v.tolist()}


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState):
    """One bias-corrected Adam update; returns (new_params, state)."""
    grad = np.asarray(grad, dtype=float)
    if state.m is None:
        state.m = np.zeros_like(grad)
        state.v = np.zeros_like(grad)
    if state.m.shape != grad.shape:
        raise ValueError("moment vectors and gradient differ in shape")
    state.step += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    m_hat = state.m / (1 - state.beta1 ** state.step)
    v_hat = state.v / (1 - state.beta2 ** state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps), state


@dataclass(frozen=True)
class SgdConfig:
    target: np.ndarray
    n_steps: int = 50
    dt_ns: float = 1.0
    space: str = "qubit"
    weights: UfoWeights = field(default_factory=UfoWeights)
    model: GmonModel = field(default_factory=GmonModel)
    noise: NoiseModel | None = None
    n_noise: int = 1
    fd_step: float = FD_STEP


def param_scale(n_steps: int) -> np.ndarray:
    """Per-coordinate scale used to precondition Adam (range for amplitudes, pi for phases)."""
    s = np.empty(7)
    s[list(AMPLITUDE_SLOTS)] = DEFAULT_RANGE_MHZ
    s[list(PHASE_SLOTS)] = np.pi
    return np.tile(s, n_steps)


class TrajectoryCost:
    """UFO cost of one knob array plus exact local finite differences.

    A knob change at step k only alters the step unitary k and the
    transformation frames within two steps of k (plus the end frames when k
    is near an end), so each coordinate is re-evaluated on a short window.
    """

    def __init__(self, cfg: SgdConfig, offset: np.ndarray | None = None, eta_seq=None):
        self.cfg = cfg
        self.model = cfg.model
        self.dt_us = cfg.dt_ns * 1e-3
        n = cfg.n_steps
        self.offset = np.zeros((n, 7)) if offset is None else np.asarray(offset, dtype=float)
        self.eta = np.full(n, self.model.eta) if eta_seq is None else np.asarray(eta_seq, float)
        self.gap = self.model.gap

    # full-space Hamiltonians feed the ledger; propagation may be qubit-only
    def _h_full(self, knobs, eta):
        return gmon.hamiltonians(knobs, self.model, eta)

    def _h_prop(self, knobs, eta):
        if self.cfg.space == "qubit":
            return gmon.qubit_hamiltonians(knobs)
        return gmon.hamiltonians(knobs, self.model, eta)

    def _boundary(self, knobs):
        f, l = knobs[..., 0, :], knobs[..., -1, :]
        b = f[..., 0] ** 2 + l[..., 0] ** 2 + f[..., 3] ** 2 + f[..., 4] ** 2 \
            + l[..., 3] ** 2 + l[..., 4] ** 2
        return b / DEFAULT_RANGE_MHZ ** 2

    def _total(self, fid, start, end, d2sum, boundary):
        w = self.cfg.weights
        integral = d2sum * self.dt_us / self.gap ** 2
        l_tot = start + end + integral
        return (w.chi * (1 - fid) + w.beta * l_tot + w.mu * boundary
                + w.kappa * self.cfg.n_steps * self.dt_us)

    def evaluate(self, knobs: np.ndarray):
        """Cost breakdown of the knob array (noise offset included)."""
        k = np.asarray(knobs, dtype=float) + self.offset
        H = self._h_prop(k, self.eta)
        U = dynamics.chain(dynamics.step_unitaries(H, self.dt_us))
        fid = dynamics.gate_fidelity(dynamics.qubit_block(U), self.cfg.target)
        traj = ControlTrajectory(self.cfg.dt_ns, k)
        ledger = tswt.trajectory_ledger(traj, self.model, self.eta)
        return make_breakdown(fid, ledger.l_tot, float(self._boundary(k)),
                              traj.duration_us, self.cfg.weights)

    def gradient(self, knobs: np.ndarray) -> np.ndarray:
        """Central differences of the total cost, shape (N, 7)."""
        h = self.cfg.fd_step
        k0 = np.asarray(knobs, dtype=float) + self.offset
        n = k0.shape[0]
        if n < 4:
            raise ValueError("local finite differences need at least 4 steps")
        Hp = self._h_prop(k0, self.eta)
        steps = dynamics.step_unitaries(Hp, self.dt_us)
        d = steps.shape[-1]
        prefix = np.empty((n + 1, d, d), dtype=complex)   # prefix[k] = U_{k-1}..U_0
        prefix[0] = np.eye(d)
        for j in range(n):
            prefix[j + 1] = steps[j] @ prefix[j]
        suffix = np.empty((n + 1, d, d), dtype=complex)   # suffix[k] = U_{n-1}..U_k
        suffix[n] = np.eye(d)
        for j in range(n - 1, -1, -1):
            suffix[j] = suffix[j + 1] @ steps[j]
        Hf = self._h_full(k0, self.eta)
        hod = tswt.frames_from_hamiltonians(Hf, self.model, self.dt_us).h_eff_od
        d2 = hod[2:] - 2 * hod[1:-1] + hod[:-2]
        d2n = np.zeros(n)
        d2n[1:-1] = spectral_norm(d2) / self.dt_us ** 2
        V = np.asarray(self.cfg.target)

        # perturbations: index 2c is +h on knob c, 2c+1 is -h
        eye = np.repeat(np.eye(7), 2, axis=0) * np.tile([h, -h], 7)[:, None]
        grad = np.zeros((n, 7))
        for k in range(n):
            rows = k0[k] + eye                                    # (14, 7)
            Hk = self._h_prop(rows, self.eta[k])
            Uk = dynamics.step_unitaries(Hk, self.dt_us)
            U = suffix[k + 1] @ Uk @ prefix[k]
            fid = dynamics.gate_fidelity(dynamics.qubit_block(U), V)

            lo, hi = max(0, k - 3), min(n, k + 4)
            win = np.broadcast_to(k0[lo:hi], (14, hi - lo, 7)).copy()
            win[:, k - lo] = rows
            Hw = self._h_full(win, self.eta[lo:hi])
            hw = tswt.frames_from_hamiltonians(Hw, self.model, self.dt_us).h_eff_od
            local = np.broadcast_to(hod[lo:hi], hw.shape).copy()
            for j in range(lo, hi):
                ok_left = j == 0 or j - 1 >= lo
                ok_right = j == n - 1 or j + 1 < hi
                if ok_left and ok_right:
                    local[:, j - lo] = hw[:, j - lo]
            j_lo, j_hi = max(1, k - 2), min(n - 2, k + 2)
            new_d2n = np.broadcast_to(d2n, (14, n)).copy()
            if j_lo <= j_hi:
                idx = np.arange(j_lo, j_hi + 1) - lo
                dd = local[:, idx + 1] - 2 * local[:, idx] + local[:, idx - 1]
                new_d2n[:, j_lo:j_hi + 1] = spectral_norm(dd) / self.dt_us ** 2
            d2sum = new_d2n[:, 1:-1].sum(axis=1) + new_d2n[:, 1] + new_d2n[:, -2]
            first = local[:, 0] if lo == 0 else np.broadcast_to(hod[0], local[:, 0].shape)
            last = local[:, -1] if hi == n else np.broadcast_to(hod[-1], local[:, -1].shape)
            start = spectral_norm(first) / self.gap
            end = spectral_norm(last) / self.gap
            kk = np.broadcast_to(k0, (14, n, 7)).copy()
            kk[:, k] = rows
            boundary = self._boundary(kk)
            tot = self._total(fid, start, end, d2sum, boundary)
            grad[k] = (tot[0::2] - tot[1::2]) / (2 * h)
        return grad


def _cost_models(cfg: SgdConfig, seed_offset: int = 0) -> list:
    if cfg.noise is None or cfg.noise.sigma_mhz == 0:
        return [TrajectoryCost(cfg)]
    out = []
    for i in range(cfg.n_noise):
        nm = cfg.noise.spawn(seed_offset * cfg.n_noise + i)
        draws = draw_noise(nm.rng(), cfg.n_steps, nm.sigma_mhz, nm.per_episode_eta)
        offset = np.zeros((cfg.n_steps, 7))
        offset[:, list(AMPLITUDE_SLOTS)] = draws[:, 1:]
        out.append(TrajectoryCost(cfg, offset, cfg.model.eta + draws[:, 0]))
    return out


def total_cost(params: np.ndarray, cfg: SgdConfig) -> float:
    knobs = np.asarray(params, dtype=float).reshape(cfg.n_steps, 7)
    models = _cost_models(cfg)
    return float(np.mean([m.evaluate(knobs).total for m in models]))


def cost_gradient(params: np.ndarray, cfg: SgdConfig, method: str = "local") -> np.ndarray:
    """Central finite-difference gradient of the total cost (flattened).

    ``method="direct"`` re-evaluates the whole trajectory for every
    coordinate; ``"local"`` uses the windowed evaluator. They agree to
    rounding.
    """
    params = np.asarray(params, dtype=float)
    if not np.all(np.isfinite(params)):
        raise ValueError("non-finite parameters")
    knobs = params.reshape(cfg.n_steps, 7)
    models = _cost_models(cfg)
    if method == "local":
        g = np.mean([m.gradient(knobs) for m in models], axis=0)
        return g.reshape(-1)
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    h = cfg.fd_step
    g = np.zeros(params.size)
    for i in range(params.size):
        e = np.zeros(params.size)
        e[i] = h
        plus = np.mean([m.evaluate((params + e).reshape(knobs.shape)).total for m in models])
        minus = np.mean([m.evaluate((params - e).reshape(knobs.shape)).total for m in models])
        g[i] = (plus - minus) / (2 * h)
    return g


def clip_params(params: np.ndarray) -> np.ndarray:
    k = np.array(params, dtype=float).reshape(-1, 7)
    amp = list(AMPLITUDE_SLOTS)
    k[:, amp] = np.clip(k[:, amp], -DEFAULT_RANGE_MHZ, DEFAULT_RANGE_MHZ)
    return k.reshape(-1)


@dataclass
class OptimizeResult:
    params: np.ndarray
    best_cost: float
    history: list
    best_history: list
    state: AdamState

    def trajectory(self, dt_ns: float) -> ControlTrajectory:
        return ControlTrajectory(dt_ns, self.params.reshape(-1, 7))


def adam_optimize(init_params: np.ndarray, cfg: SgdConfig, iters: int,
                  state: AdamState | None = None, callback=None) -> OptimizeResult:
    """Adam in preconditioned coordinates x = params / scale.

    Amplitudes are clipped to the knob range after each step. The best
    parameters seen are returned; the raw history is kept alongside.
    """
    if iters <= 0:
        raise ValueError("iters must be positive")
    state = state or AdamState()
    scale = param_scale(cfg.n_steps)
    params = clip_params(init_params)
    history, best_hist = [], []
    best_params, best = params.copy(), np.inf
    for it in range(iters):
        cost = total_cost(params, cfg)
        if not np.isfinite(cost) or cost > DIVERGENCE_LIMIT:
            raise DivergenceError(f"cost {cost!r} at iteration {it}")
        history.append(cost)
        if cost < best:
            best, best_params = cost, params.copy()
        best_hist.append(best)
        if callback is not None and callback(it, cost, params) is False:
            break
        grad = cost_gradient(params, cfg) * scale
        x, state = adam_step(params / scale, grad, state)
        params = clip_params(x * scale)
    final = total_cost(params, cfg)
    history.append(final)
    if final < best:
        best, best_params = final, params.copy()
    best_hist.append(best)
    return OptimizeResult(best_params, float(best), history, best_hist, state)


def minimize_function(fun, grad, x0: np.ndarray, iters: int, lr: float = 1e-2):
    """Plain Adam on an arbitrary differentiable function (used for sanity checks)."""
    state = AdamState(lr=lr)
    x = np.asarray(x0, dtype=float)
    for _ in range(iters):
        x, state = adam_step(x, grad(x), state)
    return x, fun(x)


def with_noise(cfg: SgdConfig, noise: NoiseModel, n_noise: int) -> SgdConfig:
    return replace(cfg, noise=noise, n_noise=n_noise)
