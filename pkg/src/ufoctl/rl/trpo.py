"""Batch collection and trust-region policy updates."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..baseline import AdamState, adam_step
from ..objective import CostBreakdown
from .env import ACT_DIM, EnvConfig, GmonEnv
from .nets import HIDDEN, MLP
from .policy import GaussianPolicy, fisher_vector_product, mean_kl

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrpoConfig:
    trust_region_kl: float = 0.01
    discount: float = 0.99
    gae_lambda: float | None = None
    batch_steps: int = 2048
    cg_iters: int = 10
    cg_damping: float = 0.1
    backtrack_iters: int = 10
    backtrack_ratio: float = 0.5
    value_lr: float = 1e-3
    value_epochs: int = 10
    value_minibatch: int = 256
    init_log_std: float = -0.5
    hidden: tuple = HIDDEN
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class Episode:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    logp: np.ndarray
    knobs: np.ndarray
    etas: np.ndarray
    terminal_cost: CostBreakdown
    length: int

    @property
    def ret(self) -> float:
        return float(self.rewards.sum())


def episode_rngs(seed: int, iteration: int, index: int):
    """Independent (action, noise) generators keyed by (seed, iteration, episode)."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(iteration), int(index)])
    a, b = ss.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


def run_episode(policy: GaussianPolicy, env: GmonEnv, act_rng=None, noise_rng=None,
                deterministic: bool = False) -> Episode:
    obs_l, act_l, rew_l = [], [], []
    obs = env.reset(noise_rng)
    while not env.done:
        a = policy.mean(obs[None])[0] if deterministic else policy.sample(obs[None], act_rng)[0]
        obs_l.append(obs)
        act_l.append(a)
        obs, r, _ = env.step(a)
        rew_l.append(r)
    O, A = np.array(obs_l), np.array(act_l)
    return Episode(O, A, np.array(rew_l), policy.log_prob(O, A), np.array(env.knobs),
                   np.array(env.etas), env.final_cost, len(rew_l))


def sample_batch(policy: GaussianPolicy, env_config: EnvConfig, n_steps: int,
                 seed: int = 0, iteration: int = 0) -> list:
    """Whole episodes until at least ``n_steps`` transitions are collected."""
    if n_steps <= 0:
        raise ValueError("n_steps must be positive")
    env = GmonEnv(env_config)
    episodes, total, idx = [], 0, 0
    while total < n_steps:
        act_rng, noise_rng = episode_rngs(seed, iteration, idx)
        ep = run_episode(policy, env, act_rng, noise_rng)
        episodes.append(ep)
        total += ep.length
        idx += 1
    return episodes


def discounted_cumsum(x: np.ndarray, gamma: float) -> np.ndarray:
    out = np.zeros(len(x))
    acc = 0.0
    for i in range(len(x) - 1, -1, -1):
        acc = x[i] + gamma * acc
        out[i] = acc
    return out


def advantages(episodes: list, value_net: MLP, discount: float, lam: float | None):
    """(advantages, value targets); episodes end in a true terminal state."""
    advs, targets = [], []
    for ep in episodes:
        rtg = discounted_cumsum(ep.rewards, discount)
        v = value_net.forward(ep.obs)[:, 0]
        if lam is None:
            adv = rtg - v
        else:
            v_next = np.append(v[1:], 0.0)
            delta = ep.rewards + discount * v_next - v
            adv = discounted_cumsum(delta, discount * lam)
        advs.append(adv)
        targets.append(rtg)
    return np.concatenate(advs), np.concatenate(targets)


def conjugate_gradient(Avp, b: np.ndarray, iters: int = 10, tol: float = 1e-10) -> np.ndarray:
    x = np.zeros_like(b)
    r = b.copy()
    p = b.copy()
    rr = r @ r
    for _ in range(iters):
        Ap = Avp(p)
        alpha = rr / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        if rr_new < tol:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


@dataclass
class UpdateInfo:
    accepted: bool
    kl: float
    improvement: float
    step_fraction: float
    entropy: float


def trpo_update(policy: GaussianPolicy, obs, actions, adv, cfg: TrpoConfig) -> UpdateInfo:
    """In-place natural-gradient step with backtracking; unchanged on failure."""
    obs, actions = np.asarray(obs), np.asarray(actions)
    adv = np.asarray(adv, dtype=float)
    n = len(adv)
    old = policy.get_flat()
    logp_old = policy.log_prob(obs, actions)

    def surrogate(flat):
        return float(np.mean(np.exp(policy.log_prob(obs, actions, flat) - logp_old) * adv))

    g = policy.grad_log_prob_weighted(obs, actions, adv / n)
    if not np.any(g):
        return UpdateInfo(False, 0.0, 0.0, 0.0, policy.entropy())

    def fvp(v):
        return fisher_vector_product(policy, obs, v, cfg.cg_damping)

    x = conjugate_gradient(fvp, g, cfg.cg_iters)
    shs = 0.5 * x @ fvp(x)
    if not shs > 0:
        return UpdateInfo(False, 0.0, 0.0, 0.0, policy.entropy())
    full_step = x * np.sqrt(cfg.trust_region_kl / shs)
    base = surrogate(old)
    frac = 1.0
    for _ in range(cfg.backtrack_iters):
        cand = old + frac * full_step
        kl = mean_kl(policy, obs, old, cand)
        improve = surrogate(cand) - base
        if np.isfinite(kl) and kl <= 1.5 * cfg.trust_region_kl and improve > 0:
            policy.set_flat(cand)
            return UpdateInfo(True, kl, improve, frac, policy.entropy())
        frac *= cfg.backtrack_ratio
    log.info("line search failed; policy unchanged")
    return UpdateInfo(False, 0.0, 0.0, 0.0, policy.entropy())


def fit_value(value_net: MLP, obs, targets, cfg: TrpoConfig, state: AdamState,
              rng: np.random.Generator) -> float:
    """Minibatch Adam regression of V(s) on the value targets; returns final MSE."""
    obs, targets = np.asarray(obs), np.asarray(targets)
    n = len(targets)
    for _ in range(cfg.value_epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.value_minibatch):
            idx = order[start:start + cfg.value_minibatch]
            pred, acts = value_net.forward(obs[idx], cache=True)
            err = pred[:, 0] - targets[idx]
            grad = value_net.vjp(acts, (2.0 / len(idx)) * err[:, None])
            value_net.params, state = adam_step(value_net.params, grad, state)
    return float(np.mean((value_net.forward(obs)[:, 0] - targets) ** 2))


@dataclass
class Agent:
    policy: GaussianPolicy
    value: MLP
    value_opt: AdamState
    cfg: TrpoConfig
    iteration: int = 0

    @classmethod
    def create(cls, obs_dim: int, cfg: TrpoConfig) -> "Agent":
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xA11CE]))
        policy = GaussianPolicy(obs_dim, ACT_DIM, cfg.hidden, rng, cfg.init_log_std)
        value = MLP((obs_dim, *cfg.hidden, 1), rng)
        return cls(policy, value, AdamState(lr=cfg.value_lr), cfg)


@dataclass
class IterationLog:
    iteration: int
    mean_return: float
    mean_infidelity: float
    mean_leakage: float
    mean_boundary: float
    mean_time: float
    kl: float
    entropy: float
    n_episodes: int
    accepted: bool
    best_cost: float

    def to_row(self) -> dict:
        return asdict(self)


LOG_COLUMNS = tuple(IterationLog.__dataclass_fields__)


@dataclass
class TrainResult:
    agent: Agent
    logs: list = field(default_factory=list)
    best_episode: Episode | None = None


def train_iteration(agent: Agent, env_config: EnvConfig):
    cfg = agent.cfg
    it = agent.iteration
    episodes = sample_batch(agent.policy, env_config, cfg.batch_steps, cfg.seed, it)
    obs = np.concatenate([e.obs for e in episodes])
    acts = np.concatenate([e.actions for e in episodes])
    adv, targets = advantages(episodes, agent.value, cfg.discount, cfg.gae_lambda)
    adv_n = (adv - adv.mean()) / (adv.std() + 1e-8)
    info = trpo_update(agent.policy, obs, acts, adv_n, cfg)
    vrng = np.random.default_rng(np.random.SeedSequence([cfg.seed, it, 0xBEEF]))
    fit_value(agent.value, obs, targets, cfg, agent.value_opt, vrng)
    agent.iteration += 1
    costs = [e.terminal_cost for e in episodes]
    best = min(episodes, key=lambda e: e.terminal_cost.total)
    row = IterationLog(it, float(np.mean([e.ret for e in episodes])),
                       float(np.mean([c.infidelity_term for c in costs])),
                       float(np.mean([c.leakage_term for c in costs])),
                       float(np.mean([c.boundary_term for c in costs])),
                       float(np.mean([c.time_term for c in costs])),
                       info.kl, info.entropy, len(episodes), info.accepted,
                       float(best.terminal_cost.total))
    return row, info, best


def train(env_config: EnvConfig, cfg: TrpoConfig, iterations: int, agent: Agent | None = None,
          callback=None) -> TrainResult:
    agent = agent or Agent.create(env_config.obs_dim, cfg)
    result = TrainResult(agent)
    for _ in range(iterations):
        row, info, best = train_iteration(agent, env_config)
        result.logs.append(row)
        if (result.best_episode is None
                or best.terminal_cost.total < result.best_episode.terminal_cost.total):
            result.best_episode = best
        if callback is not None and callback(row) is False:
            break
    return result


def greedy_rollout(agent: Agent, env_config: EnvConfig) -> Episode:
    """Mean-action episode in the noise-free version of the environment."""
    env = GmonEnv(replace(env_config, noise_sigma=0.0))
    return run_episode(agent.policy, env, deterministic=True)


def curriculum_advance(alpha: float, success: bool, step: float = 0.1):
    """Next alpha of the adaptive sweep: alpha + step whether or not the
    current point succeeded (the flag is passed through), clamped at pi."""
    if not 0.0 <= alpha <= np.pi:
        raise ValueError("alpha must lie in [0, pi]")
    return float(min(alpha + step, np.pi)), bool(success)
