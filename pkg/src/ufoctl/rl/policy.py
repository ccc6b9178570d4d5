"""Diagonal Gaussian policy with a state-independent learned log-std."""
from __future__ import annotations

import numpy as np

from .nets import HIDDEN, MLP

LOG_2PI = np.log(2 * np.pi)


class GaussianPolicy:
    """a ~ N(mu(s), diag(exp(2 log_std))). ``flat`` = [mlp params, log_std]."""

    def __init__(self, obs_dim: int, act_dim: int = 7, hidden=HIDDEN,
                 rng: np.random.Generator | None = None, init_log_std: float = -0.5):
        self.net = MLP((obs_dim, *hidden, act_dim), rng, out_scale=0.01)
        self.log_std = np.full(act_dim, float(init_log_std))
        self.obs_dim, self.act_dim = obs_dim, act_dim

    @property
    def n_params(self) -> int:
        return self.net.n_params + self.act_dim

    def get_flat(self) -> np.ndarray:
        return np.concatenate([self.net.params, self.log_std])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.n_params,):
            raise ValueError("flat parameter vector has the wrong length")
        self.net.params = flat[:self.net.n_params].copy()
        self.log_std = flat[self.net.n_params:].copy()

    def split(self, flat: np.ndarray):
        return flat[:self.net.n_params], flat[self.net.n_params:]

    def copy(self) -> "GaussianPolicy":
        other = GaussianPolicy.__new__(GaussianPolicy)
        other.net = MLP(self.net.sizes)
        other.net.params = self.net.params.copy()
        other.log_std = self.log_std.copy()
        other.obs_dim, other.act_dim = self.obs_dim, self.act_dim
        return other

    def mean(self, obs: np.ndarray, flat: np.ndarray | None = None) -> np.ndarray:
        p = None if flat is None else self.split(flat)[0]
        return self.net.forward(obs, p)

    def sample(self, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        mu = self.mean(obs)
        return mu + np.exp(self.log_std) * rng.standard_normal(mu.shape)

    def log_prob(self, obs, act, flat: np.ndarray | None = None) -> np.ndarray:
        mu = self.mean(obs, flat)
        log_std = self.log_std if flat is None else self.split(flat)[1]
        z = (np.asarray(act) - mu) / np.exp(log_std)
        return -0.5 * np.sum(z ** 2, axis=-1) - np.sum(log_std) - 0.5 * self.act_dim * LOG_2PI

    def entropy(self, flat: np.ndarray | None = None) -> float:
        log_std = self.log_std if flat is None else self.split(flat)[1]
        return float(np.sum(log_std) + 0.5 * self.act_dim * (1.0 + LOG_2PI))

    def grad_log_prob_weighted(self, obs, act, weights) -> np.ndarray:
        """sum_i w_i grad log pi(a_i|s_i), flat."""
        mu, acts = self.net.forward(obs, cache=True)
        var = np.exp(2 * self.log_std)
        diff = np.asarray(act) - mu
        w = np.asarray(weights)[:, None]
        g_net = self.net.vjp(acts, w * diff / var)
        g_std = np.sum(w * (diff ** 2 / var - 1.0), axis=0)
        return np.concatenate([g_net, g_std])


def kl_gaussian(mu_old, log_std_old, mu_new, log_std_new) -> np.ndarray:
    """KL(old || new) per row for diagonal Gaussians."""
    var_old = np.exp(2 * np.asarray(log_std_old))
    var_new = np.exp(2 * np.asarray(log_std_new))
    return np.sum(log_std_new - log_std_old
                  + (var_old + (np.asarray(mu_old) - mu_new) ** 2) / (2 * var_new) - 0.5,
                  axis=-1)


def mean_kl(policy: GaussianPolicy, obs, flat_old, flat_new) -> float:
    mu_old = policy.mean(obs, flat_old)
    mu_new = policy.mean(obs, flat_new)
    return float(np.mean(kl_gaussian(mu_old, policy.split(flat_old)[1],
                                     mu_new, policy.split(flat_new)[1])))


def fisher_vector_product(policy: GaussianPolicy, obs, v: np.ndarray,
                          damping: float = 0.0) -> np.ndarray:
    """Hessian of the mean KL at the current parameters applied to ``v``.

    For a state-independent std the Fisher matrix is block diagonal:
    J^T diag(1/var) J / n for the mean network and 2 I for the log-std.
    """
    v_net, v_std = policy.split(v)
    _, acts = policy.net.forward(obs, cache=True)
    jv = policy.net.jvp(obs, v_net)
    var = np.exp(2 * policy.log_std)
    n = np.asarray(obs).shape[0]
    f_net = policy.net.vjp(acts, jv / var) / n
    f_std = 2.0 * v_std
    return np.concatenate([f_net, f_std]) + damping * v
