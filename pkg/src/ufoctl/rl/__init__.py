"""Reinforcement-learning environment and trust-region trainer."""
from .env import ACT_DIM, EnvConfig, GmonEnv, action_to_knobs
from .nets import HIDDEN, MLP
from .policy import GaussianPolicy, fisher_vector_product, kl_gaussian, mean_kl
from .trpo import (Agent, Episode, TrpoConfig, curriculum_advance, greedy_rollout,
                   sample_batch, train, train_iteration, trpo_update)

__all__ = ["ACT_DIM", "EnvConfig", "GmonEnv", "action_to_knobs", "HIDDEN", "MLP",
           "GaussianPolicy", "fisher_vector_product", "kl_gaussian", "mean_kl", "Agent",
           "Episode", "TrpoConfig", "curriculum_advance", "greedy_rollout", "sample_batch",
           "train", "train_iteration", "trpo_update"]
