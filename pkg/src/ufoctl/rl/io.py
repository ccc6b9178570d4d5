"""Checkpoint and training-log persistence."""
from __future__ import annotations

import csv
import json

import numpy as np

from ..baseline import AdamState
from .nets import MLP
from .policy import GaussianPolicy
from .trpo import LOG_COLUMNS, Agent, TrpoConfig

CHECKPOINT_VERSION = 1


def agent_to_dict(agent: Agent, config_hash: str = "") -> dict:
    p = agent.policy
    return {
        "version": CHECKPOINT_VERSION,
        "config_hash": config_hash,
        "seed": agent.cfg.seed,
        "iteration": agent.iteration,
        "trpo": agent.cfg.to_dict(),
        "policy": p.net.to_dict(),
        "log_std": p.log_std.tolist(),
        "value": agent.value.to_dict(),
        "value_optimizer": agent.value_opt.to_dict(),
    }


def agent_from_dict(data: dict) -> Agent:
    if data.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {data.get('version')!r}")
    tr = dict(data["trpo"])
    tr["hidden"] = tuple(tr["hidden"])
    cfg = TrpoConfig(**tr)
    net = MLP.from_dict(data["policy"])
    policy = GaussianPolicy.__new__(GaussianPolicy)
    policy.net = net
    policy.log_std = np.asarray(data["log_std"], dtype=float)
    policy.obs_dim, policy.act_dim = net.sizes[0], net.sizes[-1]
    vo = data["value_optimizer"]
    opt = AdamState(vo["lr"], vo["beta1"], vo["beta2"], vo["eps"],
                    None if vo["m"] is None else np.asarray(vo["m"]),
                    None if vo["v"] is None else np.asarray(vo["v"]), vo["step"])
    return Agent(policy, MLP.from_dict(data["value"]), opt, cfg, int(data["iteration"]))


def save_checkpoint(agent: Agent, path, config_hash: str = "") -> None:
    with open(path, "w") as fh:
        json.dump(agent_to_dict(agent, config_hash), fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> Agent:
    with open(path) as fh:
        return agent_from_dict(json.load(fh))


def write_log_csv(rows, path, extra: dict | None = None) -> None:
    """Training log; ``extra`` columns (e.g. config hash, seed) repeat on every row."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*LOG_COLUMNS, *extra])
        for r in rows:
            d = r.to_row()
            w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in LOG_COLUMNS]
                       + list(extra.values()))
