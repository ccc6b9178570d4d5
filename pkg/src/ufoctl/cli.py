"""Command-line runner: ufoctl {train, sweep-alpha, robustness, leakage-audit, evaluate}."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import baseline, dynamics, evaluate, objective, targets, tswt
from .config import ConfigError, config_hash, load_config
from .control import ControlTrajectory, FilterConfig, NoiseModel
from .gmon import GmonModel
from .rl import io as rl_io
from .rl import trpo
from .rl.env import EnvConfig

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3
CSV_FORMAT_VERSION = 1

log = logging.getLogger("ufoctl")


# -- builders -------------------------------------------------------------------

def build_model(cfg: dict) -> GmonModel:
    return GmonModel(eta=float(cfg["eta_mhz"]))


def build_weights(cfg: dict) -> objective.UfoWeights:
    return objective.UfoWeights(**{k: float(v) for k, v in cfg["weights"].items()})


def build_env(cfg: dict, target, noise_sigma: float | None = None) -> EnvConfig:
    h, r, f = cfg["horizon"], cfg["rl"], cfg["filter"]
    filt = FilterConfig(f["bandwidth_mhz"], h["dt_ns"]) if f["enabled"] else None
    sigma = cfg["noise"]["sigma_mhz"] if noise_sigma is None else noise_sigma
    return EnvConfig(target=target.matrix, n_max=h["n_max"], dt_ns=h["dt_ns"],
                     space=cfg["space"], weights=build_weights(cfg), model=build_model(cfg),
                     noise_sigma=float(sigma),
                     per_episode_eta=cfg["noise"]["per_episode_eta"], filter=filt,
                     threshold=r["threshold"], reward_mode=r["reward_mode"],
                     full_state=r["full_state"])


def build_trpo(cfg: dict) -> trpo.TrpoConfig:
    r = cfg["rl"]
    return trpo.TrpoConfig(trust_region_kl=r["trust_region_kl"], discount=r["discount"],
                           gae_lambda=r["gae_lambda"], batch_steps=r["batch_steps"],
                           init_log_std=r["init_log_std"], seed=cfg["seed"])


def build_sgd(cfg: dict, target) -> baseline.SgdConfig:
    s, n = cfg["sgd"], cfg["noise"]
    noise = None
    if n["sigma_mhz"] > 0:
        noise = NoiseModel(n["sigma_mhz"], cfg["seed"], n["per_episode_eta"])
    return baseline.SgdConfig(target=target.matrix, n_steps=s["n_steps"],
                              dt_ns=cfg["horizon"]["dt_ns"], space=cfg["space"],
                              weights=build_weights(cfg), model=build_model(cfg),
                              noise=noise, n_noise=s["n_noise"])


# -- output helpers -------------------------------------------------------------

def _stamp(cfg: dict) -> dict:
    return {"config_hash": config_hash(cfg), "seed": cfg["seed"]}


def write_json(path: str, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_csv(path: str, columns, rows, stamp: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*columns, "config_hash", "seed", "format_version"])
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns]
                       + [stamp["config_hash"], stamp["seed"], CSV_FORMAT_VERSION])


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def _outdir(cfg: dict) -> str:
    out = cfg["output_dir"]
    os.makedirs(out, exist_ok=True)
    return out


def save_trajectory(path: str, traj: ControlTrajectory, stamp: dict) -> None:
    doc = traj.to_dict()
    doc.update(stamp)
    write_json(path, doc)


def load_trajectory(path: str) -> ControlTrajectory:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read trajectory: {exc.strerror}", None, path) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid trajectory JSON: {exc.msg}", exc.lineno, path) from None
    doc = {k: v for k, v in doc.items() if k not in ("config_hash", "seed")}
    try:
        return ControlTrajectory.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid trajectory: {exc}", None, path) from None


# -- commands -------------------------------------------------------------------

def _train_sgd(cfg: dict, target, stamp: dict, out: str) -> dict:
    sc = build_sgd(cfg, target)
    rng = np.random.default_rng(cfg["seed"])
    init = cfg["sgd"]["init_scale_mhz"] * rng.standard_normal(sc.n_steps * 7)
    res = baseline.adam_optimize(init, sc, cfg["sgd"]["iters"],
                                 baseline.AdamState(lr=cfg["sgd"]["lr"]))
    traj = res.trajectory(sc.dt_ns)
    rows = [{"iteration": i, "cost": c, "best_cost": b}
            for i, (c, b) in enumerate(zip(res.history, res.best_history))]
    write_csv(os.path.join(out, "training.csv"), ("iteration", "cost", "best_cost"), rows, stamp)
    ck = {"optimizer": "sgd", "params": res.params.tolist(), "adam": res.state.to_dict()}
    ck.update(stamp)
    write_json(os.path.join(out, "checkpoint.json"), ck)
    return {"trajectory": traj, "iterations": len(res.history) - 1}


def _train_rl(cfg: dict, target, stamp: dict, out: str) -> dict:
    env = build_env(cfg, target)
    result = trpo.train(env, build_trpo(cfg), cfg["rl"]["iterations"])
    rl_io.save_checkpoint(result.agent, os.path.join(out, "checkpoint.json"),
                          stamp["config_hash"])
    rows = [r.to_row() for r in result.logs]
    write_csv(os.path.join(out, "training.csv"), trpo.LOG_COLUMNS, rows, stamp)
    ep = result.best_episode
    traj = ControlTrajectory(env.dt_ns, ep.knobs)
    return {"trajectory": traj, "iterations": len(result.logs), "eta_seq": ep.etas,
            "greedy": trpo.greedy_rollout(result.agent, env)}


def cmd_train(cfg: dict) -> dict:
    out = _outdir(cfg)
    stamp = _stamp(cfg)
    target = targets.parse_target(cfg["target"])
    if cfg["optimizer"] == "sgd":
        run = _train_sgd(cfg, target, stamp, out)
    else:
        run = _train_rl(cfg, target, stamp, out)
    traj = run["trajectory"]
    model = build_model(cfg)
    eta = run.get("eta_seq")
    cost = objective.ufo_cost(traj, model, target, build_weights(cfg), space=cfg["space"],
                              eta_seq=eta)
    ledger = tswt.trajectory_ledger(traj, model, eta) if traj.n_steps >= 3 else None
    save_trajectory(os.path.join(out, "best_trajectory.json"), traj, stamp)
    summary = {"command": "train", "optimizer": cfg["optimizer"], "target": target.label,
               "cost": cost.to_dict(), "gate_time_ns": traj.duration_ns,
               "ledger": None if ledger is None else ledger.to_dict(),
               "iterations": run["iterations"],
               "artifacts": ["best_trajectory.json", "checkpoint.json", "training.csv",
                             "summary.json"]}
    if "greedy" in run:
        g = run["greedy"]
        summary["greedy_cost"] = g.terminal_cost.to_dict()
        summary["greedy_gate_time_ns"] = g.length * traj.dt_ns
    summary.update(stamp)
    write_json(os.path.join(out, "summary.json"), summary)
    return summary


def cmd_sweep_alpha(cfg: dict) -> dict:
    out = _outdir(cfg)
    stamp = _stamp(cfg)
    sw = cfg["sweep"]
    gamma = float(sw["gamma"])
    model, weights = build_model(cfg), build_weights(cfg)
    threshold = cfg["rl"]["threshold"]
    rows = []
    agent = None
    alpha = float(sw["alpha_start"])
    while alpha <= sw["alpha_stop"] + 1e-9:
        target = targets.n_gate(alpha, gamma)
        if cfg["optimizer"] == "rl":
            env = build_env(cfg, target)
            tc = build_trpo(cfg)
            if agent is None:
                agent = trpo.Agent.create(env.obs_dim, tc)
            res = trpo.train(env, tc, sw["budget_iters"], agent)
            ep = res.best_episode
            traj = ControlTrajectory(env.dt_ns, ep.knobs)
            cost = ep.terminal_cost
        else:
            sc = build_sgd(cfg, target)
            rng = np.random.default_rng([cfg["seed"], len(rows)])
            init = cfg["sgd"]["init_scale_mhz"] * rng.standard_normal(sc.n_steps * 7)
            res = baseline.adam_optimize(init, sc, sw["budget_iters"],
                                         baseline.AdamState(lr=cfg["sgd"]["lr"]))
            traj = res.trajectory(sc.dt_ns)
            cost = objective.ufo_cost(traj, model, target, weights, space=cfg["space"])
        success = objective.terminal_check(cost, threshold)
        row = {"alpha": alpha, "gamma": gamma, "gate_time_ns": traj.duration_ns,
               "success": int(success)}
        row.update(cost.to_row())
        rows.append(row)
        if alpha >= np.pi:
            break
        alpha, _ = trpo.curriculum_advance(alpha, success, sw["step"])
        alpha = round(alpha, 12)
    cols = ("alpha", "gamma", "gate_time_ns", "success", *objective.CSV_COLUMNS)
    write_csv(os.path.join(out, "sweep.csv"), cols, rows, stamp)
    meta = {"command": "sweep-alpha", "reference_ns": targets.synthesis_runtime().to_dict(),
            "n_points": len(rows), "artifacts": ["sweep.csv", "sweep_meta.json"]}
    meta.update(stamp)
    write_json(os.path.join(out, "sweep_meta.json"), meta)
    return meta


def _input_trajectory(cfg: dict, args) -> ControlTrajectory:
    if getattr(args, "trajectory", None):
        return load_trajectory(args.trajectory)
    if getattr(args, "checkpoint", None):
        try:
            agent = rl_io.load_checkpoint(args.checkpoint)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load checkpoint: {exc}", None, args.checkpoint) from None
        env = build_env(cfg, targets.parse_target(cfg["target"]), noise_sigma=0.0)
        if agent.policy.obs_dim != env.obs_dim:
            raise ConfigError("checkpoint observation size does not match the config",
                              None, args.checkpoint)
        ep = trpo.greedy_rollout(agent, env)
        return ControlTrajectory(env.dt_ns, ep.knobs)
    raise ConfigError("this command needs --trajectory or --checkpoint", None, "<arguments>")


def cmd_robustness(cfg: dict, args) -> dict:
    out = _outdir(cfg)
    stamp = _stamp(cfg)
    traj = _input_trajectory(cfg, args)
    target = targets.parse_target(cfg["target"])
    model = build_model(cfg)
    rb = cfg["robustness"]
    spec = evaluate.RobustnessSpec(rb["epsilon0"], tuple(rb["sigma_grid"]), rb["samples"])
    U = dynamics.propagate(traj, model, space=cfg["space"]).unitary
    ideal = evaluate.average_fidelity_nielsen(
        evaluate.SampledChannel(dynamics.qubit_block(U)), target.matrix)
    rows = []
    for i, sigma in enumerate(spec.sigma_grid):
        rep = evaluate.fidelity_variance(traj, model, target, sigma, spec.samples_per_point,
                                         seed=cfg["seed"] * 1000 + i, space=cfg["space"],
                                         n_haar=rb["n_haar"])
        row = rep.to_row()
        row.update(f_ave_nielsen=rep.f_ave_nielsen, f_ave_haar=rep.f_ave_haar,
                   robust=int(evaluate.robustness_check(rep, ideal, spec)))
        rows.append(row)
    cols = (*evaluate.REPORT_COLUMNS, "f_ave_nielsen", "f_ave_haar", "robust")
    write_csv(os.path.join(out, "robustness.csv"), cols, rows, stamp)
    summary = {"command": "robustness", "f_ideal": ideal, "epsilon0": spec.epsilon0,
               "n_points": len(rows), "artifacts": ["robustness.csv", "robustness.json"]}
    summary.update(stamp)
    write_json(os.path.join(out, "robustness.json"), summary)
    return summary


def leakage_audit(traj: ControlTrajectory, model: GmonModel) -> dict:
    stack = tswt.trajectory_frames(traj, model)
    ledger = tswt.leakage_bound(stack, traj.dt_us)
    adiabatic = tswt.adiabatic_bound_for_stack(stack, model)
    U = dynamics.propagate(traj, model).unitary
    bare = dynamics.leakage_report(U, "bare")
    dressed = dynamics.leakage_report(dynamics.dressed_unitary(U, traj, model), "dressed")

    def ratio(a, b):
        return a / b if b > 0 else 0.0

    return {
        "three_term": ledger.l_tot, "five_term": ledger.five_term, "ledger": ledger.to_dict(),
        "adiabatic_bound": adiabatic,
        "exact_bare": bare.to_dict(), "exact_dressed": dressed.to_dict(),
        "exact_le_bound": bool(dressed.amplitude_max <= ledger.l_tot),
        "middle_over_retained": ratio(ledger.derivative_terms, ledger.l_tot),
        "adiabatic_over_direct": ratio(adiabatic, ledger.l_tot),
    }


def cmd_leakage_audit(cfg: dict, args) -> dict:
    out = _outdir(cfg)
    stamp = _stamp(cfg)
    traj = _input_trajectory(cfg, args)
    if traj.n_steps < 3:
        raise ConfigError("leakage audit needs a trajectory with at least 3 steps",
                          None, getattr(args, "trajectory", None) or "<arguments>")
    doc = {"command": "leakage-audit"}
    doc.update(leakage_audit(traj, build_model(cfg)))
    doc.update(stamp)
    write_json(os.path.join(out, "leakage_audit.json"), doc)
    return doc


def cmd_evaluate(cfg: dict, args) -> dict:
    out = _outdir(cfg)
    stamp = _stamp(cfg)
    traj = _input_trajectory(cfg, args)
    target = targets.parse_target(cfg["target"])
    model = build_model(cfg)
    U = dynamics.propagate(traj, model, space=cfg["space"]).unitary
    cost = objective.ufo_cost(traj, model, target, build_weights(cfg), space=cfg["space"],
                              unitary=U)
    block = dynamics.qubit_block(U)
    doc = {"command": "evaluate", "target": target.label, "cost": cost.to_dict(),
           "gate_fidelity": dynamics.gate_fidelity(block, target.matrix),
           "average_fidelity": evaluate.average_fidelity_nielsen(
               evaluate.SampledChannel(block), target.matrix),
           "gate_time_ns": traj.duration_ns}
    sigma = cfg["noise"]["sigma_mhz"]
    if sigma > 0:
        rep = evaluate.fidelity_variance(traj, model, target, sigma,
                                         cfg["robustness"]["samples"], seed=cfg["seed"],
                                         space=cfg["space"])
        doc["noisy"] = {k: v for k, v in rep.to_dict().items() if k != "per_sample"}
    doc.update(stamp)
    write_json(os.path.join(out, "evaluation.json"), doc)
    return doc


# -- argument parsing -------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ufoctl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--target", help="gate name or N:alpha:gamma")
        sp.add_argument("--out", dest="output_dir", help="output directory")
        sp.add_argument("--noise-sigma", type=float, dest="noise_sigma")
        sp.add_argument("--space", choices=("full", "qubit"))
        sp.add_argument("--eta", type=float, dest="eta_mhz")
        return sp

    t = common(sub.add_parser("train", help="optimise a trajectory"))
    t.add_argument("--optimizer", choices=("sgd", "rl"))
    t.add_argument("--iters", type=int, help="SGD iterations or RL iterations")
    t.add_argument("--n-steps", type=int, dest="n_steps", help="SGD trajectory length")
    t.add_argument("--batch-steps", type=int, dest="batch_steps")
    t.add_argument("--n-max", type=int, dest="n_max")

    s = common(sub.add_parser("sweep-alpha", help="gate time versus alpha"))
    s.add_argument("--optimizer", choices=("sgd", "rl"))
    s.add_argument("--gamma", type=float)
    s.add_argument("--alpha-start", type=float, dest="alpha_start")
    s.add_argument("--alpha-stop", type=float, dest="alpha_stop")
    s.add_argument("--budget-iters", type=int, dest="budget_iters")

    for name, helptext in (("robustness", "fidelity spread over a noise grid"),
                           ("leakage-audit", "bounds and exact leakage side by side"),
                           ("evaluate", "cost and fidelities of a trajectory")):
        c = common(sub.add_parser(name, help=helptext))
        c.add_argument("--trajectory", help="trajectory JSON")
        c.add_argument("--checkpoint", help="RL checkpoint (greedy rollout)")
        if name == "robustness":
            c.add_argument("--samples", type=int)
    return p


def _overrides(args) -> dict:
    o = {"seed": args.seed, "target": args.target, "output_dir": args.output_dir,
         "noise.sigma_mhz": args.noise_sigma, "space": args.space, "eta_mhz": args.eta_mhz}
    cmd = args.command
    if cmd in ("train", "sweep-alpha"):
        o["optimizer"] = args.optimizer
    if cmd == "train":
        if args.iters is not None:
            o["sgd.iters"] = args.iters
            o["rl.iterations"] = args.iters
        o["sgd.n_steps"] = args.n_steps
        o["rl.batch_steps"] = args.batch_steps
        o["horizon.n_max"] = args.n_max
    if cmd == "sweep-alpha":
        o.update({"sweep.gamma": args.gamma, "sweep.alpha_start": args.alpha_start,
                  "sweep.alpha_stop": args.alpha_stop, "sweep.budget_iters": args.budget_iters})
    if cmd == "robustness":
        o["robustness.samples"] = args.samples
    return o


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "train":
            result = cmd_train(cfg)
        elif args.command == "sweep-alpha":
            result = cmd_sweep_alpha(cfg)
        elif args.command == "robustness":
            result = cmd_robustness(cfg, args)
        elif args.command == "leakage-audit":
            result = cmd_leakage_audit(cfg, args)
        else:
            result = cmd_evaluate(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (baseline.DivergenceError, FloatingPointError) as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    print(json.dumps({k: result[k] for k in ("command", "config_hash", "seed")
                      if k in result}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
