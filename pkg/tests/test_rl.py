import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ufoctl import objective
from ufoctl.control import FilterConfig, filter_sequence
from ufoctl.rl import env as envmod
from ufoctl.rl import io, trpo
from ufoctl.rl.env import EnvConfig, GmonEnv
from ufoctl.rl.nets import MLP
from ufoctl.rl.policy import GaussianPolicy, fisher_vector_product, kl_gaussian, mean_kl
from ufoctl.targets import canonical_gate

CZ = canonical_gate("CZ").matrix


def fd(fun, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def small_policy(rng):
    return GaussianPolicy(5, 3, (6, 4), rng, init_log_std=-0.3)


def test_mlp_vjp_and_jvp_against_finite_differences(rng):
    net = MLP((4, 5, 3, 2), rng)
    x = rng.standard_normal((6, 4))
    w = rng.standard_normal((6, 2))
    _, acts = net.forward(x, cache=True)
    g = net.vjp(acts, w)
    np.testing.assert_allclose(g, fd(lambda p: np.sum(w * net.forward(x, p)), net.params),
                               rtol=1e-6, atol=1e-8)
    v = rng.standard_normal(net.n_params)
    h = 1e-6
    ref = (net.forward(x, net.params + h * v) - net.forward(x, net.params - h * v)) / (2 * h)
    np.testing.assert_allclose(net.jvp(x, v), ref, rtol=1e-6, atol=1e-8)
    back = MLP.from_dict(net.to_dict())
    np.testing.assert_array_equal(back.params, net.params)


def test_log_prob_matches_gaussian_density(rng):
    pol = small_policy(rng)
    obs = rng.standard_normal((4, 5))
    act = rng.standard_normal((4, 3))
    mu, sd = pol.mean(obs), np.exp(pol.log_std)
    ref = np.sum(-0.5 * ((act - mu) / sd) ** 2 - np.log(sd * np.sqrt(2 * np.pi)), axis=1)
    np.testing.assert_allclose(pol.log_prob(obs, act), ref)
    w = rng.standard_normal(4)
    flat = pol.get_flat()
    g = fd(lambda f: np.sum(w * pol.log_prob(obs, act, f)), flat)
    np.testing.assert_allclose(pol.grad_log_prob_weighted(obs, act, w), g, rtol=1e-5, atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_kl_properties(seed):
    r = np.random.default_rng(seed)
    mu0, mu1 = r.standard_normal((2, 3, 4))
    s0, s1 = r.uniform(-1, 1, (2, 4))
    kl = kl_gaussian(mu0, s0, mu1, s1)
    assert np.all(kl >= -1e-12)
    np.testing.assert_allclose(kl_gaussian(mu0, s0, mu0, s0), 0, atol=1e-12)
    # one-dimensional closed form, summed over independent coordinates
    v0, v1 = np.exp(2 * s0), np.exp(2 * s1)
    ref = np.sum(0.5 * (np.log(v1 / v0) + (v0 + (mu0 - mu1) ** 2) / v1 - 1), axis=-1)
    np.testing.assert_allclose(kl, ref)


def test_fisher_vector_product_is_kl_hessian(rng):
    pol = small_policy(rng)
    pol.net.init(rng, 1.0)
    obs = rng.standard_normal((7, 5))
    flat = pol.get_flat()
    v = rng.standard_normal(flat.size)
    h = 1e-4
    kl = lambda t: mean_kl(pol, obs, flat, flat + t * v)
    hess_vv = (kl(h) - 2 * kl(0.0) + kl(-h)) / h ** 2
    fvp = fisher_vector_product(pol, obs, v)
    assert v @ fvp == pytest.approx(hess_vv, rel=1e-4)
    # symmetry and positive semi-definiteness
    u = rng.standard_normal(flat.size)
    assert u @ fisher_vector_product(pol, obs, v) == pytest.approx(
        v @ fisher_vector_product(pol, obs, u))
    assert v @ fvp >= 0


def test_conjugate_gradient_solves_spd(rng):
    A = rng.standard_normal((6, 6))
    A = A @ A.T + np.eye(6)
    b = rng.standard_normal(6)
    x = trpo.conjugate_gradient(lambda v: A @ v, b, iters=50)
    np.testing.assert_allclose(A @ x, b, atol=1e-6)


def test_discounted_cumsum():
    np.testing.assert_allclose(trpo.discounted_cumsum(np.array([1.0, 2.0, 3.0]), 0.5),
                               [1 + 1 + 0.75, 2 + 1.5, 3])


def test_action_mapping():
    k = envmod.action_to_knobs(np.array([2.0, -1, 0.5, 0, 0, -1, 1]))
    np.testing.assert_allclose(k, [20, -20, 10, 0, 0, 0, 2 * np.pi])


def test_env_observation_and_filtered_knobs(rng):
    cfg = EnvConfig(CZ, n_max=6, space="qubit", filter=FilterConfig())
    env = GmonEnv(cfg)
    obs = env.reset()
    assert obs.shape == (cfg.obs_dim,) == (33,)
    np.testing.assert_allclose(obs[:16], np.eye(4).ravel())
    acts = rng.uniform(-1, 1, (6, 7))
    while not env.done:
        env.step(acts[env.step_index])
    ref = filter_sequence(np.array([envmod.action_to_knobs(a) for a in acts]), FilterConfig())
    np.testing.assert_allclose(env.trajectory().knobs, ref, atol=1e-12)
    with pytest.raises(RuntimeError):
        env.step(acts[0])
    assert EnvConfig(CZ, full_state=True).obs_dim == 163


@pytest.mark.parametrize("space,sigma", [("qubit", 0.0), ("full", 0.0), ("qubit", 1.0)])
def test_episode_return_equals_minus_cost(rng, space, sigma):
    cfg = EnvConfig(CZ, n_max=9, space=space, noise_sigma=sigma, threshold=-1.0)
    env = GmonEnv(cfg)
    env.reset(np.random.default_rng(3))
    total = 0.0
    while not env.done:
        total += env.step(rng.uniform(-0.5, 0.5, 7))[1]
    cost = objective.ufo_cost(env.trajectory(), cfg.model, CZ, space=space,
                              eta_seq=np.array(env.etas))
    assert total == pytest.approx(-cost.total, rel=1e-10)
    assert env.final_cost.total == pytest.approx(cost.total, rel=1e-10)


def test_terminal_reward_mode_and_early_stop():
    cfg = EnvConfig(np.eye(4), n_max=10, space="qubit", reward_mode="terminal")
    env = GmonEnv(cfg)
    rewards = []
    while not env.done:
        rewards.append(env.step(np.zeros(7) - np.array([0, 0, 0, 0, 0, 1, 1]))[1])
    # zero drive on the identity target is already below threshold after min_steps
    assert len(rewards) == cfg.min_steps
    assert rewards[:-1] == [0.0] * (cfg.min_steps - 1)
    assert rewards[-1] == pytest.approx(-env.final_cost.total)
    with pytest.raises(ValueError):
        EnvConfig(CZ, n_max=2)


def small_trpo(seed=0):
    return trpo.TrpoConfig(batch_steps=64, hidden=(8, 8), seed=seed, value_epochs=2)


def test_trpo_update_respects_trust_region():
    env_cfg = EnvConfig(CZ, n_max=8, space="qubit")
    agent = trpo.Agent.create(env_cfg.obs_dim, small_trpo())
    for _ in range(3):
        row, info, _ = trpo.train_iteration(agent, env_cfg)
        if info.accepted:
            assert info.kl <= 1.5 * agent.cfg.trust_region_kl
            assert info.improvement > 0
        else:
            assert info.kl == 0.0


def test_rejected_update_leaves_policy(rng):
    pol = small_policy(rng)
    before = pol.get_flat()
    info = trpo.trpo_update(pol, rng.standard_normal((5, 5)), rng.standard_normal((5, 3)),
                            np.zeros(5), small_trpo())
    assert not info.accepted
    np.testing.assert_array_equal(pol.get_flat(), before)


def test_training_is_deterministic(tmp_path):
    env_cfg = EnvConfig(CZ, n_max=6, space="qubit", noise_sigma=0.5)
    a = trpo.train(env_cfg, small_trpo(7), 2)
    b = trpo.train(env_cfg, small_trpo(7), 2)
    np.testing.assert_array_equal(a.agent.policy.get_flat(), b.agent.policy.get_flat())
    assert [r.to_row() for r in a.logs] == [r.to_row() for r in b.logs]
    path = tmp_path / "ck.json"
    io.save_checkpoint(a.agent, path, "abc")
    back = io.load_checkpoint(path)
    np.testing.assert_array_equal(back.policy.get_flat(), a.agent.policy.get_flat())
    np.testing.assert_array_equal(back.value.params, a.agent.value.params)
    assert back.iteration == 2
    # resumed training continues identically
    trpo.train(env_cfg, small_trpo(7), 1, agent=a.agent)
    trpo.train(env_cfg, small_trpo(7), 1, agent=back)
    np.testing.assert_array_equal(back.policy.get_flat(), a.agent.policy.get_flat())
    ep = trpo.greedy_rollout(a.agent, env_cfg)
    assert ep.length <= env_cfg.n_max


def test_curriculum_advance():
    assert trpo.curriculum_advance(0.1, True) == (pytest.approx(0.2), True)
    assert trpo.curriculum_advance(3.1, False)[0] == pytest.approx(np.pi)
    with pytest.raises(ValueError):
        trpo.curriculum_advance(4.0, True)
