import numpy as np
import pytest

from ufoctl import baseline, objective
from ufoctl.baseline import AdamState, SgdConfig
from ufoctl.control import ControlTrajectory, NoiseModel
from ufoctl.targets import canonical_gate, n_gate

CZ = canonical_gate("CZ").matrix


def test_adam_step_by_hand():
    st = AdamState(lr=0.1)
    x, st = baseline.adam_step(np.array([1.0, -2.0]), np.array([0.5, -4.0]), st)
    # first bias-corrected step moves each coordinate by lr * sign(grad)
    np.testing.assert_allclose(x, [0.9, -1.9], atol=1e-7)
    assert st.step == 1
    with pytest.raises(ValueError):
        baseline.adam_step(x, np.zeros(3), st)
    assert st.to_dict()["m"] == pytest.approx([0.05, -0.4])


def test_adam_minimizes_quadratic():
    A = np.diag([1.0, 10.0, 0.1])
    fun = lambda x: 0.5 * x @ A @ x
    x, f = baseline.minimize_function(fun, lambda x: A @ x, np.ones(3), 3000, lr=0.05)
    assert f < 1e-6


@pytest.mark.parametrize("space,noise", [("qubit", None), ("full", None),
                                         ("qubit", NoiseModel(1.0, 4))])
def test_local_gradient_matches_direct(rng, space, noise):
    cfg = SgdConfig(CZ, n_steps=7, space=space, noise=noise, n_noise=2)
    p = rng.uniform(-8, 8, 7 * 7)
    g_local = baseline.cost_gradient(p, cfg, "local")
    g_direct = baseline.cost_gradient(p, cfg, "direct")
    np.testing.assert_allclose(g_local, g_direct, rtol=1e-7, atol=1e-9)


def test_fd_gradient_predicts_cost_change(rng):
    cfg = SgdConfig(CZ, n_steps=6)
    p = rng.uniform(-5, 5, 42)
    g = baseline.cost_gradient(p, cfg)
    d = rng.standard_normal(42) * 1e-4
    lin = baseline.total_cost(p + d, cfg) - baseline.total_cost(p, cfg)
    assert lin == pytest.approx(g @ d, rel=1e-3)


def test_evaluator_matches_ufo_cost(rng):
    cfg = SgdConfig(CZ, n_steps=9, space="full")
    k = rng.uniform(-10, 10, (9, 7))
    c = baseline.TrajectoryCost(cfg).evaluate(k)
    ref = objective.ufo_cost(ControlTrajectory(1.0, k), cfg.model, CZ)
    assert c.total == pytest.approx(ref.total, rel=1e-12)


def test_gradient_needs_four_steps():
    cfg = SgdConfig(CZ, n_steps=3)
    with pytest.raises(ValueError):
        baseline.TrajectoryCost(cfg).gradient(np.zeros((3, 7)))
    with pytest.raises(ValueError):
        baseline.cost_gradient(np.full(21, np.nan), cfg)
    with pytest.raises(ValueError):
        baseline.cost_gradient(np.zeros(21), cfg, "bogus")


def test_clip_params_limits_amplitudes_only():
    p = np.tile([30.0, -25, 5, 21, -1, 9.0, -9.0], 2)
    c = baseline.clip_params(p).reshape(2, 7)
    np.testing.assert_array_equal(c[0], [20, -20, 5, 20, -1, 9.0, -9.0])


def test_adam_optimize_improves_and_tracks_best(rng):
    cfg = SgdConfig(n_gate(0.5, 0.0).matrix, n_steps=10)
    init = rng.normal(0, 2, 70)
    res = baseline.adam_optimize(init, cfg, 15, AdamState(lr=0.05))
    assert res.best_cost < res.history[0]
    assert all(np.diff(res.best_history) <= 0)
    assert res.best_cost == pytest.approx(min(res.history))
    assert res.trajectory(1.0).n_steps == 10
    stopped = baseline.adam_optimize(init, cfg, 15, callback=lambda it, c, p: it < 2)
    assert len(stopped.history) == 4


def test_divergence_is_reported():
    cfg = SgdConfig(CZ, n_steps=4,
                    weights=objective.UfoWeights(chi=1e9))
    with pytest.raises(baseline.DivergenceError):
        baseline.adam_optimize(np.ones(28), cfg, 2)
    with pytest.raises(ValueError):
        baseline.adam_optimize(np.ones(28), cfg, 0)


def test_noise_models_are_deterministic():
    cfg = baseline.with_noise(SgdConfig(CZ, n_steps=5), NoiseModel(1.0, 9), 3)
    p = np.ones(35)
    assert baseline.total_cost(p, cfg) == baseline.total_cost(p, cfg)
    assert baseline.total_cost(p, cfg) != baseline.total_cost(p, SgdConfig(CZ, n_steps=5))
