"""SGD update law, momentum recursion, skip-on-non-finite, plateau schedule."""

import numpy as np
import pytest

from gridinertia.nn import Param, PlateauSchedule, SgdOptimizer, sgd_step


def rng_for(k):
    return np.random.default_rng(4000 + k)


# -- sgd_step -------------------------------------------------------------------

def test_sgd_step_update_law():
    w = rng_for(0).standard_normal((3, 4))
    g = rng_for(1).standard_normal((3, 4))
    out = sgd_step(w, g, 0.1)
    assert np.array_equal(out, w - 0.1 * g)


def test_sgd_step_returns_new_array():
    w = np.ones(5)
    out = sgd_step(w, np.ones(5), 0.5)
    assert out is not w
    assert np.array_equal(w, np.ones(5))
    out[0] = 99.0
    assert w[0] == 1.0


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_sgd_step_skips_non_finite_gradient(bad):
    w = rng_for(2).standard_normal(6)
    g = rng_for(3).standard_normal(6)
    g[4] = bad
    out = sgd_step(w, g, 0.1)
    assert np.array_equal(out, w)
    assert out is not w


def test_sgd_step_accepts_lists():
    out = sgd_step([1.0, 2.0], [0.5, 0.5], 1.0)
    assert out.dtype == np.float64
    assert np.array_equal(out, [0.5, 1.5])


@pytest.mark.parametrize("lr", [0.0, -1.0, np.nan, np.inf])
def test_sgd_step_rejects_bad_learning_rate(lr):
    with pytest.raises(ValueError):
        sgd_step(np.ones(2), np.ones(2), lr)


def test_sgd_step_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        sgd_step(np.ones(3), np.ones(4), 0.1)


# -- SgdOptimizer ---------------------------------------------------------------

def make_params(k, shapes=((2, 3), (4,))):
    rng = rng_for(100 + k)
    params = []
    for i, shape in enumerate(shapes):
        p = Param(f"p{i}", rng.standard_normal(shape))
        p.grad[...] = rng.standard_normal(shape)
        params.append(p)
    return params


def test_optimizer_plain_sgd_matches_step():
    params = make_params(0)
    expected = [p.value - 0.2 * p.grad for p in params]
    opt = SgdOptimizer(lr=0.2)
    assert opt.step(params) is True
    for p, want in zip(params, expected):
        assert np.array_equal(p.value, want)


def test_optimizer_momentum_recursion():
    # v_t = mu * v_{t-1} - lr * g_t;  w_t = w_{t-1} + v_t, with v_0 = 0.
    mu, lr = 0.9, 0.1
    p = Param("w", np.array([1.0, -2.0]))
    g1 = np.array([0.5, 0.25])
    g2 = np.array([-0.125, 1.0])

    v1 = -lr * g1
    w1 = p.value + v1
    v2 = mu * v1 - lr * g2
    w2 = w1 + v2

    opt = SgdOptimizer(lr=lr, momentum=mu)
    p.grad[...] = g1
    assert opt.step([p]) is True
    assert np.allclose(p.value, w1, atol=1e-15)
    p.grad[...] = g2
    assert opt.step([p]) is True
    assert np.allclose(p.value, w2, atol=1e-15)


def test_optimizer_velocity_is_per_parameter():
    a = Param("a", np.zeros(2))
    b = Param("b", np.zeros(2))
    a.grad[...] = [1.0, 0.0]
    b.grad[...] = [0.0, 1.0]
    opt = SgdOptimizer(lr=1.0, momentum=0.5)
    opt.step([a, b])
    # Second step with zero gradients: each parameter coasts on its own velocity.
    a.grad[...] = 0.0
    b.grad[...] = 0.0
    opt.step([a, b])
    assert np.allclose(a.value, [-1.5, 0.0])
    assert np.allclose(b.value, [0.0, -1.5])


def test_optimizer_skips_whole_batch_on_any_non_finite():
    params = make_params(1)
    params[1].grad[2] = np.nan
    before = [p.value.copy() for p in params]
    opt = SgdOptimizer(lr=0.1, momentum=0.9)
    assert opt.step(params) is False
    for p, want in zip(params, before):
        assert np.array_equal(p.value, want)


def test_optimizer_skipped_batch_leaves_velocity_untouched():
    p = Param("w", np.array([0.0]))
    opt = SgdOptimizer(lr=1.0, momentum=0.5)
    p.grad[...] = [1.0]
    opt.step([p])          # velocity -1, value -1
    p.grad[...] = [np.inf]
    assert opt.step([p]) is False
    p.grad[...] = [0.0]
    opt.step([p])          # coasts: velocity 0.5 * (-1) = -0.5
    assert np.allclose(p.value, [-1.5])


@pytest.mark.parametrize("lr,mom", [(0.0, 0.0), (-0.1, 0.0), (np.nan, 0.0),
                                    (0.1, 1.0), (0.1, -0.1)])
def test_optimizer_rejects_bad_settings(lr, mom):
    with pytest.raises(ValueError):
        SgdOptimizer(lr=lr, momentum=mom)


def test_optimizer_momentum_converges_on_quadratic():
    # Gradient descent with momentum on f(w) = 0.5 |w|^2 (grad = w) contracts
    # toward zero; 200 steps should shrink the weights by orders of magnitude.
    p = Param("w", rng_for(5).standard_normal(8))
    start = float(np.max(np.abs(p.value)))
    opt = SgdOptimizer(lr=0.05, momentum=0.9)
    for _ in range(200):
        p.grad[...] = p.value
        opt.step([p])
    assert float(np.max(np.abs(p.value))) < 1e-3 * start


# -- PlateauSchedule ------------------------------------------------------------

def test_plateau_first_call_primes_baseline():
    sched = PlateauSchedule(base_lr=1e-2, patience=3)
    assert sched.update(5.0) == 1e-2
    # Three non-improving epochs after the baseline trigger the first cut.
    assert sched.update(5.0) == 1e-2
    assert sched.update(5.0) == 1e-2
    assert sched.update(5.0) == 0.5e-2


def test_plateau_flat_loss_cuts_every_patience_epochs():
    sched = PlateauSchedule(base_lr=8e-3, factor=0.5, patience=50)
    sched.update(1.0)
    rates = [sched.update(1.0) for _ in range(150)]
    assert rates[49] == 4e-3 and rates[48] == 8e-3
    assert rates[99] == 2e-3 and rates[98] == 4e-3
    assert rates[149] == 1e-3 and rates[148] == 2e-3
    assert sched.lr == 8e-3 / 8.0


def test_plateau_improvement_resets_window():
    sched = PlateauSchedule(base_lr=1e-2, patience=3, min_improvement=1e-8)
    sched.update(5.0)
    sched.update(5.0)
    sched.update(5.0)
    assert sched.update(4.0) == 1e-2   # improvement: window restarts
    assert sched.update(4.0) == 1e-2
    assert sched.update(4.0) == 1e-2
    assert sched.update(4.0) == 0.5e-2


def test_plateau_improvement_must_beat_margin():
    sched = PlateauSchedule(base_lr=1e-2, patience=2, min_improvement=0.1)
    sched.update(1.0)
    # A drop of exactly the margin still counts as stale.
    assert sched.update(0.9) == 1e-2
    assert sched.update(0.9) == 0.5e-2


def test_plateau_respects_min_lr_floor():
    sched = PlateauSchedule(base_lr=1e-3, factor=0.5, patience=1, min_lr=3e-4)
    sched.update(1.0)
    assert sched.update(1.0) == 5e-4
    assert sched.update(1.0) == 3e-4    # 2.5e-4 clamped up to the floor
    assert sched.update(1.0) == 3e-4


@pytest.mark.parametrize("kwargs", [
    {"base_lr": 0.0},
    {"base_lr": -1.0},
    {"base_lr": np.inf},
    {"base_lr": 1e-2, "factor": 0.0},
    {"base_lr": 1e-2, "factor": 1.0},
    {"base_lr": 1e-2, "patience": 0},
    {"base_lr": 1e-2, "min_improvement": -1e-9},
    {"base_lr": 1e-2, "min_lr": 0.0},
    {"base_lr": 1e-2, "min_lr": 2e-2},
])
def test_plateau_rejects_bad_settings(kwargs):
    with pytest.raises(ValueError):
        PlateauSchedule(**kwargs)
