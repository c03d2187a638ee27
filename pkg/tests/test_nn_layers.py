"""Layer library: forward oracles, analytic gradients, initialization."""

import numpy as np
import pytest

from gridinertia.nn import (Conv1d, Dense, Flatten, GraphConv, MaxPool1d,
                            Model, NodeMean, Param, Relu, grad_check,
                            induced_adjacency, mse, mse_grad,
                            renormalized_adjacency)
from gridinertia.errors import ConfigError
from gridinertia.nn.layers import ToTimeMajor, _fan_uniform


def rng_for(k):
    return np.random.default_rng(1000 + k)


def layer_grad_case(layer, x, seed=0):
    """Max relative gradient error over layer params and the input."""
    rng = rng_for(seed)
    dy_shape = layer.forward(x.copy()).shape
    dy = rng.standard_normal(dy_shape)

    x_param = Param("x", x.copy())
    layer.forward(x_param.value)
    x_param.grad[...] = layer.backward(dy)

    def func():
        return float(np.sum(layer.forward(x_param.value) * dy))

    tensors = [(p.value, p.grad) for p in layer.params()]
    tensors.append((x_param.value, x_param.grad))
    return grad_check(func, tensors, eps=1e-5)


# -- Param ---------------------------------------------------------------------

def test_param_holds_value_and_zero_grad():
    p = Param("w", np.ones((2, 3)))
    assert p.value.dtype == np.float64
    assert p.grad.shape == (2, 3)
    assert np.all(p.grad == 0.0)
    assert p.name == "w"


def test_fan_uniform_bounds():
    rng = rng_for(0)
    vals = _fan_uniform(rng, 64, 32, (64, 32))
    limit = np.sqrt(6.0 / (64 + 32))
    assert vals.shape == (64, 32)
    assert np.all(np.abs(vals) <= limit)
    assert vals.std() == pytest.approx(limit / np.sqrt(3.0), rel=0.1)


# -- dense / relu / flatten ------------------------------------------------------

def test_dense_forward_oracle():
    layer = Dense(3, 2, rng_for(1))
    w, b = layer.params()
    x = rng_for(2).standard_normal((5, 3))
    assert np.allclose(layer.forward(x), x @ w.value + b.value)
    assert np.all(b.value == 0.0)


def test_dense_gradients():
    for k in range(5):
        layer = Dense(4, 3, rng_for(k))
        x = rng_for(k + 50).standard_normal((6, 4))
        res = layer_grad_case(layer, x, seed=k)
        assert res.max_rel_error < 1e-7, res


def test_relu_forward_and_subgradient():
    layer = Relu()
    x = np.array([[-1.0, 0.0, 2.0]])
    assert np.array_equal(layer.forward(x), [[0.0, 0.0, 2.0]])
    dx = layer.backward(np.array([[5.0, 5.0, 5.0]]))
    # subgradient at exactly zero is zero
    assert np.array_equal(dx, [[0.0, 0.0, 5.0]])


def test_flatten_roundtrip():
    layer = Flatten()
    x = rng_for(3).standard_normal((4, 2, 5))
    y = layer.forward(x)
    assert y.shape == (4, 10)
    assert np.array_equal(layer.backward(y).reshape(x.shape), x)


def test_to_time_major_transposes():
    layer = ToTimeMajor()
    x = rng_for(4).standard_normal((3, 2, 7))  # (batch, channels, time)
    y = layer.forward(x)
    assert y.shape == (3, 7, 2)
    assert np.array_equal(y[0], x[0].T)
    dx = layer.backward(y)
    assert np.array_equal(dx, x)


# -- conv / pool -------------------------------------------------------------------

def test_conv1d_forward_oracle():
    layer = Conv1d(2, 3, 3, rng_for(5))
    w, b = layer.params()
    x = rng_for(6).standard_normal((2, 2, 8))
    y = layer.forward(x)
    assert y.shape == (2, 3, 6)  # valid convolution: 8 - 3 + 1
    # direct triple-loop recomputation
    for n in (0, 1):
        for co in range(3):
            for t in range(6):
                ref = b.value[co] + np.sum(
                    x[n, :, t:t + 3] * w.value[co])
                assert y[n, co, t] == pytest.approx(ref, rel=1e-12)


def test_conv1d_gradients():
    for k in range(5):
        layer = Conv1d(2, 4, 3, rng_for(k + 10))
        x = rng_for(k + 60).standard_normal((3, 2, 9))
        res = layer_grad_case(layer, x, seed=k)
        assert res.max_rel_error < 1e-7, res


def test_conv1d_rejects_short_input():
    layer = Conv1d(1, 1, 5, rng_for(7))
    with pytest.raises(ConfigError):
        layer.forward(np.zeros((1, 1, 4)))


def test_maxpool_halves_and_breaks_ties_to_first():
    layer = MaxPool1d()
    x = np.array([[[1.0, 3.0, 2.0, 2.0, 7.0, 7.0, 4.0]]])
    y = layer.forward(x)
    # trailing odd sample dropped
    assert np.array_equal(y, [[[3.0, 2.0, 7.0]]])
    dx = layer.backward(np.array([[[10.0, 20.0, 30.0]]]))
    # ties route the gradient to the earlier element; dropped tail gets none
    assert np.array_equal(dx, [[[0.0, 10.0, 20.0, 0.0, 30.0, 0.0, 0.0]]])


def test_maxpool_gradients_off_ties():
    for k in range(5):
        layer = MaxPool1d()
        x = rng_for(k + 20).standard_normal((2, 3, 10))
        res = layer_grad_case(layer, x, seed=k)
        assert res.max_rel_error < 1e-7, res


# -- graph layers ---------------------------------------------------------------------

def ring_adjacency(n):
    a = np.zeros((n, n))
    for i in range(n):
        a[i, (i + 1) % n] = a[(i + 1) % n, i] = 1.0
    return a


def test_renormalized_adjacency_oracle():
    a = ring_adjacency(4)
    v = renormalized_adjacency(a)
    a_tilde = a + np.eye(4)
    d = np.diag(1.0 / np.sqrt(a_tilde.sum(axis=1)))
    assert np.allclose(v, d @ a_tilde @ d)
    # symmetric with spectral radius 1 (largest eigenvalue of the walk matrix)
    assert np.allclose(v, v.T)
    assert np.max(np.abs(np.linalg.eigvalsh(v))) == pytest.approx(1.0)


def test_renormalized_adjacency_isolated_node():
    a = np.zeros((3, 3))
    a[0, 1] = a[1, 0] = 1.0
    v = renormalized_adjacency(a)
    assert v[2, 2] == pytest.approx(1.0)  # self-loop only
    assert np.all(np.isfinite(v))


def test_renormalized_adjacency_validation():
    with pytest.raises(ConfigError):
        renormalized_adjacency(np.zeros((2, 3)))
    with pytest.raises(ConfigError):
        renormalized_adjacency(np.array([[0.0, 2.0], [2.0, 0.0]]))
    with pytest.raises(ConfigError):
        renormalized_adjacency(np.array([[1.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ConfigError):
        renormalized_adjacency(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_induced_adjacency():
    a = ring_adjacency(5)
    sub = induced_adjacency(a, [0, 1, 4])
    expected = np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]], dtype=float)
    assert np.array_equal(sub, expected)
    with pytest.raises(ConfigError):
        induced_adjacency(a, [0, 0])
    with pytest.raises(ConfigError):
        induced_adjacency(a, [7])


def test_graphconv_forward_oracle():
    a = ring_adjacency(4)
    v = renormalized_adjacency(a)
    layer = GraphConv(v, 3, 2, rng_for(8))
    w, b = layer.params()
    x = rng_for(9).standard_normal((2, 4, 3))
    y = layer.forward(x)
    ref = np.maximum(np.matmul(v, x) @ w.value + b.value, 0.0)
    assert np.allclose(y, ref)


def test_graphconv_gradients():
    v = renormalized_adjacency(ring_adjacency(5))
    for k in range(5):
        layer = GraphConv(v, 3, 4, rng_for(k + 30))
        x = rng_for(k + 70).standard_normal((2, 5, 3))
        res = layer_grad_case(layer, x, seed=k)
        # ReLU kinks are excluded by the checker, remainder must be exact
        assert res.max_rel_error < 1e-6, res


def test_nodemean_averages_over_nodes():
    layer = NodeMean()
    x = rng_for(11).standard_normal((3, 5, 2))
    y = layer.forward(x)
    assert np.allclose(y, x.mean(axis=1))
    dx = layer.backward(np.ones((3, 2)))
    assert np.allclose(dx, 1.0 / 5.0)


# -- loss ---------------------------------------------------------------------------------

def test_mse_and_gradient_oracle():
    y_true = np.array([1.0, 1.0, 1.0])
    y_pred = np.array([1.0, 2.0, 4.0])
    assert mse(y_true, y_pred) == pytest.approx((0 + 1 + 9) / 3.0)
    assert np.allclose(mse_grad(y_true, y_pred),
                       2.0 / 3.0 * np.array([0.0, 1.0, 3.0]))
    with pytest.raises(ValueError):
        mse(np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError):
        mse(np.zeros(0), np.zeros(0))


# -- model container -------------------------------------------------------------------------

def test_model_flat_prepare_and_forward():
    rng = rng_for(12)
    model = Model([Flatten(), Dense(12, 1, rng)], input_kind="flat")
    x4 = rng.standard_normal((7, 2, 3, 2))  # (batch, buses, feats, steps)
    y = model.predict(x4)
    assert y.shape == (7,)
    names = [p.name for p in model.params()]
    assert len(names) == len(set(names))  # unique parameter names


def test_model_rejects_unknown_input_kind():
    with pytest.raises(ConfigError):
        Model([Flatten()], input_kind="image")


def test_model_zero_grad():
    model = Model([Flatten(), Dense(4, 1, rng_for(13))], input_kind="flat")
    x = rng_for(14).standard_normal((2, 1, 2, 2))
    y = model.forward(model.prepare(x))
    model.backward(np.ones_like(y))
    assert any(np.any(p.grad != 0) for p in model.params())
    model.zero_grad()
    assert all(np.all(p.grad == 0) for p in model.params())
