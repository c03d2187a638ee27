"""LSTM layer: step oracles, initialization, gradients, both cell variants."""

import numpy as np
import pytest

from gridinertia.errors import ConfigError
from gridinertia.nn import Lstm, Param, grad_check, lstm_step
from gridinertia.nn.layers import LSTM_SINGLE_GATE, LSTM_STANDARD


def rng_for(k):
    return np.random.default_rng(7000 + k)


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def manual_standard_step(x_t, h, c, wx, wh, b, units):
    """Textbook 4-gate cell with gate blocks [input, forget, cell, output]."""
    pre = x_t @ wx + h @ wh + b
    i = sigmoid(pre[:, 0 * units:1 * units])
    f = sigmoid(pre[:, 1 * units:2 * units])
    g = np.tanh(pre[:, 2 * units:3 * units])
    o = sigmoid(pre[:, 3 * units:4 * units])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


def manual_single_gate_step(x_t, h, wx, wh, b, units):
    """Reduced cell: one sigmoid gate blends the previous state with a
    tanh candidate; the hidden state doubles as the cell state."""
    pre = x_t @ wx + h @ wh + b
    z = sigmoid(pre[:, :units])
    h_tilde = np.tanh(pre[:, units:])
    return (1.0 - z) * h + z * h_tilde


# -- construction --------------------------------------------------------------

def test_parameter_shapes_and_forget_bias():
    layer = Lstm(6, 8, rng_for(0))
    wx, wh, b = layer.params()
    assert wx.value.shape == (6, 32)
    assert wh.value.shape == (8, 32)
    assert b.value.shape == (32,)
    # forget-gate block primed to 1, everything else 0
    assert np.all(b.value[8:16] == 1.0)
    assert np.all(b.value[:8] == 0.0)
    assert np.all(b.value[16:] == 0.0)
    # recurrent weights drawn uniform within 1/sqrt(units)
    assert np.max(np.abs(wh.value)) <= 1.0 / np.sqrt(8.0)


def test_single_gate_parameter_shapes():
    layer = Lstm(6, 8, rng_for(1), variant=LSTM_SINGLE_GATE)
    wx, wh, b = layer.params()
    assert wx.value.shape == (6, 16)
    assert wh.value.shape == (8, 16)
    assert b.value.shape == (16,)
    assert np.all(b.value == 0.0)


def test_unknown_variant_rejected():
    with pytest.raises(ConfigError):
        Lstm(4, 4, rng_for(2), variant="peephole")


# -- forward oracles -------------------------------------------------------------

def test_standard_forward_matches_manual_recurrence():
    units, steps = 5, 7
    layer = Lstm(3, units, rng_for(3))
    wx, wh, b = (p.value for p in layer.params())
    x = rng_for(4).standard_normal((4, steps, 3))
    out = layer.forward(x)
    h = np.zeros((4, units))
    c = np.zeros((4, units))
    for t in range(steps):
        h, c = manual_standard_step(x[:, t], h, c, wx, wh, b, units)
    assert out.shape == (4, units)
    assert np.allclose(out, h, atol=1e-12)


def test_single_gate_forward_matches_manual_recurrence():
    units, steps = 5, 7
    layer = Lstm(3, units, rng_for(5), variant=LSTM_SINGLE_GATE)
    wx, wh, b = (p.value for p in layer.params())
    x = rng_for(6).standard_normal((4, steps, 3))
    out = layer.forward(x)
    h = np.zeros((4, units))
    for t in range(steps):
        h = manual_single_gate_step(x[:, t], h, wx, wh, b, units)
    assert np.allclose(out, h, atol=1e-12)


def test_lstm_step_advances_one_tick():
    layer = Lstm(3, 4, rng_for(7))
    wx, wh, b = (p.value for p in layer.params())
    x_t = rng_for(8).standard_normal((2, 3))
    h0 = np.zeros((2, 4))
    c0 = np.zeros((2, 4))
    h1, c1 = lstm_step(x_t, (h0, c0), layer)
    href, cref = manual_standard_step(x_t, h0, c0, wx, wh, b, 4)
    assert np.allclose(h1, href, atol=1e-12)
    assert np.allclose(c1, cref, atol=1e-12)


def test_lstm_step_chain_matches_forward():
    for variant in (LSTM_STANDARD, LSTM_SINGLE_GATE):
        layer = Lstm(3, 4, rng_for(70), variant=variant)
        x = rng_for(71).standard_normal((2, 5, 3))
        h = np.zeros((2, 4))
        c = np.zeros((2, 4))
        for t in range(5):
            h, c = lstm_step(x[:, t, :], (h, c), layer)
        assert np.allclose(layer.forward(x), h, atol=1e-12)


def test_zero_parameters_give_zero_hidden_state():
    for variant in (LSTM_STANDARD, LSTM_SINGLE_GATE):
        layer = Lstm(3, 4, rng_for(9), variant=variant)
        for p in layer.params():
            p.value[...] = 0.0
        x = rng_for(10).standard_normal((2, 6, 3))
        assert np.all(layer.forward(x) == 0.0)


# -- gradients ----------------------------------------------------------------------

def lstm_grad_case(variant, k):
    layer = Lstm(3, 4, rng_for(20 + k), variant=variant)
    x = rng_for(40 + k).standard_normal((3, 6, 3))
    dy = rng_for(60 + k).standard_normal((3, 4))
    x_param = Param("x", x.copy())

    layer.forward(x_param.value)
    x_param.grad[...] = layer.backward(dy)

    def func():
        return float(np.sum(layer.forward(x_param.value) * dy))

    tensors = [(p.value, p.grad) for p in layer.params()]
    tensors.append((x_param.value, x_param.grad))
    return grad_check(func, tensors, eps=1e-5)


@pytest.mark.parametrize("variant", [LSTM_STANDARD, LSTM_SINGLE_GATE])
def test_bptt_gradients(variant):
    for k in range(4):
        res = lstm_grad_case(variant, k)
        assert res.max_rel_error < 1e-6, (variant, k, res)


def test_long_sequence_gradients_stay_exact():
    layer = Lstm(2, 3, rng_for(90))
    x = rng_for(91).standard_normal((2, 40, 2))
    dy = rng_for(92).standard_normal((2, 3))
    x_param = Param("x", x.copy())

    layer.forward(x_param.value)
    x_param.grad[...] = layer.backward(dy)

    def func():
        return float(np.sum(layer.forward(x_param.value) * dy))

    tensors = [(p.value, p.grad) for p in layer.params()]
    tensors.append((x_param.value, x_param.grad))
    res = grad_check(func, tensors, eps=1e-5,
                     max_coords_per_tensor=40, rng=rng_for(93))
    assert res.max_rel_error < 1e-6, res
