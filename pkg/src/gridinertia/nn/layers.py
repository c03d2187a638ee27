"""Layers with explicit reverse-mode gradients.

Conventions shared by every layer:

* ``forward(x)`` caches whatever the backward pass needs and returns the
  layer output; ``backward(dy)`` accumulates parameter gradients into
  ``Param.grad`` (+=) and returns the gradient w.r.t. the layer input.
* All math is float64.
* Initialisation draws from a caller-supplied numpy Generator so model
  construction is reproducible from a seed.  Dense / convolution / graph
  weights use the uniform fan-balanced scheme +-sqrt(6 / (fan_in + fan_out));
  LSTM recurrent weights use a plain scaled uniform +-1/sqrt(units).
"""

import math

import numpy as np
from scipy.special import expit

from . import _nn_kernels as kern
from ..errors import ConfigError


class Param:
    """A trainable tensor with its accumulated gradient."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name, value):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.value.shape})"


def _fan_uniform(rng, fan_in, fan_out, shape):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base layer: stateless by default."""

    def params(self):
        return ()

    def forward(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def backward(self, dy):  # pragma: no cover - abstract
        raise NotImplementedError


class Dense(Layer):
    """Affine map x @ w + b on the last axis of a 2-D batch."""

    def __init__(self, d_in, d_out, rng, name="dense"):
        if d_in < 1 or d_out < 1:
            raise ConfigError(f"dense dims must be positive, got {d_in}x{d_out}")
        self.d_in = int(d_in)
        self.d_out = int(d_out)
        self.w = Param(name + ".w", _fan_uniform(rng, d_in, d_out, (d_in, d_out)))
        self.b = Param(name + ".b", np.zeros(d_out))
        self._x = None

    def params(self):
        return (self.w, self.b)

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ConfigError(
                f"dense expects (batch, {self.d_in}), got {x.shape}")
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, dy):
        self.w.grad += self._x.T @ dy
        self.b.grad += dy.sum(axis=0)
        return dy @ self.w.value.T


class Relu(Layer):
    """Elementwise max(x, 0); the subgradient at 0 is taken as 0."""

    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0.0
        return np.where(self._mask, x, 0.0)

    def backward(self, dy):
        return np.where(self._mask, dy, 0.0)


class Flatten(Layer):
    """Collapse all axes after the batch axis."""

    def __init__(self):
        self._shape = None

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)


class ToTimeMajor(Layer):
    """Swap (batch, channels, steps) to (batch, steps, channels)."""

    def forward(self, x):
        return np.ascontiguousarray(x.transpose(0, 2, 1))

    def backward(self, dy):
        return np.ascontiguousarray(dy.transpose(0, 2, 1))


class Conv1d(Layer):
    """Valid, stride-1 cross-correlation over (batch, channels, length)."""

    def __init__(self, c_in, c_out, kernel, rng, name="conv"):
        if c_in < 1 or c_out < 1 or kernel < 1:
            raise ConfigError(
                f"conv dims must be positive, got in={c_in} out={c_out} k={kernel}")
        self.c_in = int(c_in)
        self.c_out = int(c_out)
        self.kernel = int(kernel)
        fan_in = c_in * kernel
        fan_out = c_out * kernel
        self.w = Param(name + ".w",
                       _fan_uniform(rng, fan_in, fan_out, (c_out, c_in, kernel)))
        self.b = Param(name + ".b", np.zeros(c_out))
        self._x = None

    def params(self):
        return (self.w, self.b)

    def out_length(self, length):
        out = length - self.kernel + 1
        if out < 1:
            raise ConfigError(
                f"conv kernel {self.kernel} longer than input length {length}")
        return out

    def forward(self, x):
        if x.ndim != 3 or x.shape[1] != self.c_in:
            raise ConfigError(
                f"conv expects (batch, {self.c_in}, length), got {x.shape}")
        self.out_length(x.shape[2])
        x = np.ascontiguousarray(x, dtype=np.float64)
        self._x = x
        return kern.conv1d_forward(x, self.w.value, self.b.value)

    def backward(self, dy):
        dy = np.ascontiguousarray(dy, dtype=np.float64)
        dx, dw, db = kern.conv1d_backward(self._x, self.w.value, dy)
        self.w.grad += dw
        self.b.grad += db
        return dx


class MaxPool1d(Layer):
    """Width-2, stride-2 max pooling; ties route the gradient to the
    earlier index.  An odd trailing sample is dropped."""

    def __init__(self):
        self._take_first = None
        self._in_shape = None

    def forward(self, x):
        if x.ndim != 3:
            raise ConfigError(f"pool expects (batch, channels, length), got {x.shape}")
        length = x.shape[2]
        if length < 2:
            raise ConfigError(f"pool needs length >= 2, got {length}")
        out_len = length // 2
        first = x[:, :, 0:2 * out_len:2]
        second = x[:, :, 1:2 * out_len:2]
        self._take_first = first >= second
        self._in_shape = x.shape
        return np.where(self._take_first, first, second)

    def backward(self, dy):
        dx = np.zeros(self._in_shape, dtype=np.float64)
        out_len = dy.shape[2]
        dx[:, :, 0:2 * out_len:2] = np.where(self._take_first, dy, 0.0)
        dx[:, :, 1:2 * out_len:2] = np.where(self._take_first, 0.0, dy)
        return dx


LSTM_STANDARD = "standard"
LSTM_SINGLE_GATE = "single_gate"
LSTM_VARIANTS = (LSTM_STANDARD, LSTM_SINGLE_GATE)


class Lstm(Layer):
    """Recurrent layer over (batch, steps, features); emits the last hidden
    state (batch, units).

    variant "standard" is the usual 3-gate cell:

        i, f, o = sigmoid(...), g = tanh(...)
        c_t = f * c_{t-1} + i * g,  h_t = o * tanh(c_t)

    variant "single_gate" is a reduced cell with one update gate, no cell
    state, and both transforms acting on the concatenated [h_{t-1}, x_t]:

        z_t = sigmoid(W_z [h, x] + b_z)
        h~_t = tanh(W_c [h, x] + b_c)
        h_t = (1 - z_t) * h_{t-1} + z_t * h~_t

    The standard cell initialises its forget-gate bias to 1.0 so that early
    training does not erase the cell state.
    """

    def __init__(self, d_in, units, rng, name="lstm", variant=LSTM_STANDARD):
        if variant not in LSTM_VARIANTS:
            raise ConfigError(f"unknown lstm variant {variant!r}")
        if d_in < 1 or units < 1:
            raise ConfigError(f"lstm dims must be positive, got {d_in}->{units}")
        self.d_in = int(d_in)
        self.units = int(units)
        self.variant = variant
        n_blocks = 4 if variant == LSTM_STANDARD else 2
        width = n_blocks * units
        recur_limit = 1.0 / math.sqrt(units)
        self.wx = Param(name + ".wx",
                        _fan_uniform(rng, d_in, units, (d_in, width)))
        self.wh = Param(name + ".wh",
                        rng.uniform(-recur_limit, recur_limit, (units, width)))
        bias = np.zeros(width)
        if variant == LSTM_STANDARD:
            bias[units:2 * units] = 1.0
        self.b = Param(name + ".b", bias)
        self._cache = None

    def params(self):
        return (self.wx, self.wh, self.b)

    def step(self, x_t, state):
        """Advance one time step: (h, c) -> (h', c').

        For the single-gate variant the carried state is the hidden vector
        itself and c' mirrors h'.
        """
        h, c = state
        u = self.units
        if self.variant == LSTM_STANDARD:
            pre = x_t @ self.wx.value + h @ self.wh.value + self.b.value
            i_g = expit(pre[..., :u])
            f_g = expit(pre[..., u:2 * u])
            g_g = np.tanh(pre[..., 2 * u:3 * u])
            o_g = expit(pre[..., 3 * u:])
            c_new = f_g * c + i_g * g_g
            h_new = o_g * np.tanh(c_new)
            return h_new, c_new
        pre = x_t @ self.wx.value + h @ self.wh.value + self.b.value
        z_g = expit(pre[..., :u])
        cand = np.tanh(pre[..., u:])
        h_new = (1.0 - z_g) * h + z_g * cand
        return h_new, h_new

    def forward(self, x):
        if x.ndim != 3 or x.shape[2] != self.d_in:
            raise ConfigError(
                f"lstm expects (batch, steps, {self.d_in}), got {x.shape}")
        if x.shape[1] < 1:
            raise ConfigError("lstm needs at least one time step")
        x = np.ascontiguousarray(x, dtype=np.float64)
        if self.variant == LSTM_STANDARD:
            h_last, gates, cell_seq, hidden_seq = kern.lstm_forward(
                x, self.wx.value, self.wh.value, self.b.value)
            self._cache = (x, gates, cell_seq, hidden_seq)
            return h_last
        return self._forward_single_gate(x)

    def _forward_single_gate(self, x):
        batch, steps, _ = x.shape
        u = self.units
        h = np.zeros((batch, u))
        z_seq = np.empty((batch, steps, u))
        cand_seq = np.empty((batch, steps, u))
        h_seq = np.empty((batch, steps, u))
        xw = x @ self.wx.value
        for t in range(steps):
            pre = xw[:, t, :] + h @ self.wh.value + self.b.value
            z_g = expit(pre[:, :u])
            cand = np.tanh(pre[:, u:])
            h = (1.0 - z_g) * h + z_g * cand
            z_seq[:, t, :] = z_g
            cand_seq[:, t, :] = cand
            h_seq[:, t, :] = h
        self._cache = (x, z_seq, cand_seq, h_seq)
        return h

    def backward(self, dy):
        dy = np.ascontiguousarray(dy, dtype=np.float64)
        if self.variant == LSTM_STANDARD:
            x, gates, cell_seq, hidden_seq = self._cache
            dx, dwx, dwh, db = kern.lstm_backward(
                x, self.wx.value, self.wh.value, gates, cell_seq,
                hidden_seq, dy)
            self.wx.grad += dwx
            self.wh.grad += dwh
            self.b.grad += db
            return dx
        return self._backward_single_gate(dy)

    def _backward_single_gate(self, dy):
        x, z_seq, cand_seq, h_seq = self._cache
        batch, steps, _ = x.shape
        u = self.units
        wx = self.wx.value
        wh = self.wh.value
        dwx = np.zeros_like(wx)
        dwh = np.zeros_like(wh)
        db = np.zeros(2 * u)
        dx = np.zeros_like(x)
        dh = dy.copy()
        for t in range(steps - 1, -1, -1):
            z_g = z_seq[:, t, :]
            cand = cand_seq[:, t, :]
            h_prev = h_seq[:, t - 1, :] if t > 0 else np.zeros((batch, u))
            dz = dh * (cand - h_prev)
            dcand = dh * z_g
            dpre = np.concatenate(
                [dz * z_g * (1.0 - z_g), dcand * (1.0 - cand * cand)], axis=1)
            db += dpre.sum(axis=0)
            dwx += x[:, t, :].T @ dpre
            if t > 0:
                dwh += h_prev.T @ dpre
            dh = dh * (1.0 - z_g) + dpre @ wh.T
            dx[:, t, :] = dpre @ wx.T
        self.wx.grad += dwx
        self.wh.grad += dwh
        self.b.grad += db
        return dx


def lstm_step(x_t, state, layer):
    """Functional single-step interface: returns the (h, c) pair produced
    by advancing ``layer`` one step from ``state`` with input ``x_t``."""
    return layer.step(x_t, state)


class GraphConv(Layer):
    """Graph convolution relu(V @ x @ w + b) with a fixed propagation
    operator V over (batch, nodes, d_in)."""

    def __init__(self, operator, d_in, d_out, rng, name="gcn"):
        op = np.asarray(operator, dtype=np.float64)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ConfigError(f"graph operator must be square, got {op.shape}")
        if d_in < 1 or d_out < 1:
            raise ConfigError(f"gcn dims must be positive, got {d_in}->{d_out}")
        self.operator = op
        self.d_in = int(d_in)
        self.d_out = int(d_out)
        self.w = Param(name + ".w", _fan_uniform(rng, d_in, d_out, (d_in, d_out)))
        self.b = Param(name + ".b", np.zeros(d_out))
        self._mixed = None
        self._mask = None

    def params(self):
        return (self.w, self.b)

    def forward(self, x):
        n = self.operator.shape[0]
        if x.ndim != 3 or x.shape[1] != n or x.shape[2] != self.d_in:
            raise ConfigError(
                f"gcn expects (batch, {n}, {self.d_in}), got {x.shape}")
        mixed = np.matmul(self.operator, x)
        z = mixed @ self.w.value + self.b.value
        self._mixed = mixed
        self._mask = z > 0.0
        return np.where(self._mask, z, 0.0)

    def backward(self, dy):
        dz = np.where(self._mask, dy, 0.0)
        self.w.grad += np.tensordot(self._mixed, dz, axes=([0, 1], [0, 1]))
        self.b.grad += dz.sum(axis=(0, 1))
        dmixed = dz @ self.w.value.T
        return np.matmul(self.operator.T, dmixed)


class NodeMean(Layer):
    """Average over the node axis: (batch, nodes, d) -> (batch, d)."""

    def __init__(self):
        self._n_nodes = None

    def forward(self, x):
        if x.ndim != 3:
            raise ConfigError(f"node mean expects 3-D input, got {x.shape}")
        self._n_nodes = x.shape[1]
        return x.mean(axis=1)

    def backward(self, dy):
        scaled = dy / self._n_nodes
        return np.repeat(scaled[:, None, :], self._n_nodes, axis=1)


class Model:
    """An ordered layer chain ending in a scalar output per sample.

    ``input_kind`` records how a raw sample tensor
    (buses, features, steps) maps onto the first layer:

    * "flat"  -- flatten everything
    * "seq"   -- (buses * features) channels by steps
    * "graph" -- buses as nodes, (features * steps) node features
    """

    def __init__(self, layers, input_kind):
        if input_kind not in ("flat", "seq", "graph"):
            raise ConfigError(f"unknown input kind {input_kind!r}")
        self.layers = list(layers)
        self.input_kind = input_kind

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def zero_grad(self):
        for p in self.params():
            p.grad[...] = 0.0

    def prepare(self, x):
        """Map (batch, buses, features, steps) onto the model input layout."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4:
            raise ConfigError(f"expected 4-D sample batch, got {x.shape}")
        batch, buses, feats, steps = x.shape
        if self.input_kind == "flat":
            return np.ascontiguousarray(x.reshape(batch, buses * feats * steps))
        if self.input_kind == "seq":
            return np.ascontiguousarray(x.reshape(batch, buses * feats, steps))
        return np.ascontiguousarray(x.reshape(batch, buses, feats * steps))

    def forward(self, x):
        """Run prepared input through the chain; returns (batch,) outputs."""
        for layer in self.layers:
            x = layer.forward(x)
        if x.ndim != 2 or x.shape[1] != 1:
            raise ConfigError(f"model must end in one output, got {x.shape}")
        return x[:, 0]

    def backward(self, d_out):
        """Backpropagate (batch,) output gradients; accumulates Param.grad."""
        dy = np.asarray(d_out, dtype=np.float64)[:, None]
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def predict(self, x4d):
        """Forward a raw (batch, buses, features, steps) tensor."""
        return self.forward(self.prepare(x4d))
