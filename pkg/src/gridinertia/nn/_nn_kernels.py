"""Hot kernels for the layer library: 1-D convolution and the standard
LSTM recurrence, each in a numba-jitted and a vectorised numpy variant.

The numpy variants are always importable (suffix ``_numpy``) so the two
routes can be compared in-process regardless of the active backend.
Shapes follow the layer convention:

* convolution input  ``x``  -- (batch, channels_in, length)
* convolution weight ``w``  -- (channels_out, channels_in, kernel)
* LSTM input         ``x``  -- (batch, steps, features)
* LSTM weights  ``wx`` (features, 4*units), ``wh`` (units, 4*units),
  ``b`` (4*units,) with gate blocks ordered [input, forget, cell, output].
"""

import numpy as np
from scipy.special import expit

from ..backend import using_numba


# --------------------------------------------------------------------------
# numpy route
# --------------------------------------------------------------------------

def _im2col(x, kernel):
    batch, chans, length = x.shape
    out_len = length - kernel + 1
    cols = np.empty((batch, chans, kernel, out_len), dtype=x.dtype)
    for k in range(kernel):
        cols[:, :, k, :] = x[:, :, k:k + out_len]
    return cols


def conv1d_forward_numpy(x, w, b):
    """Valid, stride-1 cross-correlation. Returns (batch, c_out, out_len)."""
    kernel = w.shape[2]
    cols = _im2col(x, kernel)
    y = np.tensordot(cols, w, axes=([1, 2], [1, 2]))  # (batch, out_len, c_out)
    return np.ascontiguousarray(y.transpose(0, 2, 1)) + b[None, :, None]


def conv1d_backward_numpy(x, w, dy):
    """Gradients of a scalar loss through conv1d_forward.

    dy has the output shape (batch, c_out, out_len); returns (dx, dw, db).
    """
    kernel = w.shape[2]
    out_len = dy.shape[2]
    cols = _im2col(x, kernel)
    db = dy.sum(axis=(0, 2))
    dw = np.tensordot(dy, cols, axes=([0, 2], [0, 3]))  # (c_out, c_in, kernel)
    dx = np.zeros_like(x)
    for k in range(kernel):
        # (batch, c_out, out_len) x (c_out, c_in) -> (batch, c_in, out_len)
        part = np.tensordot(dy, w[:, :, k], axes=([1], [0]))
        dx[:, :, k:k + out_len] += part.transpose(0, 2, 1)
    return dx, dw, db


def lstm_forward_numpy(x, wx, wh, b):
    """Run the 3-gate LSTM over a batch of sequences from a zero state.

    Returns (h_last, gates, cell_seq, hidden_seq); the tail arrays are the
    caches consumed by lstm_backward_numpy.
    """
    batch, steps, _ = x.shape
    units = wh.shape[0]
    gates = np.empty((batch, steps, 4 * units), dtype=np.float64)
    cell_seq = np.empty((batch, steps, units), dtype=np.float64)
    hidden_seq = np.empty((batch, steps, units), dtype=np.float64)
    h = np.zeros((batch, units), dtype=np.float64)
    c = np.zeros((batch, units), dtype=np.float64)
    xw = x @ wx
    for t in range(steps):
        pre = xw[:, t, :] + h @ wh + b
        i_g = expit(pre[:, :units])
        f_g = expit(pre[:, units:2 * units])
        g_g = np.tanh(pre[:, 2 * units:3 * units])
        o_g = expit(pre[:, 3 * units:])
        c = f_g * c + i_g * g_g
        h = o_g * np.tanh(c)
        gates[:, t, :units] = i_g
        gates[:, t, units:2 * units] = f_g
        gates[:, t, 2 * units:3 * units] = g_g
        gates[:, t, 3 * units:] = o_g
        cell_seq[:, t, :] = c
        hidden_seq[:, t, :] = h
    return h, gates, cell_seq, hidden_seq


def lstm_backward_numpy(x, wx, wh, gates, cell_seq, hidden_seq, dh_last):
    """Backprop through time for lstm_forward_numpy.

    dh_last is the loss gradient w.r.t. the final hidden state.
    Returns (dx, dwx, dwh, db).
    """
    batch, steps, _ = x.shape
    units = wh.shape[0]
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * units, dtype=np.float64)
    dx = np.zeros_like(x)
    dh = dh_last.astype(np.float64).copy()
    dc = np.zeros((batch, units), dtype=np.float64)
    for t in range(steps - 1, -1, -1):
        i_g = gates[:, t, :units]
        f_g = gates[:, t, units:2 * units]
        g_g = gates[:, t, 2 * units:3 * units]
        o_g = gates[:, t, 3 * units:]
        tanh_c = np.tanh(cell_seq[:, t, :])
        dc = dc + dh * o_g * (1.0 - tanh_c * tanh_c)
        c_prev = cell_seq[:, t - 1, :] if t > 0 else 0.0
        dpre = np.empty((batch, 4 * units), dtype=np.float64)
        dpre[:, :units] = dc * g_g * i_g * (1.0 - i_g)
        dpre[:, units:2 * units] = dc * c_prev * f_g * (1.0 - f_g)
        dpre[:, 2 * units:3 * units] = dc * i_g * (1.0 - g_g * g_g)
        dpre[:, 3 * units:] = dh * tanh_c * o_g * (1.0 - o_g)
        db += dpre.sum(axis=0)
        dwx += x[:, t, :].T @ dpre
        if t > 0:
            dwh += hidden_seq[:, t - 1, :].T @ dpre
        dh = dpre @ wh.T
        dx[:, t, :] = dpre @ wx.T
        dc = dc * f_g
    return dx, dwx, dwh, db


# --------------------------------------------------------------------------
# numba route
# --------------------------------------------------------------------------

if using_numba():
    from numba import njit

    @njit(cache=True)
    def _conv1d_forward_nb(x, w, b):
        batch, c_in, length = x.shape
        c_out = w.shape[0]
        kernel = w.shape[2]
        out_len = length - kernel + 1
        y = np.empty((batch, c_out, out_len), dtype=np.float64)
        for bi in range(batch):
            for o in range(c_out):
                for t in range(out_len):
                    acc = b[o]
                    for c in range(c_in):
                        for k in range(kernel):
                            acc += w[o, c, k] * x[bi, c, t + k]
                    y[bi, o, t] = acc
        return y

    @njit(cache=True)
    def _conv1d_backward_nb(x, w, dy):
        batch, c_in, length = x.shape
        c_out = w.shape[0]
        kernel = w.shape[2]
        out_len = dy.shape[2]
        dx = np.zeros((batch, c_in, length), dtype=np.float64)
        dw = np.zeros((c_out, c_in, kernel), dtype=np.float64)
        db = np.zeros(c_out, dtype=np.float64)
        for bi in range(batch):
            for o in range(c_out):
                for t in range(out_len):
                    g = dy[bi, o, t]
                    db[o] += g
                    for c in range(c_in):
                        for k in range(kernel):
                            dw[o, c, k] += g * x[bi, c, t + k]
                            dx[bi, c, t + k] += g * w[o, c, k]
        return dx, dw, db

    @njit(cache=True)
    def _lstm_forward_nb(x, wx, wh, b):
        batch, steps, _ = x.shape
        units = wh.shape[0]
        gates = np.empty((batch, steps, 4 * units), dtype=np.float64)
        cell_seq = np.empty((batch, steps, units), dtype=np.float64)
        hidden_seq = np.empty((batch, steps, units), dtype=np.float64)
        h = np.zeros((batch, units), dtype=np.float64)
        c = np.zeros((batch, units), dtype=np.float64)
        for t in range(steps):
            xt = np.ascontiguousarray(x[:, t, :])
            pre = np.dot(xt, wx) + np.dot(h, wh)
            for bi in range(batch):
                for u in range(units):
                    z_i = pre[bi, u] + b[u]
                    z_f = pre[bi, units + u] + b[units + u]
                    z_g = pre[bi, 2 * units + u] + b[2 * units + u]
                    z_o = pre[bi, 3 * units + u] + b[3 * units + u]
                    i_g = 1.0 / (1.0 + np.exp(-z_i))
                    f_g = 1.0 / (1.0 + np.exp(-z_f))
                    g_g = np.tanh(z_g)
                    o_g = 1.0 / (1.0 + np.exp(-z_o))
                    cc = f_g * c[bi, u] + i_g * g_g
                    hh = o_g * np.tanh(cc)
                    gates[bi, t, u] = i_g
                    gates[bi, t, units + u] = f_g
                    gates[bi, t, 2 * units + u] = g_g
                    gates[bi, t, 3 * units + u] = o_g
                    c[bi, u] = cc
                    h[bi, u] = hh
                    cell_seq[bi, t, u] = cc
                    hidden_seq[bi, t, u] = hh
        return h, gates, cell_seq, hidden_seq

    @njit(cache=True)
    def _lstm_backward_nb(x, wx, wh, gates, cell_seq, hidden_seq, dh_last):
        batch, steps, feats = x.shape
        units = wh.shape[0]
        width = 4 * units
        dwx = np.zeros((feats, width), dtype=np.float64)
        dwh = np.zeros((units, width), dtype=np.float64)
        db = np.zeros(width, dtype=np.float64)
        dx = np.zeros((batch, steps, feats), dtype=np.float64)
        dh = dh_last.copy()
        dc = np.zeros((batch, units), dtype=np.float64)
        dpre = np.empty((batch, width), dtype=np.float64)
        wx_t = np.ascontiguousarray(wx.T)
        wh_t = np.ascontiguousarray(wh.T)
        for t in range(steps - 1, -1, -1):
            for bi in range(batch):
                for u in range(units):
                    i_g = gates[bi, t, u]
                    f_g = gates[bi, t, units + u]
                    g_g = gates[bi, t, 2 * units + u]
                    o_g = gates[bi, t, 3 * units + u]
                    tanh_c = np.tanh(cell_seq[bi, t, u])
                    dcc = dc[bi, u] + dh[bi, u] * o_g * (1.0 - tanh_c * tanh_c)
                    c_prev = cell_seq[bi, t - 1, u] if t > 0 else 0.0
                    dpre[bi, u] = dcc * g_g * i_g * (1.0 - i_g)
                    dpre[bi, units + u] = dcc * c_prev * f_g * (1.0 - f_g)
                    dpre[bi, 2 * units + u] = dcc * i_g * (1.0 - g_g * g_g)
                    dpre[bi, 3 * units + u] = dh[bi, u] * tanh_c * o_g * (1.0 - o_g)
                    dc[bi, u] = dcc * f_g
            for gi in range(width):
                s = 0.0
                for bi in range(batch):
                    s += dpre[bi, gi]
                db[gi] += s
            xt = np.ascontiguousarray(x[:, t, :])
            dwx += np.dot(np.ascontiguousarray(xt.T), dpre)
            if t > 0:
                hp = np.ascontiguousarray(hidden_seq[:, t - 1, :])
                dwh += np.dot(np.ascontiguousarray(hp.T), dpre)
            dh = np.dot(dpre, wh_t)
            dx[:, t, :] = np.dot(dpre, wx_t)
        return dx, dwx, dwh, db

    conv1d_forward = _conv1d_forward_nb
    conv1d_backward = _conv1d_backward_nb
    lstm_forward = _lstm_forward_nb
    lstm_backward = _lstm_backward_nb
else:
    conv1d_forward = conv1d_forward_numpy
    conv1d_backward = conv1d_backward_numpy
    lstm_forward = lstm_forward_numpy
    lstm_backward = lstm_backward_numpy
