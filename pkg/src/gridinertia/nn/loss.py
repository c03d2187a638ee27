"""Training loss."""

import numpy as np


def mse(y_true, y_pred):
    """Mean squared error (1/n) * sum((y_pred - y_true)^2)."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ValueError(
            f"shape mismatch: y_true {y_true.shape} vs y_pred {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("mse needs at least one sample")
    diff = y_pred - y_true
    return float(np.mean(diff * diff))


def mse_grad(y_true, y_pred):
    """Gradient of mse with respect to y_pred: (2/n) * (y_pred - y_true)."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ValueError(
            f"shape mismatch: y_true {y_true.shape} vs y_pred {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("mse_grad needs at least one sample")
    return (2.0 / y_true.size) * (y_pred - y_true)
