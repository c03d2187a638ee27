"""Minimal layer library with reverse-mode gradients.

Everything trains in float64; hot paths (1-D convolution, the standard
LSTM recurrence) have numba kernels with a vectorised numpy fallback
selected by GRIDINERTIA_BACKEND.
"""

from .layers import (Conv1d, Dense, Flatten, GraphConv, Lstm, MaxPool1d,
                     Model, NodeMean, Param, Relu, lstm_step)
from .graph import induced_adjacency, renormalized_adjacency
from .loss import mse, mse_grad
from .optim import PlateauSchedule, SgdOptimizer, sgd_step
from .gradcheck import GradCheckResult, grad_check

__all__ = [
    "Conv1d", "Dense", "Flatten", "GraphConv", "Lstm", "MaxPool1d",
    "Model", "NodeMean", "Param", "Relu", "lstm_step",
    "induced_adjacency", "renormalized_adjacency",
    "mse", "mse_grad",
    "PlateauSchedule", "SgdOptimizer", "sgd_step",
    "GradCheckResult", "grad_check",
]
