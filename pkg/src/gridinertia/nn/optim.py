"""Plain SGD with optional momentum, and a reduce-on-plateau schedule."""

import numpy as np


def sgd_step(w, grad, lr):
    """Return w - lr * grad as a new array.

    A non-finite gradient aborts the update: the returned array equals w.
    """
    if not np.isfinite(lr) or lr <= 0.0:
        raise ValueError(f"learning rate must be positive and finite, got {lr}")
    w = np.asarray(w, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if w.shape != grad.shape:
        raise ValueError(f"shape mismatch: w {w.shape} vs grad {grad.shape}")
    if not np.all(np.isfinite(grad)):
        return w.copy()
    return w - lr * grad


class SgdOptimizer:
    """Applies sgd_step to a parameter list, with optional momentum.

    step() returns True when the update was applied and False when any
    parameter carried a non-finite gradient, in which case no parameter is
    touched (the whole batch is skipped, not just the offending tensor) and
    the caller can flag the batch.
    """

    def __init__(self, lr, momentum=0.0):
        if not np.isfinite(lr) or lr <= 0.0:
            raise ValueError(f"learning rate must be positive and finite, got {lr}")
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {momentum}")
        self.lr = float(lr)
        self.momentum = float(momentum)
        self._velocity = {}

    def step(self, params):
        for p in params:
            if not np.all(np.isfinite(p.grad)):
                return False
        for p in params:
            if self.momentum > 0.0:
                vel = self._velocity.get(id(p))
                if vel is None:
                    vel = np.zeros_like(p.value)
                vel = self.momentum * vel - self.lr * p.grad
                self._velocity[id(p)] = vel
                p.value += vel
            else:
                p.value -= self.lr * p.grad
        return True


class PlateauSchedule:
    """Halve the learning rate when validation loss stops improving.

    The first update() call records a baseline without counting toward the
    patience window; every later call either resets the window (improvement
    beyond min_improvement) or advances it.  When patience consecutive
    non-improving epochs accumulate, the rate is multiplied by factor
    (never dropping below min_lr) and the window restarts.  With a baseline
    followed by a flat loss, the first cut therefore lands exactly on epoch
    == patience.
    """

    def __init__(self, base_lr, factor=0.5, patience=50,
                 min_improvement=1e-8, min_lr=1e-6):
        if not np.isfinite(base_lr) or base_lr <= 0.0:
            raise ValueError(f"base_lr must be positive and finite, got {base_lr}")
        if not 0.0 < factor < 1.0:
            raise ValueError(f"factor must be in (0, 1), got {factor}")
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        if min_improvement < 0.0:
            raise ValueError(f"min_improvement must be >= 0, got {min_improvement}")
        if min_lr <= 0.0 or min_lr > base_lr:
            raise ValueError(f"min_lr must be in (0, base_lr], got {min_lr}")
        self.lr = float(base_lr)
        self.factor = float(factor)
        self.patience = int(patience)
        self.min_improvement = float(min_improvement)
        self.min_lr = float(min_lr)
        self.best = None
        self._stale = 0

    def update(self, val_loss):
        """Feed one validation loss; returns the rate to use next epoch."""
        val_loss = float(val_loss)
        if self.best is None:
            self.best = val_loss
            return self.lr
        if val_loss < self.best - self.min_improvement:
            self.best = val_loss
            self._stale = 0
        else:
            self._stale += 1
            if self._stale >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self._stale = 0
        return self.lr
