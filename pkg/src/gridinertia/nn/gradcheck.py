"""Central-difference gradient verification.

The checker perturbs parameter tensors in place, so the loss callable must
read the live arrays (layers keep references to their Param values) and be
deterministic.  Analytic gradients are snapshotted right after the unperturbed
base evaluation, so the callable may refresh grad arrays in place on every
call without contaminating the comparison.  Coordinates sitting on a
non-differentiable kink -- e.g. a ReLU input at exactly zero, where one-sided
slopes disagree -- are reported as excluded rather than failed, since no
finite-difference estimate is meaningful there.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GradCheckResult:
    """Outcome of a finite-difference sweep.

    max_rel_error uses |analytic - numeric| / max(1, |analytic|, |numeric|),
    i.e. absolute error below unit gradient magnitude and relative above it.
    """
    max_rel_error: float
    n_checked: int
    n_excluded: int
    worst_tensor: int
    worst_index: int

    @property
    def n_total(self):
        return self.n_checked + self.n_excluded


def grad_check(func, tensors, eps=1e-5, kink_tol=1e-3,
               max_coords_per_tensor=None, rng=None):
    """Compare analytic gradients against central differences.

    func          -- nullary callable returning the scalar loss at the
                     current parameter values.
    tensors       -- sequence of (value_array, analytic_grad_array) pairs;
                     value arrays are perturbed in place and restored; grad
                     arrays are copied once, right after the base evaluation,
                     so a func that reruns backward in place is safe.
    eps           -- finite-difference step.
    kink_tol      -- threshold on the disagreement of one-sided slopes
                     beyond which a coordinate is excluded as a kink.
    max_coords_per_tensor -- when set, check at most this many coordinates
                     per tensor, sampled without replacement using rng.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if max_coords_per_tensor is not None and max_coords_per_tensor < 1:
        raise ValueError("max_coords_per_tensor must be >= 1 when given")
    if max_coords_per_tensor is not None and rng is None:
        raise ValueError("coordinate sampling needs an rng for reproducibility")

    f_base = float(func())
    # Copy the analytic gradients before the first perturbation: func may
    # recompute grad arrays in place, and those refreshes describe perturbed
    # parameter points, not the base point under test.
    analytic_grads = []
    for t_idx, (value, grad) in enumerate(tensors):
        gflat = np.array(grad, dtype=np.float64).reshape(-1)
        if value.size != gflat.size:
            raise ValueError(
                f"tensor {t_idx}: value size {value.size} != grad size {gflat.size}")
        analytic_grads.append(gflat)

    worst = 0.0
    worst_tensor = -1
    worst_index = -1
    n_checked = 0
    n_excluded = 0
    for t_idx, (value, _) in enumerate(tensors):
        flat = value.reshape(-1)
        gflat = analytic_grads[t_idx]
        if not np.shares_memory(flat, value):
            raise ValueError(
                f"tensor {t_idx}: value array must be contiguous so in-place "
                "perturbation reaches the loss")
        if max_coords_per_tensor is None or flat.size <= max_coords_per_tensor:
            coords = range(flat.size)
        else:
            coords = rng.choice(flat.size, size=max_coords_per_tensor,
                                replace=False)
        for i in coords:
            original = flat[i]
            flat[i] = original + eps
            f_plus = float(func())
            flat[i] = original - eps
            f_minus = float(func())
            flat[i] = original
            slope_right = (f_plus - f_base) / eps
            slope_left = (f_base - f_minus) / eps
            if abs(slope_right - slope_left) > kink_tol * (
                    1.0 + abs(slope_right) + abs(slope_left)):
                n_excluded += 1
                continue
            numeric = (f_plus - f_minus) / (2.0 * eps)
            analytic = gflat[i]
            rel = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
            if rel > worst:
                worst = rel
                worst_tensor = t_idx
                worst_index = int(i)
            n_checked += 1
    return GradCheckResult(worst, n_checked, n_excluded, worst_tensor, worst_index)
