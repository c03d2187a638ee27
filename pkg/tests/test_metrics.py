"""Regression metrics: hand oracles, edge cases, recomputation agreement."""

import numpy as np
import pytest

from gridinertia.errors import ConfigError
from gridinertia.models import Metrics, regression_metrics


def rng_for(k):
    return np.random.default_rng(6500 + k)


def test_hand_worked_example():
    y = np.array([3.0, 4.0, 5.0, 6.0])
    p = np.array([3.2, 4.8, 5.0, 3.0])
    # |err| = [0.2, 0.8, 0.0, 3.0]; within mu=0.5: 2 of 4.
    m = regression_metrics(y, p, mu=0.5)
    assert m.acc == 0.5
    # mse = (0.04 + 0.64 + 0 + 9) / 4
    assert abs(m.mse - 9.68 / 4.0) < 1e-15
    # ss_tot = sum((y - 4.5)^2) = 2.25 * 2 + 0.25 * 2 = 5.0
    assert abs(m.r2 - (1.0 - 9.68 / 5.0)) < 1e-15
    assert m.n == 4
    assert m.mu == 0.5


def test_error_exactly_mu_counts_as_accurate():
    m = regression_metrics([1.0, 1.0], [1.5, 2.51], mu=0.5)
    assert m.acc == 0.5


def test_perfect_predictions():
    y = rng_for(0).standard_normal(50)
    m = regression_metrics(y, y.copy())
    assert m.acc == 1.0
    assert m.mse == 0.0
    assert m.r2 == 1.0


def test_huge_mu_accepts_everything():
    y = rng_for(1).standard_normal(20)
    p = y + 100.0
    assert regression_metrics(y, p, mu=np.inf).acc == 1.0
    assert regression_metrics(y, p, mu=0.5).acc == 0.0


def test_zero_variance_labels_give_r2_none():
    m = regression_metrics([2.0, 2.0, 2.0], [2.0, 2.1, 1.9])
    assert m.r2 is None
    assert m.mse > 0.0


def test_predicting_the_mean_gives_r2_zero():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    p = np.full(4, y.mean())
    m = regression_metrics(y, p)
    assert abs(m.r2) < 1e-15


def test_metrics_match_recomputation_on_random_vectors():
    rng = rng_for(2)
    for _ in range(200):
        n = int(rng.integers(2, 40))
        y = 3.0 + 5.0 * rng.random(n)
        p = y + rng.standard_normal(n)
        mu = float(rng.uniform(0.1, 2.0))
        m = regression_metrics(y, p, mu=mu)
        err = p - y
        assert abs(m.acc - np.mean(np.abs(err) <= mu)) < 1e-12
        assert abs(m.mse - np.mean(err ** 2)) < 1e-12
        ss_tot = np.sum((y - y.mean()) ** 2)
        if ss_tot == 0.0:
            assert m.r2 is None
        else:
            assert abs(m.r2 - (1.0 - np.sum(err ** 2) / ss_tot)) < 1e-12


def test_rejects_bad_inputs():
    with pytest.raises(ConfigError):
        regression_metrics([1.0, 2.0], [1.0])
    with pytest.raises(ConfigError):
        regression_metrics(np.ones((2, 2)), np.ones((2, 2)))
    with pytest.raises(ConfigError):
        regression_metrics([], [])
    with pytest.raises(ConfigError):
        regression_metrics([1.0], [1.0], mu=0.0)
    with pytest.raises(ConfigError):
        regression_metrics([1.0], [1.0], mu=-0.5)


def test_metrics_is_a_plain_record():
    m = Metrics(acc=0.9, mse=0.01, r2=0.99, n=10, mu=0.5)
    assert (m.acc, m.mse, m.r2, m.n, m.mu) == (0.9, 0.01, 0.99, 10, 0.5)
