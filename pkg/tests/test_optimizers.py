import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from photonic_ps.exceptions import OptimizationFault
from photonic_ps.optimizers import (OptimizerConfig, StochasticApproximation, descend, fdsa_gradient,
                                    spsa_gradient, wrap_angles)


def test_gain_schedules():
    cfg = OptimizerConfig(a=0.2, c=0.3, A=10, alpha=0.602, gamma=0.101)
    assert cfg.step_size(0) == pytest.approx(0.2 / 11 ** 0.602)
    assert cfg.perturbation(4) == pytest.approx(0.3 / 5 ** 0.101)
    assert OptimizerConfig(A=None, max_episodes=400).stability == pytest.approx(40.0)


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(kind="adam")
    with pytest.raises(ValueError):
        OptimizerConfig(a=0.0)
    with pytest.raises(ValueError):
        OptimizerConfig(alpha=1.5)


def test_spsa_symmetric_point():
    assert np.all(spsa_gradient(lambda t: float(np.sum(t ** 2)), np.zeros(5), 0.1, rng=1) == 0.0)


def test_spsa_linear_mean():
    # cross-talk variance on coordinate i is sum_{j != i} b_j^2, so keep magnitudes equal
    b = np.array([2.0, -2.0, 2.0])
    f = lambda t: float(b @ t)
    rng = np.random.default_rng(0)
    g = np.mean([spsa_gradient(f, np.zeros(3), 0.1, rng) for _ in range(10000)], axis=0)
    assert np.all(np.abs(g - b) <= 0.05 * np.abs(b))
    assert np.allclose(g, fdsa_gradient(f, np.zeros(3), 0.1), rtol=0.05)


def test_spsa_taylor_coordinate():
    f = lambda t: float(t[0] ** 2)
    theta = np.array([1.0, 0.0, 0.0])
    g = spsa_gradient(f, theta, 1e-3, rng=7)
    assert g[0] == pytest.approx(2.0, abs=1e-5)
    rng = np.random.default_rng(3)
    others = np.mean([spsa_gradient(f, theta, 1e-3, rng)[1:] for _ in range(4000)], axis=0)
    assert np.all(np.abs(others) < 0.2)


def test_fdsa_quadratic_exact():
    g = fdsa_gradient(lambda t: float(np.sum(t ** 2)), np.array([1.0, 2.0]), 0.1)
    assert np.allclose(g, [2.0, 4.0], atol=1e-12)


def test_fdsa_sinc_factor():
    c = 1e-3
    g = fdsa_gradient(lambda t: math.sin(t[0]), np.array([0.0]), c)
    assert g[0] == pytest.approx(math.sin(c) / c, abs=1e-15)


def test_fdsa_matches_analytic_gradient():
    f = lambda t: math.exp(t[0]) * math.cos(t[1]) + t[2] ** 3
    theta = np.array([0.3, -0.7, 0.5])
    analytic = np.array([math.exp(0.3) * math.cos(-0.7), -math.exp(0.3) * math.sin(-0.7), 3 * 0.25])
    for c in (1e-2, 1e-3):
        assert np.max(np.abs(fdsa_gradient(f, theta, c) - analytic)) < 2 * c ** 2


def test_fdsa_executor_same_result():
    f = lambda t: float(np.sum(np.sin(t) * np.arange(1, t.size + 1)))
    theta = np.linspace(-1, 1, 7)
    with ThreadPoolExecutor(3) as pool:
        assert np.array_equal(fdsa_gradient(f, theta, 0.05, pool), fdsa_gradient(f, theta, 0.05))


def test_descend_convex():
    cfg = OptimizerConfig(kind="spsa", a=0.5, c=0.1, max_episodes=400, seed=0)
    traj = descend(lambda t: float((t[0] - 3.0) ** 2), np.array([0.0]), cfg)
    assert abs(traj.final[0] - 3.0) < 0.05
    assert len(traj.thetas) == 401


def test_descend_constant_fdsa():
    cfg = OptimizerConfig(kind="fdsa", a=1.0, c=0.1, max_episodes=50)
    traj = descend(lambda t: 1.0, np.array([0.4, -0.2]), cfg)
    assert np.array_equal(traj.final, [0.4, -0.2])


def test_descend_deterministic():
    cfg = OptimizerConfig(kind="spsa", a=0.3, c=0.1, max_episodes=100, seed=9)
    f = lambda t: float(np.sum((t - 1) ** 2) + np.sin(3 * t[0]))
    a = descend(f, np.zeros(3), cfg)
    b = descend(f, np.zeros(3), cfg)
    assert all(np.array_equal(x, y) for x, y in zip(a.thetas, b.thetas))


def test_nonfinite_loss_faults():
    with pytest.raises(OptimizationFault):
        StochasticApproximation(OptimizerConfig(kind="fdsa")).step(lambda t: float("nan"), np.zeros(2), 0)


def test_wrap_angles():
    w = wrap_angles([np.pi, -np.pi, 3 * np.pi / 2, 0.1])
    assert np.allclose(w, [np.pi, np.pi, -np.pi / 2, 0.1])
