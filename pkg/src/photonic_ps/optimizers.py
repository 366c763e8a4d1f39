"""Gradient-free stochastic approximation: SPSA, FDSA and a plain descent loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .exceptions import OptimizationFault
from .rng import SeedLike, make_rng

Loss = Callable[[np.ndarray], float]


@dataclass
class OptimizerConfig:
    """Gain schedules a_k = a / (k + 1 + A)^alpha and c_k = c / (k + 1)^gamma.

    ``A`` defaults to 10% of ``max_episodes`` when left as ``None``.
    """

    kind: str = "spsa"
    a: float = 0.1
    c: float = 0.1
    A: Optional[float] = None
    alpha: float = 0.602
    gamma: float = 0.101
    max_episodes: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("spsa", "fdsa"):
            raise ValueError(f"optimizer kind must be 'spsa' or 'fdsa', got {self.kind!r}")
        if self.a <= 0 or self.c <= 0:
            raise ValueError("gain constants a and c must be positive")
        if not (0 < self.alpha <= 1 and 0 < self.gamma <= 1):
            raise ValueError("alpha and gamma must lie in (0, 1]")
        if self.max_episodes < 1:
            raise ValueError("max_episodes must be >= 1")

    @property
    def stability(self) -> float:
        return 0.1 * self.max_episodes if self.A is None else float(self.A)

    def step_size(self, k: int) -> float:
        return self.a / (k + 1 + self.stability) ** self.alpha

    def perturbation(self, k: int) -> float:
        return self.c / (k + 1) ** self.gamma


def _finite(value, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise OptimizationFault(f"non-finite loss at {what}: {value!r}")
    return value


def spsa_gradient(f: Loss, theta, c_k: float, rng: SeedLike = None) -> np.ndarray:
    """Simultaneous-perturbation estimate from two evaluations along a Rademacher direction."""
    theta = np.asarray(theta, dtype=float)
    rng = make_rng(rng)
    delta = rng.choice(np.array([-1.0, 1.0]), size=theta.shape)
    plus = _finite(f(theta + c_k * delta), "theta + c*delta")
    minus = _finite(f(theta - c_k * delta), "theta - c*delta")
    return (plus - minus) / (2.0 * c_k * delta)


def fdsa_gradient(f: Loss, theta, c_k: float, executor=None) -> np.ndarray:
    """Central differences along each coordinate: 2 * dim(theta) evaluations.

    The evaluations are independent; pass a ``concurrent.futures`` executor
    to run them in parallel.
    """
    theta = np.asarray(theta, dtype=float)
    points = []
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e.flat[i] = c_k
        points.extend((theta + e, theta - e))
    values = list(executor.map(f, points)) if executor is not None else [f(p) for p in points]
    values = np.array([_finite(v, f"coordinate {i // 2}") for i, v in enumerate(values)])
    return ((values[0::2] - values[1::2]) / (2.0 * c_k)).reshape(theta.shape)


def wrap_angles(theta) -> np.ndarray:
    """Map angles into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), 2.0 * np.pi)


class StochasticApproximation:
    """Descent driver shared by the generic loop and the training stages.

    ``step`` may be called with a different loss at every episode, which is
    how the reinforcement-learning loops use it.
    """

    def __init__(self, config: OptimizerConfig, wrap: bool = False, executor=None,
                 rng: SeedLike = None):
        self.config = config
        self.wrap = wrap
        self.executor = executor
        self.rng = make_rng(config.seed if rng is None else rng)

    def gradient(self, f: Loss, theta, k: int) -> np.ndarray:
        c_k = self.config.perturbation(k)
        if self.config.kind == "spsa":
            return spsa_gradient(f, theta, c_k, self.rng)
        return fdsa_gradient(f, theta, c_k, self.executor)

    def step(self, f: Loss, theta, k: int) -> np.ndarray:
        theta = np.asarray(theta, dtype=float) - self.config.step_size(k) * self.gradient(f, theta, k)
        return wrap_angles(theta) if self.wrap else theta


@dataclass
class Trajectory:
    thetas: List[np.ndarray] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.thetas[-1]


def descend(f: Loss, theta0, config: OptimizerConfig, wrap: bool = False) -> Trajectory:
    """Run ``config.max_episodes`` updates theta <- theta - a_k * g_k on a fixed loss."""
    opt = StochasticApproximation(config, wrap=wrap)
    theta = np.asarray(theta0, dtype=float).copy()
    traj = Trajectory([theta.copy()], [_finite(f(theta), "theta0")])
    for k in range(config.max_episodes):
        theta = opt.step(f, theta, k)
        traj.thetas.append(theta.copy())
        traj.losses.append(_finite(f(theta), f"episode {k}"))
    return traj
