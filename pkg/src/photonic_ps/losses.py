"""Loss functions and the accuracy metric of the quantum PS agent."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

KL_EPS = 1e-9
PHASE_FLOOR = 1e-9
SHANNON_WEIGHT = 10.0
PHASE_GAUGES = ("median", "largest")

NO_ANSWER_PERCEPTS = (0, 2, 3)
YES_ANSWER_PERCEPTS = (1,)


def clamp(x: float) -> float:
    """C(x) = 0.5 - ReLU(0.5 - ReLU(x)); the image is [0, 0.5]."""
    return 0.5 - max(0.0, 0.5 - max(0.0, x))


def _xlogy(x: float, y: float) -> float:
    return 0.0 if x == 0.0 else x * math.log(y)


def kl_binary(p: float, q: float, eps: float = KL_EPS) -> float:
    """KL divergence of {p, 1-p} from {q, 1-q}, natural log, q clipped to [eps, 1-eps]."""
    p = min(max(float(p), 0.0), 1.0)
    q = min(max(float(q), eps), 1.0 - eps)
    return _xlogy(p, p / q) + _xlogy(1.0 - p, (1.0 - p) / (1.0 - q))


def loss_ps(p_next: float, p_prev: float, reward: float) -> float:
    """Distance of the current action probability from the clamped rewarded target.

    ``p_prev`` is a constant recorded before the update; only ``p_next``
    depends on the circuit parameters.
    """
    return kl_binary(p_next, clamp(p_prev + reward))


def loss_shannon(p_color: float, p_shape: float, tol: float = 1e-9) -> float:
    """ln 2 + sum p ln p over the colour/shape partition; zero at 50/50."""
    if abs(p_color + p_shape - 1.0) > tol:
        raise ValueError(f"p_color + p_shape = {p_color + p_shape!r}, expected 1")
    return math.log(2.0) + _xlogy(p_color, p_color) + _xlogy(p_shape, p_shape)


def loss_phase(amplitudes, reference: Optional[Sequence[float]] = None,
               floor: float = PHASE_FLOOR, gauge: str = "median") -> float:
    """Sum of |arg a_l| over significant amplitudes, up to a global phase.

    ``gauge="median"`` takes the global phase that minimises the sum (one of
    the amplitudes' own phases), which keeps the loss continuous when two
    amplitudes swap as the largest. ``gauge="largest"`` measures phases
    relative to the largest-modulus amplitude. ``reference`` optionally gives
    a target phase per output mode. Amplitudes below ``floor`` in modulus
    are ignored.
    """
    if gauge not in PHASE_GAUGES:
        raise ValueError(f"unknown phase gauge {gauge!r}")
    a = np.asarray(amplitudes, dtype=complex)
    if reference is not None:
        a = a * np.exp(-1j * np.asarray(reference, dtype=float))
    mod = np.abs(a)
    if mod.max(initial=0.0) < floor:
        return 0.0
    if gauge == "largest":
        gauge_phase = a[np.argmax(mod)] / mod.max()
        return float(np.sum(np.abs(np.angle(a[mod >= floor] / gauge_phase))))
    phases = np.angle(a[mod >= floor])
    # |wrapped difference| between every pair; np.angle keeps it in [-pi, pi]
    diffs = np.abs(np.angle(np.exp(1j * (phases[:, None] - phases[None, :]))))
    return float(diffs.sum(axis=0).min())


@dataclass(frozen=True)
class InteractionRecord:
    percept: int
    action: int
    reward: float
    p_t: float
    episode: int = 0


@dataclass(frozen=True)
class LossBreakdown:
    ps: float
    shannon: float = 0.0
    phase: float = 0.0
    total: float = 0.0

    def __add__(self, other: "LossBreakdown") -> "LossBreakdown":
        return LossBreakdown(self.ps + other.ps, self.shannon + other.shannon,
                             self.phase + other.phase, self.total + other.total)

    @classmethod
    def zero(cls) -> "LossBreakdown":
        return cls(0.0, 0.0, 0.0, 0.0)


def color_shape_split(probabilities) -> Tuple[float, float]:
    p = np.asarray(probabilities, dtype=float)
    return float(p[0] + p[1]), float(p[2] + p[3])


def loss_stage1(record: InteractionRecord, probabilities, amplitudes,
                phase_reference: Optional[Sequence[float]] = None,
                phase_gauge: str = "median") -> LossBreakdown:
    """L_PS + 10 L_Shannon + L_Phase for one interaction.

    ``probabilities`` and ``amplitudes`` are evaluated at the current
    parameters; ``record`` holds the sampled action and its recorded p_t.
    """
    ps = loss_ps(float(probabilities[record.action]), record.p_t, record.reward)
    p_color, p_shape = color_shape_split(probabilities)
    total_p = p_color + p_shape
    shannon = loss_shannon(p_color / total_p, p_shape / total_p)
    phase = loss_phase(amplitudes, phase_reference, gauge=phase_gauge)
    return LossBreakdown(ps, shannon, phase, ps + SHANNON_WEIGHT * shannon + phase)


def loss_stage1_batch(records: Sequence[InteractionRecord], probabilities, amplitudes,
                      phase_reference: Optional[Sequence[float]] = None,
                      phase_gauge: str = "median") -> LossBreakdown:
    total = LossBreakdown.zero()
    for rec in records:
        total = total + loss_stage1(rec, probabilities, amplitudes, phase_reference, phase_gauge)
    return total


def answer_correctness(percept: int) -> Tuple[float, float]:
    """(Lambda_no, Lambda_yes) indicator pair for ``percept``."""
    return (1.0, 0.0) if percept in NO_ANSWER_PERCEPTS else (0.0, 1.0)


def accuracy(answer_probs: Mapping[int, Tuple[float, float]]) -> float:
    """Mean probability of answering correctly over the four percepts."""
    missing = [i for i in range(4) if i not in answer_probs]
    if missing:
        raise KeyError(f"answer probabilities missing for percepts {missing}")
    total = 0.0
    for i in range(4):
        p_no, p_yes = answer_probs[i]
        lam_no, lam_yes = answer_correctness(i)
        total += p_no * lam_no + p_yes * lam_yes
    return total / 4.0
