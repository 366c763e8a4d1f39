"""Estimator-style wrappers around the quantum and classical agents.

The task has no external data: ``fit`` runs the agent-environment loop, and
``X`` elsewhere is a vector of percept indices (0..3). Answers follow the
class order ``classes_ = [0, 1]`` for ("no", "yes").
"""

from __future__ import annotations

import dataclasses
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .circuits import stage2_circuit
from .classical import answer_probabilities as classical_answers
from .classical import classical_baseline
from .config import RunConfig
from .losses import YES_ANSWER_PERCEPTS
from .scenario import Backend, answer_probabilities, stage1_train, stage2_train


def check_percepts(X) -> np.ndarray:
    """Validate percept indices given as shape (n,) or (n, 1)."""
    arr = check_array(X, ensure_2d=False, dtype=None)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected one percept index per row, got shape {arr.shape}")
        arr = arr[:, 0]
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValueError("percept indices must be integers")
    arr = arr.astype(int)
    if arr.size and (arr.min() < 0 or arr.max() > 3):
        raise ValueError("percept indices must lie in 0..3")
    return arr


def correct_answers(percepts) -> np.ndarray:
    return np.isin(check_percepts(percepts), YES_ANSWER_PERCEPTS).astype(int)


class _AnswerMixin(ClassifierMixin):
    def _table(self) -> np.ndarray:
        raise NotImplementedError

    def predict_proba(self, X) -> np.ndarray:
        """(p_no, p_yes) for each percept in ``X``."""
        check_is_fitted(self)
        return self._table()[check_percepts(X)]

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def score(self, X=None, y=None, sample_weight=None) -> float:
        """Mean probability of the correct answer; over all four percepts by default."""
        percepts = np.arange(4) if X is None else check_percepts(X)
        truth = correct_answers(percepts) if y is None else np.asarray(y, dtype=int)
        proba = self.predict_proba(percepts)
        hits = proba[np.arange(len(percepts)), truth]
        return float(np.average(hits, weights=sample_weight))


class QuantumPSAgent(_AnswerMixin, BaseEstimator):
    """Two-stage photonic PS agent: per-percept trees, then a shared mesh.

    ``config`` supplies every setting not exposed as a constructor argument.
    """

    def __init__(self, backend: str = "ideal", shots: int = 0, seed: int = 0,
                 stage1_episodes: int = 400, stage2_episodes: int = 1000,
                 threads: int = 1, config: Optional[RunConfig] = None):
        self.backend = backend
        self.shots = shots
        self.seed = seed
        self.stage1_episodes = stage1_episodes
        self.stage2_episodes = stage2_episodes
        self.threads = threads
        self.config = config

    def run_config(self) -> RunConfig:
        base = self.config if self.config is not None else RunConfig()
        cfg = dataclasses.replace(
            base, backend=self.backend, shots=int(self.shots), seed=int(self.seed), threads=int(self.threads),
            stage1=dataclasses.replace(base.stage1, episodes=int(self.stage1_episodes)),
            stage2=dataclasses.replace(base.stage2, episodes=int(self.stage2_episodes)),
        )
        return cfg.validate()

    def fit(self, X=None, y=None):
        """Train both stages; ``X`` and ``y`` are ignored."""
        cfg = self.run_config()
        self.stage1_, self.stage1_records_ = stage1_train(cfg, threads=cfg.threads)
        self.fit_stage2(cfg)
        return self

    def fit_stage2(self, cfg: Optional[RunConfig] = None):
        """Retrain only the mesh on the current stage-1 state."""
        check_is_fitted(self, "stage1_")
        cfg = cfg or self.run_config()
        result = stage2_train(cfg, self.stage1_, threads=cfg.threads)
        self.mesh_params_ = result.mesh_params
        self.accuracy_curve_ = result.accuracy
        self.loss_curve_ = result.loss
        self.flagged_episodes_ = result.flagged
        self.classes_ = np.array([0, 1])
        return self

    def _table(self) -> np.ndarray:
        backend = Backend(self.backend, self.run_config().noise)
        answers = answer_probabilities(stage2_circuit(self.stage1_.params), self.mesh_params_, backend)
        return np.array([answers[p] for p in range(4)])


class ClassicalPSAgent(_AnswerMixin, BaseEstimator):
    """Three-layer classical ECM trained on the same reward schedule."""

    def __init__(self, stage1_episodes: int = 400, stage2_episodes: int = 1000, seed: int = 0):
        self.stage1_episodes = stage1_episodes
        self.stage2_episodes = stage2_episodes
        self.seed = seed

    def fit(self, X=None, y=None):
        result = classical_baseline(self.stage2_episodes, seed=self.seed, stage1_episodes=self.stage1_episodes)
        self.ecm_ = result.ecm
        self.accuracy_curve_ = result.accuracy
        self.classes_ = np.array([0, 1])
        return self

    def _table(self) -> np.ndarray:
        answers = classical_answers(self.ecm_)
        return np.array([answers[p] for p in range(4)])
