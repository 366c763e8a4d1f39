"""The blue-square transfer-learning task and two-stage training of the quantum agent.

Percepts are indexed 0 = red-circle, 1 = blue-square (the target),
2 = red-square, 3 = blue-circle. Stage-1 output modes 0..3 carry the values
red, blue, circle, square; stage-2 answers are read from modes 0 ("no") and
1 ("yes") after post-selection.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .circuits import BEAMSPLITTER, TransferCircuit, compile_circuit, postselect_answers, stage1_tree, stage2_circuit
from .config import RunConfig
from .exceptions import DegeneratePostSelectionError, OptimizationFault
from .losses import (
    KL_EPS, InteractionRecord, LossBreakdown, accuracy, answer_correctness, clamp, kl_binary,
    loss_ps, loss_stage1_batch,
)
from .noise import NoiseModel, noisy_distribution, sample_counts, source_mixture
from .fock import OutputDistribution
from .optimizers import StochasticApproximation, wrap_angles
from .rng import make_rng, spawn

log = logging.getLogger(__name__)

INPUT_STATE = (1, 0, 0, 0)
STAGE1_REWARD = 0.1
STAGE2_REWARD_CORRECT = 1.0
STAGE2_REWARD_WRONG = -0.5


@dataclass(frozen=True)
class Percept:
    index: int
    color: str
    shape: str

    @property
    def name(self) -> str:
        return f"{self.color}-{self.shape}"

    @property
    def value_modes(self) -> Tuple[int, int]:
        return ({"red": 0, "blue": 1}[self.color], {"circle": 2, "square": 3}[self.shape])


PERCEPTS = (
    Percept(0, "red", "circle"),
    Percept(1, "blue", "square"),
    Percept(2, "red", "square"),
    Percept(3, "blue", "circle"),
)


def stage1_reward(percept: int, action: int) -> float:
    return STAGE1_REWARD if action in PERCEPTS[percept].value_modes else -STAGE1_REWARD


def stage2_reward(percept: int, answer: int) -> float:
    """``answer`` is 0 for "no", 1 for "yes"."""
    return STAGE2_REWARD_CORRECT if answer_correctness(percept)[answer] else STAGE2_REWARD_WRONG


def phase_reference(offset: float) -> np.ndarray:
    """Per-mode reference phases: colour modes at 0, shape modes at ``offset``."""
    return np.array([0.0, 0.0, offset, offset])


class Backend:
    """Single-photon mode probabilities on the ideal or noisy simulator, optionally shot-sampled."""

    def __init__(self, kind: str = "ideal", noise: Optional[NoiseModel] = None, shots: int = 0):
        if kind not in ("ideal", "noisy"):
            raise ValueError(f"unknown backend {kind!r}")
        self.kind = kind
        self.noise = noise if noise is not None else NoiseModel()
        self.shots = int(shots)
        self._mixture = source_mixture(self.noise, INPUT_STATE) if kind == "noisy" else None

    @classmethod
    def from_config(cls, config: RunConfig, shots: Optional[int] = None) -> "Backend":
        return cls(config.backend, config.noise, config.shots if shots is None else shots)

    def exact(self, U) -> np.ndarray:
        if self.kind == "ideal":
            return np.abs(np.asarray(U)[:, 0]) ** 2
        return noisy_distribution(U, self._mixture).mode_probabilities()

    def estimate(self, U, rng) -> np.ndarray:
        p = self.exact(U)
        if not self.shots:
            return p
        return np.asarray(rng.multinomial(self.shots, p / p.sum()), dtype=float) / self.shots


@dataclass
class TrainingRecord:
    stage: int
    episode: int
    percept: int
    loss: LossBreakdown
    probabilities: Tuple[float, ...]
    reward: float
    accuracy: Optional[float] = None
    flagged: bool = False


@dataclass
class StageOneState:
    params: Dict[int, np.ndarray]
    probabilities: Dict[int, np.ndarray] = field(default_factory=dict)
    amplitudes: Dict[int, np.ndarray] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {str(p): [float(v) for v in self.params[p]] for p in sorted(self.params)}

    @classmethod
    def from_dict(cls, doc: Dict) -> "StageOneState":
        return summarize_stage1({int(k): np.asarray(v, dtype=float) for k, v in doc.items()})


def summarize_stage1(params: Dict[int, np.ndarray], backend: Optional[Backend] = None) -> StageOneState:
    backend = backend or Backend()
    tree = stage1_tree()
    probs, amps = {}, {}
    for p, theta in params.items():
        U = compile_circuit(tree, theta)
        probs[p] = backend.exact(U)
        amps[p] = U[:, 0].copy()
    return StageOneState(dict(params), probs, amps)


def beamsplitter_params(circuit) -> List[int]:
    return sorted({c.param for c in circuit.components if c.kind == BEAMSPLITTER and c.param is not None})


def fold_angles(theta, indices) -> np.ndarray:
    """Map the given angles into [0, pi/2] without changing sin^2 or cos^2."""
    out = np.array(theta, dtype=float)
    out[indices] = np.arcsin(np.abs(np.sin(out[indices])))
    return out


def _use_empirical(config: RunConfig) -> bool:
    if config.p_t_source == "auto":
        return config.shots > 0
    return config.p_t_source == "empirical"


def train_percept(percept: int, config: RunConfig, seed, records: Optional[List[TrainingRecord]] = None
                  ) -> np.ndarray:
    """Stage-1 SPSA training of one percept's tree; returns its circuit parameters.

    With ``fold_beamsplitters`` the optimiser works on unconstrained angles u
    and the beamsplitters see |asin(sin u)|, so a vanishing amplitude touches
    zero instead of flipping sign and its phase stays put.
    """
    init_ss, action_ss, shot_ss, opt_ss = spawn(seed, 4)
    rng_actions, rng_shots = make_rng(action_ss), make_rng(shot_ss)
    stage = config.stage1
    opt_cfg = dataclasses.replace(stage.optimizer, max_episodes=stage.episodes)
    opt = StochasticApproximation(opt_cfg, wrap=True, rng=make_rng(opt_ss))
    backend = Backend.from_config(config)
    empirical = _use_empirical(config)
    reference = phase_reference(stage.phase_offsets[percept])
    tree = stage1_tree()
    folded = beamsplitter_params(tree) if stage.fold_beamsplitters else []
    theta = make_rng(init_ss).uniform(-np.pi, np.pi, tree.parameter_count)

    def measure(th):
        U = compile_circuit(tree, fold_angles(th, folded))
        return backend.estimate(U, rng_shots), U[:, 0], U

    for k in range(stage.episodes):
        probs, amps, U = measure(theta)
        exact = backend.exact(U) if backend.shots else probs
        actions = rng_actions.choice(4, size=stage.batch_size, p=exact / exact.sum())
        batch = [
            InteractionRecord(percept, int(a), stage1_reward(percept, int(a)),
                              float(probs[a] if empirical else exact[a]), k)
            for a in actions
        ]

        episode_seed = int(rng_shots.integers(2 ** 63)) if backend.shots else 0

        def f(th):
            U = compile_circuit(tree, fold_angles(th, folded))
            p = backend.estimate(U, make_rng(episode_seed)) if backend.shots else backend.exact(U)
            amp = U[:, 0]
            return loss_stage1_batch(batch, p, amp, reference, stage.phase_gauge).total

        breakdown = loss_stage1_batch(batch, probs, amps, reference, stage.phase_gauge)
        if records is not None:
            records.append(TrainingRecord(1, k, percept, breakdown, tuple(float(x) for x in exact),
                                          float(np.mean([r.reward for r in batch]))))
        try:
            theta = opt.step(f, theta, k)
        except OptimizationFault as exc:
            raise OptimizationFault(str(exc), episode=k) from exc
        if config.log_interval and (k + 1) % config.log_interval == 0:
            log.info("stage1 percept %d episode %d loss %.4f", percept, k + 1, breakdown.total)
    return fold_angles(theta, folded)


def stage1_train(config: RunConfig, threads: Optional[int] = None) -> Tuple[StageOneState, List[TrainingRecord]]:
    """Train the four percept trees independently; seeds are split per percept."""
    stage1_ss, _ = spawn(config.seed, 2)
    seeds = spawn(stage1_ss, 4)
    logs: List[List[TrainingRecord]] = [[] for _ in range(4)]
    workers = threads or config.threads
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(train_percept, p, config, seeds[p], logs[p]) for p in range(4)]
        params = {p: fut.result() for p, fut in enumerate(futures)}
    records = [r for chunk in logs for r in chunk]
    return summarize_stage1(params, Backend(config.backend, config.noise)), records


def answer_probabilities(circuit: TransferCircuit, mesh_params, backend: Backend,
                         rng=None) -> Dict[int, Tuple[float, float]]:
    """Post-selected (p_no, p_yes) per percept; a degenerate event answers at random."""
    mesh_U = compile_circuit(circuit.mesh, mesh_params)
    out = {}
    for p in range(4):
        U = mesh_U @ circuit.tree_unitary(p)
        probs = backend.exact(U) if rng is None else backend.estimate(U, rng)
        try:
            out[p] = postselect_answers(probs)
        except DegeneratePostSelectionError:
            out[p] = (0.5, 0.5)
    return out


def evaluate(mesh_params, stage1: StageOneState, backend: Backend, rng=None
             ) -> Tuple[Dict[int, Tuple[float, float]], float]:
    """Answer probabilities and accuracy; shot-estimated when ``backend.shots`` > 0 and ``rng`` given."""
    circuit = stage2_circuit(stage1.params)
    answers = answer_probabilities(circuit, mesh_params, backend,
                                   rng=make_rng(rng) if backend.shots else None)
    return answers, accuracy(answers)


@dataclass
class StageTwoResult:
    mesh_params: np.ndarray
    accuracy: np.ndarray
    loss: np.ndarray
    records: List[TrainingRecord]
    flagged: List[int]


Checkpoint = Callable[[Dict], None]


def stage2_train(config: RunConfig, stage1: StageOneState, checkpoint: Optional[Checkpoint] = None,
                 resume: Optional[Dict] = None, threads: Optional[int] = None) -> StageTwoResult:
    """FDSA training of the mesh on one uniformly sampled interaction per episode.

    The PS loss acts on the raw probability of the chosen answer mode, whose
    clamped target tops out at 0.5; the rest of the photon goes to the
    discarded modes. Accuracy is monitored on exact backend probabilities.
    ``resume`` takes a document previously passed to ``checkpoint``. An
    episode whose post-selected mass vanishes answers uniformly at random,
    records loss kl_binary(eps, target) and is flagged.
    """
    _, stage2_ss = spawn(config.seed, 2)
    init_ss, percept_ss, answer_ss, shot_ss, opt_ss = spawn(stage2_ss, 5)
    rngs = {
        "percept": make_rng(percept_ss),
        "answer": make_rng(answer_ss),
        "shots": make_rng(shot_ss),
        "optimizer": make_rng(opt_ss),
    }
    stage = config.stage2
    circuit = stage2_circuit(stage1.params)
    trees = [circuit.tree_unitary(p) for p in range(4)]
    backend = Backend.from_config(config)
    exact_backend = Backend(config.backend, config.noise, shots=0)
    empirical = _use_empirical(config)
    opt_cfg = dataclasses.replace(stage.optimizer, max_episodes=stage.episodes)
    workers = threads or config.threads
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    opt = StochasticApproximation(opt_cfg, wrap=True, executor=pool, rng=rngs["optimizer"])
    try:
        return _stage2_loop(config, stage, circuit, trees, backend, exact_backend, empirical, opt,
                            rngs, init_ss, checkpoint, resume)
    finally:
        if pool is not None:
            pool.shutdown()


def _stage2_loop(config, stage, circuit, trees, backend, exact_backend, empirical, opt,
                 rngs, init_ss, checkpoint, resume) -> "StageTwoResult":
    if stage.mesh_init == "identity":
        theta = np.zeros(circuit.parameter_count)
    else:
        theta = wrap_angles(make_rng(init_ss).uniform(-np.pi, np.pi, circuit.parameter_count))
    start = 0
    acc_curve = np.full(stage.episodes, np.nan)
    loss_curve = np.full(stage.episodes, np.nan)
    records: List[TrainingRecord] = []
    flagged: List[int] = []
    if resume is not None:
        start = int(resume["episode"])
        theta = np.asarray(resume["params"], dtype=float)
        for name, state in resume["rng"].items():
            rngs[name].bit_generator.state = state
        acc_curve[:start] = resume["accuracy"][:start]
        loss_curve[:start] = resume["loss"][:start]
        flagged = list(resume.get("flagged", []))

    def mode_probs(th, p, sampled):
        U = compile_circuit(circuit.mesh, th) @ trees[p]
        return backend.estimate(U, rngs["shots"]) if sampled else backend.exact(U)

    for k in range(start, stage.episodes):
        p = int(rngs["percept"].integers(4))
        exact = mode_probs(theta, p, False)
        probs = mode_probs(theta, p, True) if backend.shots else exact
        is_flagged = False
        try:
            p_no, p_yes = postselect_answers(probs)
        except DegeneratePostSelectionError:
            p_no = p_yes = 0.5
            is_flagged = True
            flagged.append(k)
            log.warning("stage2 episode %d: degenerate post-selection", k)
        answer = int(rngs["answer"].random() < p_yes)
        reward = stage2_reward(p, answer)
        p_prev = float(probs[answer] if empirical else exact[answer])
        target = clamp(p_prev + reward)

        # common random numbers: every evaluation of this episode sees the same shot noise
        episode_seed = int(rngs["shots"].integers(2 ** 63)) if backend.shots else 0

        def f(th):
            if backend.shots:
                U = compile_circuit(circuit.mesh, th) @ trees[p]
                return kl_binary(backend.estimate(U, make_rng(episode_seed))[answer], target)
            return kl_binary(mode_probs(th, p, False)[answer], target)

        if is_flagged:
            loss_curve[k] = kl_binary(KL_EPS, target)
        else:
            loss_curve[k] = loss_ps(float(probs[answer]), p_prev, reward)
        try:
            theta = opt.step(f, theta, k)
        except OptimizationFault as exc:
            raise OptimizationFault(str(exc), episode=k) from exc
        acc_curve[k] = accuracy(answer_probabilities(circuit, theta, exact_backend))
        records.append(TrainingRecord(2, k, p, LossBreakdown(loss_curve[k], total=loss_curve[k]),
                                      tuple(float(x) for x in exact), reward, acc_curve[k], is_flagged))
        if config.log_interval and (k + 1) % config.log_interval == 0:
            log.info("stage2 episode %d accuracy %.4f", k + 1, acc_curve[k])
        if checkpoint is not None and config.checkpoint_every and (k + 1) % config.checkpoint_every == 0:
            checkpoint({
                "episode": k + 1,
                "params": [float(v) for v in theta],
                "rng": {name: r.bit_generator.state for name, r in rngs.items()},
                "accuracy": [float(v) for v in acc_curve[:k + 1]],
                "loss": [float(v) for v in loss_curve[:k + 1]],
                "flagged": list(flagged),
            })
    return StageTwoResult(theta, acc_curve, loss_curve, records, flagged)
