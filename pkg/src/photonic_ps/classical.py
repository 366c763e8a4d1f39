"""Classical projective simulation on a layered clip graph (ECM)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .losses import accuracy
from .rng import SeedLike, make_rng

H_MIN = 0.01
H_INIT = 1.0

STATE, INTERMEDIATE, ACTION = "state", "intermediate", "action"

PERCEPT_NAMES = ("red-circle", "blue-square", "red-square", "blue-circle")
VALUE_NAMES = ("red", "blue", "circle", "square")
ANSWER_NAMES = ("no", "yes")

Edge = Tuple[str, str]


@dataclass(frozen=True)
class WalkTrace:
    edges: Tuple[Edge, ...]

    @property
    def start(self) -> str:
        return self.edges[0][0]

    @property
    def end(self) -> str:
        return self.edges[-1][1]


class EcmGraph:
    """Weighted directed graph of clips; hop probabilities are h_ij / sum_j' h_ij'.

    Weights never drop below ``h_min``.
    """

    def __init__(self, clips: Dict[str, str], edges: Dict[Edge, float], h_min: float = H_MIN):
        self.clips = dict(clips)
        self.h_min = h_min
        self.edges: Dict[Edge, float] = {}
        self._out: Dict[str, List[str]] = {c: [] for c in self.clips}
        for (i, j), h in edges.items():
            if i not in self.clips or j not in self.clips:
                raise KeyError(f"edge ({i}, {j}) references an unknown clip")
            self.edges[(i, j)] = max(float(h), h_min)
            self._out[i].append(j)
        for clip, layer in self.clips.items():
            if layer != ACTION and not self._out[clip]:
                raise ValueError(f"clip {clip!r} is a dead end")

    def successors(self, clip: str) -> List[str]:
        return list(self._out[clip])

    def transition_probabilities(self, clip: str) -> Dict[str, float]:
        targets = self._out[clip]
        if not targets:
            raise ValueError(f"clip {clip!r} has no outgoing edges")
        total = sum(self.edges[(clip, j)] for j in targets)
        return {j: self.edges[(clip, j)] / total for j in targets}

    def transition_probability(self, i: str, j: str) -> float:
        if (i, j) not in self.edges:
            raise KeyError(f"no edge ({i}, {j})")
        return self.transition_probabilities(i)[j]

    def deliberate(self, state_clip: str, rng: SeedLike = None, stop_layer: str = ACTION) -> WalkTrace:
        """Random walk from ``state_clip`` until a clip of ``stop_layer`` is reached."""
        if self.clips.get(state_clip) != STATE:
            raise ValueError(f"{state_clip!r} is not a state clip")
        rng = make_rng(rng)
        clip, edges = state_clip, []
        while self.clips[clip] != stop_layer:
            probs = self.transition_probabilities(clip)
            targets = list(probs)
            nxt = targets[rng.choice(len(targets), p=np.array([probs[t] for t in targets]))]
            edges.append((clip, nxt))
            clip = nxt
        return WalkTrace(tuple(edges))

    def update_weights(self, trace: WalkTrace, reward: float,
                       edges: Optional[Sequence[Edge]] = None) -> "EcmGraph":
        """h <- max(h + reward, h_min) on every edge of ``trace`` (or the given subset)."""
        for edge in trace.edges if edges is None else edges:
            self.edges[edge] = max(self.edges[edge] + reward, self.h_min)
        self._forget()
        return self

    def _forget(self) -> None:
        """Extension point for forgetting/glow damping; the basic agent does nothing."""

    def path_probabilities(self, state_clip: str) -> Dict[str, float]:
        """Probability of ending in each action clip, summed over all paths."""
        out: Dict[str, float] = {}
        frontier = {state_clip: 1.0}
        while frontier:
            nxt: Dict[str, float] = {}
            for clip, p in frontier.items():
                if self.clips[clip] == ACTION:
                    out[clip] = out.get(clip, 0.0) + p
                    continue
                for j, q in self.transition_probabilities(clip).items():
                    nxt[j] = nxt.get(j, 0.0) + p * q
            frontier = nxt
        return out

    def copy(self) -> "EcmGraph":
        return EcmGraph(self.clips, self.edges, self.h_min)

    def to_dict(self) -> Dict:
        return {
            "h_min": self.h_min,
            "clips": [{"name": c, "layer": layer} for c, layer in self.clips.items()],
            "edges": [{"from": i, "to": j, "weight": h} for (i, j), h in self.edges.items()],
        }

    @classmethod
    def from_dict(cls, doc: Dict) -> "EcmGraph":
        clips = {c["name"]: c["layer"] for c in doc["clips"]}
        edges = {(e["from"], e["to"]): float(e["weight"]) for e in doc["edges"]}
        return cls(clips, edges, float(doc.get("h_min", H_MIN)))


def correct_values(percept: int) -> Tuple[int, int]:
    """Indices into VALUE_NAMES of the percept's colour and shape."""
    return ((0, 2), (1, 3), (0, 3), (1, 2))[percept]


def task_ecm(h_init: float = H_INIT, h_min: float = H_MIN) -> EcmGraph:
    """Three-layer graph: 4 percepts -> 4 observable values -> {no, yes}."""
    clips = {p: STATE for p in PERCEPT_NAMES}
    clips.update({v: INTERMEDIATE for v in VALUE_NAMES})
    clips.update({a: ACTION for a in ANSWER_NAMES})
    edges = {(p, v): h_init for p in PERCEPT_NAMES for v in VALUE_NAMES}
    edges.update({(v, a): h_init for v in VALUE_NAMES for a in ANSWER_NAMES})
    return EcmGraph(clips, edges, h_min)


def answer_probabilities(ecm: EcmGraph) -> Dict[int, Tuple[float, float]]:
    out = {}
    for i, name in enumerate(PERCEPT_NAMES):
        probs = ecm.path_probabilities(name)
        out[i] = (probs.get("no", 0.0), probs.get("yes", 0.0))
    return out


def classical_accuracy_bound() -> float:
    """1/4 * 100% + 1/2 * 75% + 1/4 * 50%."""
    return 0.25 * 1.00 + 0.5 * 0.75 + 0.25 * 0.50


@dataclass
class ClassicalResult:
    accuracy: np.ndarray
    ecm: EcmGraph
    per_percept: Dict[int, float] = field(default_factory=dict)


def classical_baseline(stage2_episodes: int = 1000, seed: SeedLike = 0,
                       stage1_episodes: int = 400, batch_size: int = 10,
                       stage1_reward: float = 0.1, reward_correct: float = 1.0,
                       reward_wrong: float = -0.5) -> ClassicalResult:
    """Train the classical agent on both stages and return its accuracy curve.

    Stage 1 trains percept -> value edges with +/-0.1 rewards. Before stage 2
    each percept's two correct-value edges are set to their mean, so the walk
    reaches colour and shape equally often. Stage 2 samples percepts
    uniformly and only updates value -> answer edges.
    """
    rng = make_rng(seed)
    ecm = task_ecm()
    for i, name in enumerate(PERCEPT_NAMES):
        good = {VALUE_NAMES[v] for v in correct_values(i)}
        for _ in range(stage1_episodes * batch_size):
            trace = ecm.deliberate(name, rng, stop_layer=INTERMEDIATE)
            ecm.update_weights(trace, stage1_reward if trace.end in good else -stage1_reward)
        mean = sum(ecm.edges[(name, v)] for v in good) / 2.0
        for v in good:
            ecm.edges[(name, v)] = mean

    curve = np.empty(stage2_episodes)
    for k in range(stage2_episodes):
        i = int(rng.integers(4))
        trace = ecm.deliberate(PERCEPT_NAMES[i], rng)
        correct = "yes" if i == 1 else "no"
        reward = reward_correct if trace.end == correct else reward_wrong
        ecm.update_weights(trace, reward, edges=trace.edges[1:])
        curve[k] = accuracy(answer_probabilities(ecm))
    final = answer_probabilities(ecm)
    per_percept = {i: (final[i][1] if i == 1 else final[i][0]) for i in range(4)}
    return ClassicalResult(curve, ecm, per_percept)
