"""Imperfect single-photon source, uniform loss, and finite-shot sampling.

The source model is first order in g2: with probability g2 the source
emits a pair in the expected mode, whose extra photon is fully
distinguishable from the principal one. Loss is a per-photon Bernoulli
survival with probability ``transmission``; because it acts equally on
every mode it is applied to the input state. Detectors are threshold
(non photon-number resolving).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .circuits import compile_circuit
from .exceptions import DegenerateDistributionError, UnsupportedInputError
from .fock import FockState, OutputDistribution, as_fock_state, full_distribution, single_photon_amplitudes
from .rng import SeedLike, make_rng

PRINCIPAL, NOISE = 0, 1
DEGENERATE_FLOOR = 1e-15


@dataclass(frozen=True)
class NoiseModel:
    g2: float = 1e-3
    v_hom: float = 0.93
    transmission: float = 0.08

    def __post_init__(self):
        if not 0.0 <= self.g2 < 1.0:
            raise ValueError(f"g2 must lie in [0, 1), got {self.g2}")
        if not 0.0 <= self.v_hom <= 1.0:
            raise ValueError(f"v_hom must lie in [0, 1], got {self.v_hom}")
        if not 0.0 < self.transmission <= 1.0:
            raise ValueError(f"transmission must lie in (0, 1], got {self.transmission}")

    @property
    def indistinguishability(self) -> float:
        """First-order estimate M ~ V_HOM + g2, capped at 1."""
        return min(1.0, self.v_hom + self.g2)

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(g2=0.0, v_hom=1.0, transmission=1.0)


@dataclass(frozen=True)
class MixtureTerm:
    """``photons`` lists ``(mode, tag)``; photons sharing a tag are indistinguishable."""

    weight: float
    photons: Tuple[Tuple[int, int], ...] = ()

    @property
    def photon_count(self) -> int:
        return len(self.photons)


@dataclass(frozen=True)
class InputMixture:
    mode_count: int
    terms: Tuple[MixtureTerm, ...]
    indistinguishability: float = 1.0

    def __post_init__(self):
        weights = [t.weight for t in self.terms]
        if any(w < 0 for w in weights):
            raise ValueError("mixture weights must be non-negative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {sum(weights)!r}, expected 1")


def source_mixture(model: NoiseModel, ideal_input: Sequence[int]) -> InputMixture:
    """Statistical mixture of emitted-and-surviving inputs for one ideal photon."""
    state = as_fock_state(ideal_input)
    if sum(state) != 1:
        raise UnsupportedInputError("only single-photon ideal inputs are supported by the source model")
    k = state.index(1)
    g, t = model.g2, model.transmission
    candidates = [
        ((1 - g) * t, ((k, PRINCIPAL),)),
        (g * t * t, ((k, PRINCIPAL), (k, NOISE))),
        (g * t * (1 - t), ((k, PRINCIPAL),)),
        (g * t * (1 - t), ((k, NOISE),)),
        ((1 - g) * (1 - t) + g * (1 - t) ** 2, ()),
    ]
    terms = tuple(MixtureTerm(w, p) for w, p in candidates if w > 0)
    return InputMixture(len(state), terms, model.indistinguishability)


def term_distribution(U, photons: Sequence[Tuple[int, int]]) -> OutputDistribution:
    """Photon-number-resolved output of one mixture term.

    Each tag group evolves through permanents; distinct groups are
    independent, so their output patterns are convolved.
    """
    U = np.asarray(U, dtype=complex)
    m = U.shape[0]
    groups: Dict[int, List[int]] = defaultdict(lambda: [0] * m)
    for mode, tag in photons:
        groups[tag][mode] += 1
    combined: Dict[FockState, float] = {tuple([0] * m): 1.0}
    for tag in sorted(groups):
        dist = full_distribution(U, groups[tag])
        nxt: Dict[FockState, float] = defaultdict(float)
        for a, pa in combined.items():
            for b, pb in dist.probabilities.items():
                nxt[tuple(x + y for x, y in zip(a, b))] += pa * pb
        combined = dict(nxt)
    return OutputDistribution(m, len(photons), combined)


def noisy_distribution(U, mixture: InputMixture, single_photon: bool = True) -> OutputDistribution:
    """Pool every mixture term by detector click pattern and renormalise.

    Vacuum outcomes are discarded. With ``single_photon`` only single-click
    patterns are kept, as in a single-photon experiment.
    """
    U = np.asarray(U, dtype=complex)
    m = U.shape[0]
    pooled: Dict[FockState, float] = {}
    if single_photon:
        for l in range(m):
            pooled[tuple(int(i == l) for i in range(m))] = 0.0
    for term in mixture.terms:
        if not term.photons:
            continue
        if term.photon_count == 1:
            amp = single_photon_amplitudes(U, term.photons[0][0])
            outcomes = {tuple(int(i == l) for i in range(m)): float(abs(amp[l]) ** 2) for l in range(m)}
        else:
            outcomes = term_distribution(U, term.photons).probabilities
        for occ, prob in outcomes.items():
            clicks = tuple(min(o, 1) for o in occ)
            if single_photon and sum(clicks) != 1:
                continue
            pooled[clicks] = pooled.get(clicks, 0.0) + term.weight * prob
    total = sum(pooled.values())
    if total < DEGENERATE_FLOOR:
        raise DegenerateDistributionError("no detectable outcome survives the noise model")
    probs = {k: v / total for k, v in pooled.items()}
    return OutputDistribution(m, 1 if single_photon else None, probs)


@dataclass
class ShotCounts:
    counts: Dict[FockState, int]
    total_shots: int

    def frequencies(self) -> Dict[FockState, float]:
        return {k: c / self.total_shots for k, c in self.counts.items()}

    def frequency_vector(self, keys: Sequence[FockState]) -> np.ndarray:
        return np.array([self.counts.get(tuple(k), 0) for k in keys], dtype=float) / self.total_shots


def sample_counts(dist: OutputDistribution, shots: int, seed: SeedLike = None) -> ShotCounts:
    """Multinomial draw of ``shots`` outcomes; deterministic for a fixed seed."""
    if int(shots) != shots or shots < 1:
        raise ValueError(f"shots must be a positive integer, got {shots!r}")
    shots = int(shots)
    keys = list(dist.probabilities)
    p = np.clip(np.array([dist.probabilities[k] for k in keys], dtype=float), 0.0, None)
    draws = make_rng(seed).multinomial(shots, p / p.sum())
    return ShotCounts({k: int(c) for k, c in zip(keys, draws)}, shots)


def average_variance(circuit, params, shots: Optional[int], N: int = 10,
                     seeds: Optional[Sequence[int]] = None, input_mode: int = 0) -> float:
    """Mean over N samplings of the per-outcome squared error of shot estimates.

    ``shots`` of ``None`` or 0 means exact evaluation, for which the result is 0.
    """
    U = compile_circuit(circuit, params)
    m = circuit.mode_count
    exact = full_distribution(U, tuple(int(i == input_mode) for i in range(m)))
    if not shots:
        return 0.0
    if seeds is None:
        seeds = list(range(N))
    if len(seeds) < N:
        raise ValueError(f"need {N} seeds, got {len(seeds)}")
    keys = list(exact.probabilities)
    p = np.array([exact.probabilities[k] for k in keys])
    total = 0.0
    for i in range(N):
        p_hat = sample_counts(exact, shots, seeds[i]).frequency_vector(keys)
        total += float(np.mean((p_hat - p) ** 2))
    return total / N
