"""Exact strong simulation of linear-optical circuits on Fock states.

A Fock state is a tuple of non-negative occupation numbers, one per mode.
Transition amplitudes between Fock states are permanents of submatrices
of the circuit unitary, built by repeating columns (input occupations)
and rows (output occupations).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from .exceptions import DimensionError, InvalidTransitionError

FockState = Tuple[int, ...]

UNITARY_ATOL = 1e-10


def as_fock_state(occupations: Sequence[int], mode_count: Optional[int] = None) -> FockState:
    """Validate ``occupations`` and return it as a tuple of ints."""
    state = tuple(int(o) for o in occupations)
    if len(state) < 1:
        raise ValueError("a Fock state needs at least one mode")
    if any(o < 0 for o in state):
        raise ValueError(f"occupations must be non-negative, got {state}")
    if any(int(o) != o for o in occupations):
        raise ValueError(f"occupations must be integers, got {tuple(occupations)}")
    if mode_count is not None and len(state) != mode_count:
        raise ValueError(f"expected {mode_count} modes, got {len(state)}")
    return state


def photon_number(state: Sequence[int]) -> int:
    return int(sum(state))


def basis_states(mode_count: int, photons: int) -> Iterator[FockState]:
    """Yield every occupation pattern of ``photons`` over ``mode_count`` modes.

    There are C(n+m-1, m-1) of them; the order is deterministic.
    """
    for modes in combinations_with_replacement(range(mode_count), photons):
        occ = [0] * mode_count
        for k in modes:
            occ[k] += 1
        yield tuple(occ)


def check_unitary(U, atol: float = UNITARY_ATOL) -> np.ndarray:
    """Return ``U`` as a complex square array, raising if it is not unitary."""
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise DimensionError(f"unitary must be square, got shape {U.shape}")
    dev = np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0]))) if U.size else 0.0
    if dev > atol:
        raise ValueError(f"matrix is not unitary (max deviation {dev:.3e} > {atol:g})")
    return U


def _square(M) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"permanent needs a square matrix, got shape {M.shape}")
    return M


def permanent_ryser(M) -> complex:
    """Ryser's formula with Gray-code ordering of column subsets, O(n 2^n)."""
    M = _square(M)
    n = M.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    row_sums = np.zeros(n, dtype=complex)
    total = 0.0 + 0.0j
    prev = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        flipped = gray ^ prev
        j = flipped.bit_length() - 1
        if gray & flipped:
            row_sums += M[:, j]
        else:
            row_sums -= M[:, j]
        prev = gray
        sign = -1.0 if bin(gray).count("1") % 2 else 1.0
        total += sign * np.prod(row_sums)
    return complex((-1) ** n * total)


def permanent_glynn(M) -> complex:
    """Glynn's formula with Gray-code updates of the sign vector, O(n 2^n).

    The first row keeps sign +1, so 2^(n-1) terms are summed.
    """
    M = _square(M)
    n = M.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    delta = np.ones(n)
    comb = M.sum(axis=0)
    total = np.prod(comb)
    sign = 1.0
    prev = 0
    for k in range(1, 1 << (n - 1)):
        gray = k ^ (k >> 1)
        row = (gray ^ prev).bit_length()  # bit b flips row b + 1
        comb = comb - 2.0 * delta[row] * M[row]
        delta[row] = -delta[row]
        sign = -sign
        total += sign * np.prod(comb)
        prev = gray
    return complex(total / (1 << (n - 1)))


def permanent(M, method: str = "glynn") -> complex:
    """Permanent of a square complex matrix; ``per`` of the 0x0 matrix is 1."""
    if method == "glynn":
        return permanent_glynn(M)
    if method == "ryser":
        return permanent_ryser(M)
    raise ValueError(f"unknown permanent method {method!r}")


def build_submatrix(U, input_state: Sequence[int], output_state: Sequence[int]) -> np.ndarray:
    """Build U_{O,I}: repeat columns by input occupations, then rows by output occupations.

    Repetition follows ascending mode index.
    """
    U = np.asarray(U, dtype=complex)
    m = U.shape[0]
    inp = as_fock_state(input_state, m)
    out = as_fock_state(output_state, m)
    if photon_number(inp) != photon_number(out):
        raise InvalidTransitionError(
            f"photon number mismatch: input {inp} has {photon_number(inp)}, "
            f"output {out} has {photon_number(out)}"
        )
    cols = [j for j, count in enumerate(inp) for _ in range(count)]
    rows = [k for k, count in enumerate(out) for _ in range(count)]
    return U[:, cols][rows, :]


def _norm(inp: FockState, out: FockState) -> float:
    return math.prod(math.factorial(o) for o in inp) * math.prod(math.factorial(o) for o in out)


def outcome_amplitude(U, input_state, output_state, method: str = "glynn") -> complex:
    sub = build_submatrix(U, input_state, output_state)
    return permanent(sub, method) / math.sqrt(_norm(tuple(input_state), tuple(output_state)))


def outcome_probability(U, input_state, output_state, method: str = "glynn") -> float:
    """|per(U_{O,I})|^2 / (prod i_j! prod o_k!)."""
    return float(abs(outcome_amplitude(U, input_state, output_state, method)) ** 2)


@dataclass
class OutputDistribution:
    """Probabilities (and optionally amplitudes) over output Fock states.

    ``photon_number`` is ``None`` for pooled noisy distributions whose keys are
    detector click patterns with differing click counts.
    """

    mode_count: int
    photon_number: Optional[int]
    probabilities: Dict[FockState, float]
    amplitudes: Optional[Dict[FockState, complex]] = field(default=None)

    def __getitem__(self, state) -> float:
        return self.probabilities.get(tuple(state), 0.0)

    def __len__(self) -> int:
        return len(self.probabilities)

    def total(self) -> float:
        return float(sum(self.probabilities.values()))

    def mode_probabilities(self) -> np.ndarray:
        """Per-mode detection probabilities of a single-photon distribution."""
        p = np.zeros(self.mode_count)
        for state, prob in self.probabilities.items():
            if sum(state) != 1:
                raise ValueError("mode_probabilities needs single-photon outcomes")
            p[state.index(1)] += prob
        return p

    @classmethod
    def from_mode_probabilities(cls, probs: Sequence[float]) -> "OutputDistribution":
        m = len(probs)
        keys = [tuple(int(k == l) for k in range(m)) for l in range(m)]
        return cls(m, 1, {key: float(p) for key, p in zip(keys, probs)})


def full_distribution(U, input_state, keep_amplitudes: bool = False,
                      method: str = "glynn") -> OutputDistribution:
    """Every output pattern's probability for ``input_state`` sent through ``U``."""
    U = np.asarray(U, dtype=complex)
    m = U.shape[0]
    inp = as_fock_state(input_state, m)
    n = photon_number(inp)
    probs: Dict[FockState, float] = {}
    amps: Dict[FockState, complex] = {}
    for out in basis_states(m, n):
        amp = outcome_amplitude(U, inp, out, method)
        probs[out] = float(abs(amp) ** 2)
        amps[out] = amp
    return OutputDistribution(m, n, probs, amps if keep_amplitudes else None)


def single_photon_amplitudes(U, input_mode: int) -> np.ndarray:
    """Column ``input_mode`` of ``U``: output amplitudes of one photon."""
    U = np.asarray(U, dtype=complex)
    m = U.shape[0]
    if not 0 <= input_mode < m:
        raise IndexError(f"input_mode {input_mode} out of range for {m} modes")
    return U[:, input_mode].copy()
