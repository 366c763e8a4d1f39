"""Parameterized linear-optical circuits and the two task topologies.

Conventions, fixed for the whole package:

* ``BS(theta)`` on modes ``(i, i+1)`` is ``[[cos t, i sin t], [i sin t, cos t]]``.
* ``PS(phi)`` multiplies the amplitude in its mode by ``exp(i phi)``.
* Components act left to right: the first listed component acts first, so
  the compiled matrix is ``C_last @ ... @ C_first``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .exceptions import DegeneratePostSelectionError, DimensionError
from .fock import OutputDistribution

BEAMSPLITTER = "beamsplitter"
PHASE_SHIFTER = "phase_shifter"

POSTSELECT_FLOOR = 1e-12


@dataclass(frozen=True)
class Component:
    """One beamsplitter or phase shifter.

    ``param`` indexes the owning circuit's parameter vector; when it is
    ``None`` the element is fixed at ``angle`` radians.
    """

    kind: str
    modes: Tuple[int, ...]
    param: Optional[int] = None
    angle: float = 0.0

    def __post_init__(self):
        if self.kind == BEAMSPLITTER:
            if len(self.modes) != 2 or self.modes[1] != self.modes[0] + 1:
                raise ValueError(f"beamsplitter needs adjacent modes (i, i+1), got {self.modes}")
        elif self.kind == PHASE_SHIFTER:
            if len(self.modes) != 1:
                raise ValueError(f"phase shifter acts on one mode, got {self.modes}")
        else:
            raise ValueError(f"unknown component kind {self.kind!r}")
        if min(self.modes) < 0:
            raise ValueError(f"negative mode index in {self.modes}")


def beamsplitter(i: int, param: Optional[int] = None, angle: float = 0.0) -> Component:
    return Component(BEAMSPLITTER, (i, i + 1), param, angle)


def phase_shifter(i: int, param: Optional[int] = None, angle: float = 0.0) -> Component:
    return Component(PHASE_SHIFTER, (i,), param, angle)


@dataclass(frozen=True)
class CircuitDescription:
    mode_count: int
    components: Tuple[Component, ...] = field(default_factory=tuple)
    parameter_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if self.mode_count < 1:
            raise ValueError("mode_count must be >= 1")
        used = set()
        for comp in self.components:
            if max(comp.modes) >= self.mode_count:
                raise ValueError(f"component {comp} exceeds {self.mode_count} modes")
            if comp.param is not None:
                if not 0 <= comp.param < self.parameter_count:
                    raise ValueError(f"parameter index {comp.param} outside [0, {self.parameter_count})")
                used.add(comp.param)
        missing = set(range(self.parameter_count)) - used
        if missing:
            raise ValueError(f"parameters never referenced: {sorted(missing)}")


def _check_params(circuit: CircuitDescription, params) -> np.ndarray:
    params = np.asarray(params if params is not None else [], dtype=float).ravel()
    if params.size != circuit.parameter_count:
        raise DimensionError(
            f"circuit takes {circuit.parameter_count} parameters, got {params.size}"
        )
    return params


def compile_circuit(circuit: CircuitDescription, params=None) -> np.ndarray:
    """Return the m x m unitary realised by ``circuit`` at ``params``."""
    params = _check_params(circuit, params)
    U = np.eye(circuit.mode_count, dtype=complex)
    for comp in circuit.components:
        angle = params[comp.param] if comp.param is not None else comp.angle
        if comp.kind == BEAMSPLITTER:
            i, j = comp.modes
            c, s = np.cos(angle), 1j * np.sin(angle)
            top, bottom = U[i].copy(), U[j].copy()
            U[i] = c * top + s * bottom
            U[j] = s * top + c * bottom
        else:
            U[comp.modes[0]] *= np.exp(1j * angle)
    return U


def concatenate(first: CircuitDescription, second: CircuitDescription) -> CircuitDescription:
    """``first`` followed by ``second``; parameters of ``second`` are shifted after ``first``'s."""
    if first.mode_count != second.mode_count:
        raise DimensionError("cannot concatenate circuits with different mode counts")
    offset = first.parameter_count
    shifted = [
        Component(c.kind, c.modes, None if c.param is None else c.param + offset, c.angle)
        for c in second.components
    ]
    return CircuitDescription(
        first.mode_count, first.components + tuple(shifted),
        first.parameter_count + second.parameter_count,
    )


def bind(circuit: CircuitDescription, params) -> CircuitDescription:
    """Freeze every parameterized element of ``circuit`` at ``params``."""
    params = _check_params(circuit, params)
    frozen = [
        Component(c.kind, c.modes, None, float(params[c.param]) if c.param is not None else c.angle)
        for c in circuit.components
    ]
    return CircuitDescription(circuit.mode_count, frozen, 0)


# Stage-1 tree parameter layout.
TREE_ROOT, TREE_SHAPE_ARM_PHASE, TREE_COLOR, TREE_SHAPE, TREE_BLUE_PHASE, TREE_SQUARE_PHASE = range(6)


def stage1_tree() -> CircuitDescription:
    """Four-mode binary tree fed from mode 0.

    A fixed full-swap splitter moves the photon from mode 0 onto the root
    splitter (1, 2); mode 1 then feeds the colour pair (0, 1) and mode 2 the
    shape pair (2, 3). Three phase shifters (shape arm, blue, square) give
    control over all relative output phases.
    """
    components = [
        beamsplitter(0, angle=np.pi / 2),
        beamsplitter(1, TREE_ROOT),
        phase_shifter(2, TREE_SHAPE_ARM_PHASE),
        beamsplitter(0, TREE_COLOR),
        beamsplitter(2, TREE_SHAPE),
        phase_shifter(1, TREE_BLUE_PHASE),
        phase_shifter(3, TREE_SQUARE_PHASE),
    ]
    return CircuitDescription(4, components, 6)


def clements_mesh(m: int = 4) -> CircuitDescription:
    """Rectangular mesh of m(m-1)/2 cells in alternating even/odd columns.

    Each cell on ``(i, i+1)`` is a phase shifter on mode ``i`` followed by a
    tunable splitter; cell ``k`` uses parameters ``2k`` (splitter angle) and
    ``2k + 1`` (phase). The output phase screen is omitted, so the mesh
    reaches any unitary up to diagonal output phases. All-zero parameters
    give the identity.
    """
    components: List[Component] = []
    cell = 0
    for column in range(m):
        for i in range(column % 2, m - 1, 2):
            components.append(phase_shifter(i, 2 * cell + 1))
            components.append(beamsplitter(i, 2 * cell))
            cell += 1
    return CircuitDescription(m, components, 2 * cell)


@dataclass(frozen=True)
class TransferCircuit:
    """Stage-1 tree followed by a trainable mesh, with per-percept tree settings.

    Only the mesh parameters are trainable. Evaluating for a percept loads
    that percept's frozen tree parameters.
    """

    stage1_params: Tuple[Tuple[float, ...], ...]
    mesh: CircuitDescription = field(default_factory=clements_mesh)

    def __post_init__(self):
        object.__setattr__(self, "stage1_params", tuple(tuple(float(v) for v in p) for p in self.stage1_params))

    @property
    def parameter_count(self) -> int:
        return self.mesh.parameter_count

    def for_percept(self, percept: int) -> CircuitDescription:
        tree = bind(stage1_tree(), self.stage1_params[percept])
        return concatenate(tree, self.mesh)

    def tree_unitary(self, percept: int) -> np.ndarray:
        return compile_circuit(stage1_tree(), self.stage1_params[percept])

    def compile(self, mesh_params, percept: int) -> np.ndarray:
        return compile_circuit(self.mesh, mesh_params) @ self.tree_unitary(percept)


def stage2_circuit(stage1_params_per_percept: Mapping[int, Sequence[float]]) -> TransferCircuit:
    """Build the stage-2 circuit from the four frozen stage-1 parameter sets."""
    missing = [p for p in range(4) if p not in stage1_params_per_percept]
    if missing:
        raise KeyError(f"missing stage-1 parameters for percepts {missing}")
    tree = stage1_tree()
    for p in range(4):
        _check_params(tree, stage1_params_per_percept[p])
    return TransferCircuit(tuple(tuple(stage1_params_per_percept[p]) for p in range(4)))


def postselect_answers(dist) -> Tuple[float, float]:
    """Renormalised (p_no, p_yes) from detection in mode 0 ("no") or mode 1 ("yes").

    Accepts an :class:`OutputDistribution` or a vector of per-mode
    single-photon probabilities.
    """
    if isinstance(dist, OutputDistribution):
        if dist.mode_count != 4:
            raise DimensionError("post-selection expects a 4-mode distribution")
        p0, p1 = dist[(1, 0, 0, 0)], dist[(0, 1, 0, 0)]
    else:
        probs = np.asarray(dist, dtype=float)
        p0, p1 = probs[0], probs[1]
    kept = p0 + p1
    if kept < POSTSELECT_FLOOR:
        raise DegeneratePostSelectionError(
            f"post-selected probability {kept:.3e} below floor {POSTSELECT_FLOOR:g}"
        )
    return float(p0 / kept), float(p1 / kept)


def circuit_to_dict(circuit: CircuitDescription, params=None) -> Dict:
    doc = {
        "mode_count": circuit.mode_count,
        "parameter_count": circuit.parameter_count,
        "components": [
            {"kind": c.kind, "modes": list(c.modes),
             **({"param": c.param} if c.param is not None else {"angle": c.angle})}
            for c in circuit.components
        ],
    }
    if params is not None:
        doc["parameters"] = [float(v) for v in _check_params(circuit, params)]
    return doc


def circuit_from_dict(doc: Mapping) -> Tuple[CircuitDescription, Optional[np.ndarray]]:
    components = [
        Component(c["kind"], tuple(c["modes"]), c.get("param"), float(c.get("angle", 0.0)))
        for c in doc["components"]
    ]
    circuit = CircuitDescription(int(doc["mode_count"]), components, int(doc["parameter_count"]))
    params = doc.get("parameters")
    return circuit, (None if params is None else _check_params(circuit, params))


def dumps(circuit: CircuitDescription, params=None) -> str:
    return json.dumps(circuit_to_dict(circuit, params), indent=2)


def loads(text: str) -> Tuple[CircuitDescription, Optional[np.ndarray]]:
    return circuit_from_dict(json.loads(text))
