import numpy as np
import pytest
from scipy.optimize import least_squares

from photonic_ps.circuits import (CircuitDescription, beamsplitter, bind, clements_mesh, compile_circuit,
                                  concatenate, dumps, loads, phase_shifter, postselect_answers, stage1_tree,
                                  stage2_circuit)
from photonic_ps.exceptions import DegeneratePostSelectionError
from photonic_ps.fock import OutputDistribution

from conftest import random_unitary


def test_empty_circuit_is_identity():
    assert np.allclose(compile_circuit(CircuitDescription(4, [], 0), []), np.eye(4))


def test_balanced_and_swap():
    bs = CircuitDescription(2, [beamsplitter(0, 0)], 1)
    U = compile_circuit(bs, [np.pi / 4])
    assert np.allclose(np.abs(U[:, 0]) ** 2, [0.5, 0.5])
    two = CircuitDescription(2, [beamsplitter(0, 0), beamsplitter(0, 1)], 2)
    assert abs(compile_circuit(two, [np.pi / 4, np.pi / 4])[1, 0]) ** 2 == pytest.approx(1.0)


def test_beamsplitter_convention():
    th = 0.3
    U = compile_circuit(CircuitDescription(2, [beamsplitter(0, 0)], 1), [th])
    assert np.allclose(U, [[np.cos(th), 1j * np.sin(th)], [1j * np.sin(th), np.cos(th)]])
    P = compile_circuit(CircuitDescription(2, [phase_shifter(1, 0)], 1), [th])
    assert np.allclose(P, np.diag([1, np.exp(1j * th)]))


def test_parameter_count_checked():
    with pytest.raises(ValueError):
        compile_circuit(stage1_tree(), np.zeros(5))


def test_component_validation():
    with pytest.raises(ValueError):
        beamsplitter(-1)


def test_tree_uniform_split():
    U = compile_circuit(stage1_tree(), [np.pi / 4, 0, np.pi / 4, np.pi / 4, 0, 0])
    assert np.allclose(np.abs(U[:, 0]) ** 2, 0.25)


def test_tree_root_full_transmission():
    rng = np.random.default_rng(0)
    theta = rng.uniform(-np.pi, np.pi, 6)
    theta[0] = 0.0
    p = np.abs(compile_circuit(stage1_tree(), theta)[:, 0]) ** 2
    assert p[0] + p[1] == pytest.approx(1.0)


def test_tree_reaches_all_relative_phases():
    # the three phase shifters move the four output phases independently (up to a global phase)
    base = np.array([np.pi / 4, 0, np.pi / 4, np.pi / 4, 0, 0])
    a0 = compile_circuit(stage1_tree(), base)[:, 0]
    J = []
    for k in (1, 4, 5):
        th = base.copy()
        th[k] += 1e-6
        a = compile_circuit(stage1_tree(), th)[:, 0]
        J.append(np.angle(a / a0) / 1e-6)
    J = np.array(J)
    rel = J[:, 1:] - J[:, :1]
    assert np.linalg.matrix_rank(rel, tol=1e-3) == 3


def test_mesh_zero_is_identity():
    mesh = clements_mesh()
    assert mesh.parameter_count == 12
    assert np.allclose(compile_circuit(mesh, np.zeros(12)), np.eye(4))


def _fit_residual(x, mesh, target):
    theta, phases = x[:12], x[12:]
    U = np.exp(1j * phases)[:, None] * compile_circuit(mesh, theta)
    d = (U - target).ravel()
    return np.concatenate([d.real, d.imag])


def test_mesh_universal():
    mesh = clements_mesh()
    rng = np.random.default_rng(7)
    for _ in range(2):
        target = random_unitary(4, rng)
        best = np.inf
        for _ in range(20):
            x0 = rng.uniform(-np.pi, np.pi, 16)
            fit = least_squares(_fit_residual, x0, args=(mesh, target), xtol=1e-14, ftol=1e-14, gtol=1e-14)
            best = min(best, np.max(np.abs(fit.fun)))
            if best < 1e-6:
                break
        assert best < 1e-6


def test_concatenate_and_bind():
    tree, mesh = stage1_tree(), clements_mesh()
    both = concatenate(tree, mesh)
    assert both.parameter_count == 18
    rng = np.random.default_rng(3)
    t, m = rng.normal(size=6), rng.normal(size=12)
    U = compile_circuit(both, np.concatenate([t, m]))
    assert np.allclose(U, compile_circuit(mesh, m) @ compile_circuit(tree, t))
    bound = bind(tree, t)
    assert bound.parameter_count == 0
    assert np.allclose(compile_circuit(bound, []), compile_circuit(tree, t))


def test_stage2_identity_mesh_preserves_stage1():
    rng = np.random.default_rng(5)
    params = {p: rng.normal(size=6) for p in range(4)}
    circuit = stage2_circuit(params)
    for p in range(4):
        U = circuit.compile(np.zeros(12), p)
        assert np.allclose(np.abs(U[:, 0]) ** 2, np.abs(compile_circuit(stage1_tree(), params[p])[:, 0]) ** 2)


def test_stage2_needs_all_percepts():
    with pytest.raises(KeyError):
        stage2_circuit({0: np.zeros(6)})


def test_postselection_subevent():
    rng = np.random.default_rng(9)
    circuit = stage2_circuit({p: rng.normal(size=6) for p in range(4)})
    for _ in range(10):
        p = np.abs(circuit.compile(rng.normal(size=12), 0)[:, 0]) ** 2
        assert p[0] + p[1] <= 1 + 1e-12


def test_postselect_examples():
    assert postselect_answers([0.5, 0.5, 0, 0]) == pytest.approx((0.5, 0.5))
    assert postselect_answers(OutputDistribution.from_mode_probabilities([0.2, 0.2, 0.3, 0.3])) == pytest.approx((0.5, 0.5))
    with pytest.raises(DegeneratePostSelectionError):
        postselect_answers([0, 0, 0.5, 0.5])


def test_serialization_round_trip():
    theta = np.linspace(0, 1, 6)
    circuit, params = loads(dumps(stage1_tree(), theta))
    assert np.allclose(compile_circuit(circuit, params), compile_circuit(stage1_tree(), theta))
