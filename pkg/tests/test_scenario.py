import dataclasses

import numpy as np
import pytest

from photonic_ps.circuits import compile_circuit, postselect_answers, stage1_tree, stage2_circuit
from photonic_ps.config import RunConfig
from photonic_ps.losses import KL_EPS, accuracy, kl_binary
from photonic_ps.noise import NoiseModel
from photonic_ps.scenario import (PERCEPTS, Backend, StageOneState, answer_probabilities, evaluate, fold_angles,
                                  stage1_reward, stage2_reward, stage2_train, summarize_stage1)


def short(episodes=60, **kw):
    cfg = RunConfig(seed=kw.pop("seed", 0), **kw)
    return dataclasses.replace(cfg, stage2=dataclasses.replace(cfg.stage2, episodes=episodes))


def test_percept_table():
    assert [p.name for p in PERCEPTS] == ["red-circle", "blue-square", "red-square", "blue-circle"]
    assert [p.value_modes for p in PERCEPTS] == [(0, 2), (1, 3), (0, 3), (1, 2)]


def test_stage1_rewards_exhaustive():
    good = {0: {0, 2}, 1: {1, 3}, 2: {0, 3}, 3: {1, 2}}
    for p in range(4):
        for a in range(4):
            assert stage1_reward(p, a) == (0.1 if a in good[p] else -0.1)


def test_stage2_rewards_exhaustive():
    for p in range(4):
        for answer in (0, 1):
            correct = answer == (1 if p == 1 else 0)
            assert stage2_reward(p, answer) == (1.0 if correct else -0.5)


def test_fold_angles_keep_probabilities():
    rng = np.random.default_rng(0)
    theta = rng.uniform(-np.pi, np.pi, 6)
    folded = fold_angles(theta, [0, 2, 3])
    assert np.all((folded[[0, 2, 3]] >= 0) & (folded[[0, 2, 3]] <= np.pi / 2))
    p = lambda t: np.abs(compile_circuit(stage1_tree(), t)[:, 0]) ** 2
    assert np.allclose(p(theta), p(folded))


def test_stage1_matches_targets(trained_stage1):
    passed = 0
    for percept in PERCEPTS:
        p = trained_stage1.probabilities[percept.index]
        a, b = percept.value_modes
        wrong = 1 - p[a] - p[b]
        passed += 0.45 <= p[a] <= 0.55 and 0.45 <= p[b] <= 0.55 and wrong <= 0.05
    assert passed >= 3


def test_stage1_state_round_trip(trained_stage1):
    doc = trained_stage1.to_dict()
    again = StageOneState.from_dict(doc)
    for p in range(4):
        assert np.array_equal(again.params[p], trained_stage1.params[p])
        assert np.allclose(again.probabilities[p], trained_stage1.probabilities[p])


def test_identity_mesh_uses_stage1_outputs(trained_stage1):
    circuit = stage2_circuit(trained_stage1.params)
    answers = answer_probabilities(circuit, np.zeros(12), Backend())
    for p in range(4):
        assert answers[p] == pytest.approx(postselect_answers(trained_stage1.probabilities[p]))


def test_random_mesh_accuracy_band(trained_stage1):
    accs = []
    for seed in range(20):
        mesh = np.random.default_rng(seed).uniform(-np.pi, np.pi, 12)
        accs.append(evaluate(mesh, trained_stage1, Backend())[1])
    assert 0.3 <= np.mean(accs) <= 0.7


def test_shot_estimate_deviation(trained_stage1):
    mesh = np.random.default_rng(1).uniform(-np.pi, np.pi, 12)
    exact, _ = evaluate(mesh, trained_stage1, Backend())
    sampled, _ = evaluate(mesh, trained_stage1, Backend(shots=100000), rng=5)
    for p in range(4):
        assert np.max(np.abs(np.subtract(exact[p], sampled[p]))) <= 0.04


def test_stage2_separation_and_determinism(trained_stage1):
    before = {p: v.copy() for p, v in trained_stage1.params.items()}
    a = stage2_train(short(), trained_stage1)
    b = stage2_train(short(threads=3), trained_stage1)
    for p in range(4):
        assert np.array_equal(trained_stage1.params[p], before[p])
    assert np.array_equal(a.mesh_params, b.mesh_params)
    assert np.array_equal(a.accuracy, b.accuracy)


def test_stage2_percepts_uniform(trained_stage1):
    result = stage2_train(short(800), trained_stage1)
    counts = np.bincount([r.percept for r in result.records], minlength=4)
    # 800 draws: each count is 200 +- 12.2 (1 sigma)
    assert np.all(np.abs(counts - 200) < 50)


def test_stage2_accuracy_curve_consistent(trained_stage1):
    result = stage2_train(short(30), trained_stage1)
    final = evaluate(result.mesh_params, trained_stage1, Backend())[1]
    assert result.accuracy[-1] == pytest.approx(final, abs=1e-12)


def test_resume_matches_uninterrupted(trained_stage1):
    saved = []
    cfg = dataclasses.replace(short(40), checkpoint_every=20)
    full = stage2_train(cfg, trained_stage1, checkpoint=saved.append)
    resumed = stage2_train(cfg, trained_stage1, resume=saved[0])
    assert saved[0]["episode"] == 20
    assert np.array_equal(full.mesh_params, resumed.mesh_params)
    assert np.array_equal(full.accuracy, resumed.accuracy)


def test_degenerate_postselection_flagged():
    # every tree routes the photon into the shape pair, so an identity mesh never reaches modes 0 and 1
    shape_only = np.array([np.pi / 2, 0, 0, np.pi / 4, 0, 0])
    stage1 = summarize_stage1({p: shape_only.copy() for p in range(4)})
    cfg = short(3)
    cfg = dataclasses.replace(cfg, stage2=dataclasses.replace(cfg.stage2, mesh_init="identity"))
    result = stage2_train(cfg, stage1)
    assert result.flagged[0] == 0
    assert np.isfinite(result.loss).all()
    target = 0.5 if result.records[0].reward > 0 else 0.0
    assert result.loss[0] == pytest.approx(kl_binary(KL_EPS, target))


def test_zero_noise_backend_matches_ideal(trained_stage1):
    ideal = stage2_train(short(40), trained_stage1)
    quiet = stage2_train(short(40, backend="noisy", noise=NoiseModel.noiseless()), trained_stage1)
    assert np.max(np.abs(ideal.mesh_params - quiet.mesh_params)) < 1e-12
    assert np.max(np.abs(ideal.accuracy - quiet.accuracy)) < 1e-12



def _ideal_states(offsets):
    states = []
    for percept, delta in zip(PERCEPTS, offsets):
        s = np.zeros(4, dtype=complex)
        a, b = percept.value_modes
        s[a], s[b] = 1, np.exp(1j * delta)
        states.append(s / np.sqrt(2))
    return np.array(states)


def test_default_offsets_make_states_independent():
    # equal offsets give red-circle + blue-square = red-square + blue-circle, so no mesh separates them
    assert np.linalg.matrix_rank(_ideal_states([0, 0, 0, 0]), tol=1e-9) == 3
    assert np.linalg.matrix_rank(_ideal_states(RunConfig().stage1.phase_offsets), tol=1e-9) == 4


def test_trained_states_follow_offsets(trained_stage1):
    for percept, delta in zip(PERCEPTS, RunConfig().stage1.phase_offsets):
        amps = trained_stage1.amplitudes[percept.index]
        a, b = percept.value_modes
        rel = np.angle(amps[b] / amps[a] * np.exp(-1j * delta))
        assert abs(rel) < 0.3
