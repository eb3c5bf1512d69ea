import json
import math

import numpy as np
import pytest

from qwgan.ansatz import AnsatzSpec, generic_ansatz
from qwgan.discriminator import DualWitness, estimate_w1
from qwgan.observables import PauliString, enumerate_observables, expectation_vector
from qwgan.optim import AdamHyper, AdamState, adam_step
from qwgan.quantum_core import basis_state, run_circuit
from qwgan.trainer import (
    MixtureGenerator,
    TrainingConfig,
    TrainingState,
    checkpoint_from_json,
    checkpoint_to_json,
    generator_state,
    loss_and_grads,
    softmax,
    train,
)


def _loss(gen, witness, target, obs):
    return loss_and_grads(gen, witness, target, obs)[0]


def _generic_target(n=3, layers=2, seed=7):
    c = generic_ansatz(n, layers)
    return run_circuit(c, np.random.default_rng(seed).uniform(-np.pi, np.pi, c.n_params))


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        p = np.array([0.3, -1.0])
        new, state = adam_step(p, np.zeros(2), AdamState.zeros_like(p), AdamHyper())
        assert np.array_equal(new, p) and state.t == 1

    def test_first_step_is_lr_times_sign(self):
        p = np.zeros(3)
        new, _ = adam_step(p, np.array([2.0, -0.01, 5.0]), AdamState.zeros_like(p), AdamHyper(0.1))
        assert np.allclose(new, [-0.1, 0.1, -0.1], atol=1e-6)

    def test_three_step_trace(self):
        lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-7
        grads = [0.5, -0.2, 0.1]
        x, m, v = 1.0, 0.0, 0.0
        expected = []
        for t, g in enumerate(grads, start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            x -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
            expected.append(x)
        p, state = np.array([1.0]), AdamState.zeros_like(np.array([1.0]))
        for g, e in zip(grads, expected):
            p, state = adam_step(p, np.array([g]), state, AdamHyper(lr, b1, b2, eps))
            assert p[0] == pytest.approx(e, abs=1e-15)
        assert expected[0] == pytest.approx(0.9, abs=1e-6)

    def test_inputs_untouched_and_json(self):
        p = np.ones(2)
        s0 = AdamState.zeros_like(p)
        _, s1 = adam_step(p, np.ones(2), s0, AdamHyper())
        assert s0.t == 0 and np.all(s0.m == 0)
        back = AdamState.from_json(json.loads(json.dumps(s1.to_json())))
        assert np.array_equal(back.m, s1.m) and np.array_equal(back.v, s1.v) and back.t == 1


class TestGenerator:
    def test_rank_one_single_branch(self):
        gen = MixtureGenerator.initialize(AnsatzSpec("generic", 3, 1), 1, 0)
        mix = generator_state(gen)
        assert len(mix.branches) == 1 and mix.branches[0][0] == 1.0

    def test_uniform_probabilities(self):
        gen = MixtureGenerator.initialize(AnsatzSpec("ry", 2), 4, 0)
        assert np.allclose(gen.probabilities, 0.25) and abs(gen.probabilities.sum() - 1) < 1e-12

    def test_branches_match_run_circuit(self):
        gen = MixtureGenerator.initialize(AnsatzSpec("generic", 2, 2), 3, 5)
        for (_, s), th in zip(generator_state(gen).branches, gen.thetas):
            assert s == run_circuit(gen.circuit, th)

    def test_init_range_and_determinism(self):
        a = MixtureGenerator.initialize(AnsatzSpec("generic", 3, 2), 2, 11)
        b = MixtureGenerator.initialize(AnsatzSpec("generic", 3, 2), 2, 11)
        assert np.array_equal(a.thetas, b.thetas)
        assert np.all(a.thetas >= -np.pi) and np.all(a.thetas < np.pi) and np.all(a.logits == 0)

    def test_shape_validation(self):
        c = generic_ansatz(2, 1)
        with pytest.raises(ValueError):
            MixtureGenerator(c, np.zeros((2, c.n_params)), np.zeros(3))
        with pytest.raises(ValueError):
            MixtureGenerator(c, np.zeros((1, 3)), np.zeros(1))
        with pytest.raises(ValueError):
            MixtureGenerator.initialize(c, 0)

    def test_softmax_stable(self):
        p = softmax([1000.0, 1000.0, -1000.0])
        assert np.allclose(p, [0.5, 0.5, 0.0])


class TestLossAndGrads:
    def test_zero_witness(self):
        obs = enumerate_observables(2, 1)
        gen = MixtureGenerator.initialize(AnsatzSpec("generic", 2, 1), 2, 0)
        target = expectation_vector(basis_state("11"), obs)
        loss, dth, dlog = loss_and_grads(gen, DualWitness({}, 0.0, 0, obs), target, obs)
        assert loss == 0 and np.all(dth == 0) and np.all(dlog == 0)

    @pytest.mark.parametrize("theta", [0.3, 1.2, -2.0])
    def test_ry_analytic(self, theta):
        obs = enumerate_observables(1, 1)
        gen = MixtureGenerator(AnsatzSpec("ry", 1).build(), [[theta]], [0.0], AnsatzSpec("ry", 1))
        target = expectation_vector(basis_state("1"), obs)
        witness = DualWitness({obs.index["Z1"]: 1.0}, 0.0, 0, obs)
        loss, dth, _ = loss_and_grads(gen, witness, target, obs)
        assert loss == pytest.approx(-1 - math.cos(theta), abs=1e-14)
        assert dth[0, 0] == pytest.approx(math.sin(theta), abs=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        obs = enumerate_observables(3, 2)
        spec = AnsatzSpec("generic", 3, 1)
        gen = MixtureGenerator(spec.build(), rng.uniform(-3, 3, (3, spec.n_params)), rng.normal(size=3), spec)
        target = expectation_vector(_generic_target(seed=seed), obs)
        witness = estimate_w1(target, expectation_vector(generator_state(gen), obs), obs)
        _, dth, dlog = loss_and_grads(gen, witness, target, obs)
        h = 1e-5
        fd_log = np.array([
            (_loss(gen.with_params(gen.thetas, gen.logits + h * e), witness, target, obs)
             - _loss(gen.with_params(gen.thetas, gen.logits - h * e), witness, target, obs)) / (2 * h)
            for e in np.eye(3)
        ])
        assert np.linalg.norm(dlog - fd_log) <= 1e-6 * np.linalg.norm(fd_log)
        fd_th = np.zeros_like(gen.thetas)
        for idx in np.ndindex(*gen.thetas.shape):
            e = np.zeros_like(gen.thetas)
            e[idx] = h
            fd_th[idx] = (_loss(gen.with_params(gen.thetas + e, gen.logits), witness, target, obs)
                          - _loss(gen.with_params(gen.thetas - e, gen.logits), witness, target, obs)) / (2 * h)
        assert np.linalg.norm(dth - fd_th) <= 1e-6 * np.linalg.norm(fd_th)

    def test_small_step_does_not_increase_loss(self):
        rng = np.random.default_rng(3)
        obs = enumerate_observables(3, 2)
        spec = AnsatzSpec("generic", 3, 2)
        target = expectation_vector(_generic_target(), obs)
        for _ in range(10):
            gen = MixtureGenerator(spec.build(), rng.uniform(-3, 3, (2, spec.n_params)), rng.normal(size=2), spec)
            witness = estimate_w1(target, expectation_vector(generator_state(gen), obs), obs)
            loss, dth, dlog = loss_and_grads(gen, witness, target, obs)
            step = 1e-4
            moved = gen.with_params(gen.thetas - step * dth, gen.logits - step * dlog)
            assert _loss(moved, witness, target, obs) <= loss + 1e-12

    def test_mismatched_sets(self):
        gen = MixtureGenerator.initialize(AnsatzSpec("ry", 2), 1, 0)
        target = expectation_vector(basis_state("11"), enumerate_observables(2, 1))
        with pytest.raises(ValueError):
            loss_and_grads(gen, DualWitness({}, 0.0, 0, enumerate_observables(2, 2)), target,
                           enumerate_observables(2, 1))


class TestTrain:
    def test_config_validation(self):
        for bad in ({"max_iters": 0}, {"learning_rate": 0.0}, {"rank": 0}, {"lipschitz_divisor": 3.0}):
            with pytest.raises(ValueError):
                TrainingConfig(**bad)

    def test_target_equal_to_generator_stops_immediately(self):
        obs = enumerate_observables(2, 2)
        gen = MixtureGenerator.initialize(AnsatzSpec("generic", 2, 1), 1, 3)
        target = expectation_vector(generator_state(gen), obs)
        _, hist = train(target, TrainingConfig(k=2), gen)
        assert len(hist.records) == 1 and hist.w1[0] < 1e-10

    def test_ry_benchmark(self):
        obs = enumerate_observables(1, 1)
        gen0 = MixtureGenerator.initialize(AnsatzSpec("ry", 1), 1, 0)
        target_state = basis_state("1")
        cfg = TrainingConfig(k=1, max_iters=200, learning_rate=0.05, stop_patience=200)
        _, hist = train(expectation_vector(target_state, obs), cfg, gen0, target_state=target_state)
        assert hist.fidelity[-1] >= 0.999

    def test_k_mismatch(self):
        target = expectation_vector(basis_state("11"), enumerate_observables(2, 1))
        gen = MixtureGenerator.initialize(AnsatzSpec("ry", 2), 1, 0)
        with pytest.raises(ValueError):
            train(target, TrainingConfig(k=2), gen)
        with pytest.raises(ValueError):
            train(target, TrainingConfig(k=1, rank=2), gen)

    def _run(self, max_iters, state=None, gen=None):
        obs = enumerate_observables(3, 2)
        target_state = _generic_target()
        spec = AnsatzSpec("generic", 3, 4)
        gen = gen or MixtureGenerator.initialize(spec, 2, 1)
        cfg = TrainingConfig(k=2, max_iters=max_iters, learning_rate=0.02, rank=2)
        return train(expectation_vector(target_state, obs), cfg, gen, target_state=target_state, state=state)

    def test_deterministic(self):
        _, a = self._run(30)
        _, b = self._run(30)
        assert a.key() == b.key() and a.to_csv() == b.to_csv()

    def test_resume_is_bit_identical(self):
        full_gen, full = self._run(40)
        half_gen, first = self._run(20)
        text = checkpoint_to_json(half_gen, first.state, seed=1, k=2)
        gen, state, seed, k = checkpoint_from_json(text)
        end_gen, second = self._run(40, state=state, gen=gen)
        assert first.key() + second.key() == full.key()
        assert np.array_equal(end_gen.thetas, full_gen.thetas)
        assert np.array_equal(end_gen.logits, full_gen.logits)
        assert (seed, k) == (1, 2)

    def test_history_csv(self):
        _, hist = self._run(3)
        lines = hist.to_csv().splitlines()
        assert lines[0] == "iter,w1,fidelity,wall_ms"
        assert lines[1].startswith("0,") and lines[1].endswith(",")
        assert all(r.w1 >= 0 for r in hist.records)

    def test_fidelity_anticorrelated_with_w1(self):
        spearmanr = pytest.importorskip("scipy.stats").spearmanr
        obs = enumerate_observables(3, 2)
        target_state = _generic_target()
        gen0 = MixtureGenerator.initialize(AnsatzSpec("generic", 3, 24), 1, 0)
        cfg = TrainingConfig(k=2, max_iters=1000)
        _, hist = train(expectation_vector(target_state, obs), cfg, gen0, target_state=target_state)
        assert spearmanr(hist.w1, hist.fidelity)[0] < -0.8

    def test_checkpoint_fields(self):
        gen, hist = self._run(2)
        data = json.loads(checkpoint_to_json(gen, hist.state, seed=9, k=2))
        assert {"ansatz", "n", "layers", "rank", "thetas", "logits", "seed", "iteration", "k"} <= set(data)
        assert data["iteration"] == 2 and data["rank"] == 2

    def test_training_state_json(self):
        gen, hist = self._run(2)
        back = TrainingState.from_json(json.loads(json.dumps(hist.state.to_json())))
        assert back.iteration == 2 and back.stale == hist.state.stale
