"""Quantum Wasserstein GAN training: alternate an LP witness solve with Adam
updates of a mixture-of-circuits generator."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .ansatz import AnsatzSpec
from .discriminator import DualWitness, estimate_w1
from .observables import ExpectationVector, ObservableSet, expectation_vector
from .optim import AdamHyper, AdamState, adam_step
from .quantum_core import (
    Circuit,
    MixtureState,
    StateVector,
    _adjoint,
    fidelity_pure_vs_mixture,
    run_circuit,
    zero_state,
)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    e = np.exp(z - z.max())
    return e / e.sum()


@dataclass(frozen=True, eq=False)
class MixtureGenerator:
    circuit: Circuit
    thetas: np.ndarray
    logits: np.ndarray
    ansatz: Optional[AnsatzSpec] = None

    def __post_init__(self):
        thetas = np.array(self.thetas, dtype=float)
        if thetas.ndim == 1:
            thetas = thetas.reshape(1, -1)
        logits = np.array(self.logits, dtype=float).reshape(-1)
        if thetas.shape[0] < 1 or thetas.shape[0] != logits.shape[0]:
            raise ValueError("need one logit per branch and at least one branch")
        if thetas.shape[1] != self.circuit.n_params:
            raise ValueError(
                f"thetas have {thetas.shape[1]} columns, circuit has {self.circuit.n_params} params"
            )
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "logits", logits)

    @classmethod
    def initialize(cls, ansatz, rank: int = 1, seed: int = 0) -> "MixtureGenerator":
        """Angles uniform on [-pi, pi) from ``seed``; logits zero."""
        spec = ansatz if isinstance(ansatz, AnsatzSpec) else None
        circuit = ansatz.build() if spec is not None else ansatz
        if rank < 1:
            raise ValueError("rank must be >= 1")
        rng = np.random.default_rng(seed)
        thetas = rng.uniform(-np.pi, np.pi, size=(rank, circuit.n_params))
        return cls(circuit, thetas, np.zeros(rank), spec)

    @property
    def rank(self) -> int:
        return self.thetas.shape[0]

    @property
    def probabilities(self) -> np.ndarray:
        return softmax(self.logits)

    def with_params(self, thetas, logits) -> "MixtureGenerator":
        return replace(self, thetas=thetas, logits=logits)


def generator_state(gen: MixtureGenerator) -> MixtureState:
    probs = gen.probabilities
    return MixtureState(tuple((p, run_circuit(gen.circuit, th)) for p, th in zip(probs, gen.thetas)))


def loss_and_grads(
    gen: MixtureGenerator,
    witness: DualWitness,
    target: ExpectationVector,
    obs: ObservableSet,
    mixture: Optional[MixtureState] = None,
):
    """Loss sum_i w_i (s_i - <H_i>_G) and its gradients w.r.t. thetas and logits.

    With p = softmax(logits) and E_b = <H_hat> on branch b, the loss is
    const - sum_b p_b E_b, so d/dtheta_b = -p_b dE_b and
    d/dlogit_a = -p_a (E_a - sum_b p_b E_b).
    ``mixture`` may pass ``generator_state(gen)`` to skip re-simulating branches.
    """
    if witness.observables is not None and not witness.observables.same_as(obs):
        raise ValueError("witness and observable set differ")
    if not target.observables.same_as(obs):
        raise ValueError("target and observable set differ")
    terms = [(w, obs[i]) for i, w in sorted(witness.weights.items())]
    for i in witness.weights:
        if not 0 <= i < len(obs):
            raise ValueError(f"witness index {i} outside the observable set")
    probs = gen.probabilities
    psi0 = zero_state(gen.circuit.n_qubits).amplitudes
    energies = np.zeros(gen.rank)
    dthetas = np.zeros_like(gen.thetas)
    for b in range(gen.rank):
        psi = None if mixture is None else mixture.branches[b][1].amplitudes
        grad, energies[b] = _adjoint(gen.circuit, gen.thetas[b], psi0, terms, psi)
        dthetas[b] = -probs[b] * grad
    mean_energy = float(probs @ energies)
    offset = sum(w * target.values[i] for i, w in sorted(witness.weights.items()))
    loss = float(offset - mean_energy)
    dlogits = -probs * (energies - mean_energy)
    return loss, dthetas, dlogits


@dataclass(frozen=True)
class TrainingConfig:
    k: int = 2
    max_iters: int = 1000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    seed: int = 0
    stop_tolerance: float = 1e-4
    stop_patience: int = 50
    rank: int = 1
    lipschitz_divisor: float = 1.0
    w1_floor: float = 1e-10

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.stop_patience < 1:
            raise ValueError("stop_patience must be >= 1")
        if self.lipschitz_divisor not in (1.0, 2.0):
            raise ValueError("lipschitz_divisor must be 1 or 2")

    @property
    def hyper(self) -> AdamHyper:
        return AdamHyper(self.learning_rate, self.beta1, self.beta2, self.eps)


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    w1: float
    fidelity: Optional[float]
    wall_ms: Optional[float] = None


@dataclass
class TrainingState:
    """Everything besides the generator needed to resume a run bit-identically."""

    iteration: int
    theta_adam: AdamState
    logit_adam: AdamState
    best_w1: float = float("inf")
    stale: int = 0
    finished: bool = False

    @classmethod
    def fresh(cls, gen: MixtureGenerator) -> "TrainingState":
        return cls(0, AdamState.zeros_like(gen.thetas), AdamState.zeros_like(gen.logits))

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "theta_adam": self.theta_adam.to_json(),
            "logit_adam": self.logit_adam.to_json(),
            "best_w1": None if np.isinf(self.best_w1) else self.best_w1,
            "stale": self.stale,
            "finished": self.finished,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TrainingState":
        best = data.get("best_w1")
        return cls(
            int(data["iteration"]),
            AdamState.from_json(data["theta_adam"]),
            AdamState.from_json(data["logit_adam"]),
            float("inf") if best is None else float(best),
            int(data["stale"]),
            bool(data.get("finished", False)),
        )


@dataclass
class TrainingHistory:
    records: list = field(default_factory=list)
    state: Optional[TrainingState] = None

    @property
    def w1(self) -> np.ndarray:
        return np.array([r.w1 for r in self.records])

    @property
    def fidelity(self) -> np.ndarray:
        return np.array([np.nan if r.fidelity is None else r.fidelity for r in self.records])

    def key(self) -> list:
        """Records without wall time, for determinism comparisons."""
        return [(r.iter, r.w1, r.fidelity) for r in self.records]

    def to_csv(self, include_wall_time: bool = False) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iter", "w1", "fidelity", "wall_ms"])
        for r in self.records:
            writer.writerow([
                r.iter,
                repr(r.w1),
                "" if r.fidelity is None else repr(r.fidelity),
                "" if (r.wall_ms is None or not include_wall_time) else f"{r.wall_ms:.3f}",
            ])
        return buf.getvalue()


def train(
    target: ExpectationVector,
    cfg: TrainingConfig,
    gen0: MixtureGenerator,
    target_state: Optional[StateVector] = None,
    state: Optional[TrainingState] = None,
    callback=None,
):
    """Run the min-max loop until ``cfg.max_iters`` total iterations or a plateau.

    Each iteration: generator expectations, LP witness, loss gradients, one Adam
    step on thetas and logits. A plateau is ``stop_patience`` consecutive
    iterations without improving the best W1 by ``stop_tolerance``; an estimate
    below ``w1_floor`` also stops (nothing is left to learn).
    Returns (generator, history); ``history.state`` allows resuming.
    """
    obs = target.observables
    if obs.max_weight != cfg.k:
        raise ValueError(f"target built with k={obs.max_weight}, config has k={cfg.k}")
    if obs.n_qubits != gen0.circuit.n_qubits:
        raise ValueError("target and generator act on different numbers of qubits")
    if target_state is not None and target_state.n_qubits != obs.n_qubits:
        raise ValueError("target state size mismatch")
    if gen0.rank != cfg.rank:
        raise ValueError(f"generator rank {gen0.rank} != config rank {cfg.rank}")

    gen = gen0
    state = TrainingState.fresh(gen) if state is None else replace(
        state, theta_adam=state.theta_adam.copy(), logit_adam=state.logit_adam.copy()
    )
    history = TrainingHistory()
    hyper = cfg.hyper
    while not state.finished and state.iteration < cfg.max_iters:
        start = time.perf_counter()
        mix = generator_state(gen)
        witness = estimate_w1(target, expectation_vector(mix, obs), obs, cfg.lipschitz_divisor)
        fid = None if target_state is None else fidelity_pure_vs_mixture(target_state, mix)

        w1 = witness.value
        if w1 < state.best_w1 - cfg.stop_tolerance:
            state.best_w1, state.stale = w1, 0
        else:
            state.stale += 1
        if w1 <= cfg.w1_floor or state.stale >= cfg.stop_patience:
            state.finished = True
        else:
            _, dthetas, dlogits = loss_and_grads(gen, witness, target, obs, mix)
            thetas, state.theta_adam = adam_step(gen.thetas, dthetas, state.theta_adam, hyper)
            logits, state.logit_adam = adam_step(gen.logits, dlogits, state.logit_adam, hyper)
            gen = gen.with_params(thetas, logits)
        wall = (time.perf_counter() - start) * 1e3
        history.records.append(IterationRecord(state.iteration, w1, fid, wall))
        state.iteration += 1
        if callback is not None:
            callback(state.iteration, gen, witness)
    history.state = state
    return gen, history


# -- checkpoints -----------------------------------------------------------


def checkpoint_to_json(gen: MixtureGenerator, state: TrainingState, seed: int, k: int) -> str:
    if gen.ansatz is None:
        raise ValueError("only generators built from a named ansatz can be checkpointed")
    data = {
        "ansatz": gen.ansatz.family,
        "n": gen.ansatz.n_qubits,
        "layers": gen.ansatz.layers,
        "rank": gen.rank,
        "thetas": gen.thetas.tolist(),
        "logits": gen.logits.tolist(),
        "seed": seed,
        "iteration": state.iteration,
        "k": k,
        "optimizer": state.to_json(),
    }
    return json.dumps(data, indent=1) + "\n"


def checkpoint_from_json(text: str):
    """Returns (generator, training state, seed, k)."""
    data = json.loads(text)
    spec = AnsatzSpec(data["ansatz"], int(data["n"]), data.get("layers"))
    gen = MixtureGenerator(spec.build(), data["thetas"], data["logits"], spec)
    state = TrainingState.from_json(data["optimizer"])
    if state.iteration != int(data["iteration"]):
        raise ValueError("checkpoint iteration fields disagree")
    if gen.rank != int(data["rank"]):
        raise ValueError("checkpoint rank does not match thetas")
    return gen, state, int(data["seed"]), int(data["k"])
