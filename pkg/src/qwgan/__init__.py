"""Quantum Wasserstein GAN on k-local Pauli expectations: statevector
simulation, LP discriminator, mixture-generator training, labeled and
unlabeled unseen-state generation."""

__version__ = "0.1.0"

from .ansatz import AnsatzSpec, butterfly_circuit, generic_ansatz, phase_transition_circuit
from .discriminator import DualWitness, estimate_w1
from .interpolation import Interpolant, build_training_set, fit, string_order, target_at
from .observables import (
    ExpectationVector,
    ObservableSet,
    PauliString,
    enumerate_observables,
    expectation_vector,
    parse_label,
)
from .quantum_core import Circuit, GateOp, MixtureState, StateVector, run_circuit, zero_state
from .trainer import MixtureGenerator, TrainingConfig, train

__all__ = [
    "AnsatzSpec", "Circuit", "DualWitness", "ExpectationVector", "GateOp", "Interpolant",
    "MixtureGenerator", "MixtureState", "ObservableSet", "PauliString", "StateVector",
    "TrainingConfig", "build_training_set", "butterfly_circuit", "enumerate_observables",
    "estimate_w1", "expectation_vector", "fit", "generic_ansatz", "parse_label",
    "phase_transition_circuit", "run_circuit", "string_order", "target_at", "train", "zero_state",
]
