"""Random instances shared by several test modules."""

import numpy as np

from qwgan.quantum_core import Circuit, GateOp

ALL_KINDS = ("H", "X", "Z", "CNOT", "RX", "RY", "RZ", "RZZ", "CRX")
TWO = {"CNOT", "RZZ", "CRX"}
ROT = {"RX", "RY", "RZ", "RZZ", "CRX"}


def random_circuit(rng: np.random.Generator, n: int, depth: int, fixed_fraction: float = 0.2):
    """Random circuit over the full gate set plus a matching parameter vector.
    Some rotations get fixed angles; a few parameters are shared by two gates."""
    gates, n_params = [], 0
    for _ in range(depth):
        kinds = ALL_KINDS if n >= 2 else tuple(k for k in ALL_KINDS if k not in TWO)
        kind = str(rng.choice(kinds))
        width = 2 if kind in TWO else 1
        qubits = tuple(int(q) for q in rng.choice(np.arange(1, n + 1), width, replace=False))
        if kind not in ROT:
            gates.append(GateOp(kind, qubits))
        elif rng.random() < fixed_fraction:
            gates.append(GateOp(kind, qubits, fixed_angle=float(rng.uniform(-np.pi, np.pi))))
        elif n_params and rng.random() < 0.1:
            gates.append(GateOp(kind, qubits, param_index=int(rng.integers(n_params))))
        else:
            gates.append(GateOp(kind, qubits, param_index=n_params))
            n_params += 1
    return Circuit(n, tuple(gates), n_params), rng.uniform(-np.pi, np.pi, n_params)


def random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return psi / np.linalg.norm(psi)
