"""Parametrized circuit families: generic layered ansatz, the MPS-style
topological phase-transition circuit, and the butterfly circuit."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .quantum_core import Circuit, GateOp

FAMILIES = ("generic", "phase", "butterfly", "ry")


def generic_ansatz(n: int, layers: int) -> Circuit:
    """RX and RZ on every wire, then RZZ on (1,2),(3,4),... and (2,3),(4,5),...

    Parameters are numbered in gate order, giving ``layers * (3n - 1)`` in total.
    """
    if n < 2:
        raise ValueError("generic ansatz needs at least 2 qubits")
    if layers < 1:
        raise ValueError("layers must be >= 1")
    gates = []
    pairs = [(i, i + 1) for i in range(1, n, 2)] + [(i, i + 1) for i in range(2, n, 2)]
    for _ in range(layers):
        for kind in ("RX", "RZ"):
            for q in range(1, n + 1):
                gates.append(GateOp(kind, (q,), param_index=len(gates)))
        for pair in pairs:
            gates.append(GateOp("RZZ", pair, param_index=len(gates)))
    return Circuit(n, tuple(gates), len(gates))


def ry_ansatz(n: int) -> Circuit:
    """One RY per qubit; the smallest useful generator (works for n = 1)."""
    gates = tuple(GateOp("RY", (q,), param_index=q - 1) for q in range(1, n + 1))
    return Circuit(n, gates, n)


def phase_angles(g: float) -> tuple:
    """(theta_w, theta_v, theta_r) for label g in [-1, 1]; sign(0) is taken as 0."""
    if not -1.0 <= g <= 1.0:
        raise ValueError(f"g must lie in [-1, 1], got {g}")
    a = abs(g)
    root = np.sqrt(a) / np.sqrt(1.0 + a)
    theta_w = float(np.arccos(np.sign(g) * root))
    theta_v = float(np.arcsin(root))
    theta_r = float(2.0 * np.arcsin(1.0 / np.sqrt(1.0 + a)))
    return theta_w, theta_v, theta_r


def _u1_gates(g: float, theta_r: float) -> list:
    gates = [
        GateOp("H", (1,)),
        GateOp("CNOT", (1, 2)),
        GateOp("Z", (2,)),
        GateOp("RY", (2,), fixed_angle=theta_r),
    ]
    if g > 0:
        gates += [GateOp("H", (2,)), GateOp("CNOT", (1, 2)), GateOp("H", (2,))]
    return gates


def _u_gates(c: int, t: int, theta_w: float, theta_v: float) -> list:
    # figure columns left to right; top wire c carries the bond, t starts in |0>
    return [
        GateOp("X", (c,)),
        GateOp("RY", (t,), fixed_angle=theta_w),
        GateOp("CNOT", (c, t)),
        GateOp("X", (c,)),
        GateOp("X", (t,)),
        GateOp("RY", (t,), fixed_angle=theta_w),
        GateOp("X", (t,)),
        GateOp("RY", (t,), fixed_angle=theta_v),
        GateOp("CNOT", (c, t)),
        GateOp("X", (t,)),
        GateOp("X", (c,)),
        GateOp("RY", (t,), fixed_angle=theta_v),
        GateOp("X", (t,)),
    ]


def phase_transition_circuit(n: int, g: float) -> Circuit:
    """U1(g) on qubits (1,2) followed by the U(g) staircase on (i, i+1), i = 2..n-1.

    All angles are bound, so the circuit has no free parameters.
    """
    if n < 3:
        raise ValueError("phase-transition circuit needs at least 3 qubits")
    theta_w, theta_v, theta_r = phase_angles(g)
    gates = _u1_gates(g, theta_r)
    for i in range(2, n):
        gates += _u_gates(i, i + 1, theta_w, theta_v)
    return Circuit(n, tuple(gates), 0)


def butterfly_pairs(n: int, distance: int) -> list:
    return [
        (i, i + distance)
        for i in range(1, n + 1)
        if ((i - 1) // distance) % 2 == 0 and i + distance <= n
    ]


def butterfly_circuit(n: int) -> Circuit:
    """For every distance d = 1, 2, 4, ... < n: an RX layer, then CRX(i -> i+d)
    on the non-overlapping butterfly pairs."""
    if n < 2:
        raise ValueError("butterfly circuit needs at least 2 qubits")
    gates = []
    d = 1
    while d < n:
        for q in range(1, n + 1):
            gates.append(GateOp("RX", (q,), param_index=len(gates)))
        for pair in butterfly_pairs(n, d):
            gates.append(GateOp("CRX", pair, param_index=len(gates)))
        d *= 2
    return Circuit(n, tuple(gates), len(gates))


@dataclass(frozen=True)
class AnsatzSpec:
    family: str
    n_qubits: int
    layers: Optional[int] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown ansatz {self.family!r}; choose from {FAMILIES}")
        if self.family == "generic" and (self.layers is None or self.layers < 1):
            raise ValueError("generic ansatz needs layers >= 1")

    def build(self, g: Optional[float] = None) -> Circuit:
        if self.family == "generic":
            return generic_ansatz(self.n_qubits, self.layers)
        if self.family == "butterfly":
            return butterfly_circuit(self.n_qubits)
        if self.family == "ry":
            return ry_ansatz(self.n_qubits)
        if g is None:
            raise ValueError("the phase circuit needs a label g")
        return phase_transition_circuit(self.n_qubits, g)

    @property
    def n_params(self) -> int:
        if self.family == "phase":
            return 0
        return self.build().n_params
