"""Exact statevector simulation for small qubit registers.

Conventions used throughout the package:

* qubits are numbered from 1 and qubit 1 is the most significant bit of the
  amplitude index, so ``|q1 q2 ... qn>`` maps to index ``q1*2**(n-1) + ... + qn``;
* rotations follow ``R_P(theta) = exp(-i theta P / 2)``, which gives
  ``RY(theta) = [[cos(theta/2), -sin(theta/2)], [sin(theta/2), cos(theta/2)]]``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable, Optional, Sequence

import numpy as np

if TYPE_CHECKING:
    from .observables import PauliString

NORM_TOL = 1e-10
DENSE_MAX_QUBITS = 8

ROTATION_GATES = frozenset({"RX", "RY", "RZ", "RZZ", "CRX"})
FIXED_GATES = frozenset({"H", "X", "Z", "CNOT"})
TWO_QUBIT_GATES = frozenset({"CNOT", "RZZ", "CRX"})
GATE_KINDS = ROTATION_GATES | FIXED_GATES

_SQRT_HALF = 1.0 / np.sqrt(2.0)
_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT_HALF
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_ZZ_DIAG = np.array([1.0, -1.0, -1.0, 1.0])
PAULI_MATRICES = {"I": _I2, "X": _X, "Y": _Y, "Z": _Z}


class SimulationError(ValueError):
    """Invalid input to the simulator (bad indices, shapes, parameters)."""


@dataclass(frozen=True)
class StateVector:
    """Pure state of ``n_qubits`` qubits. The amplitude array is read-only."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1:
            raise SimulationError("n_qubits must be >= 1")
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != 2**self.n_qubits:
            raise SimulationError(
                f"expected {2 ** self.n_qubits} amplitudes, got {amps.shape[0]}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return self.n_qubits == other.n_qubits and np.array_equal(
            self.amplitudes, other.amplitudes
        )

    __hash__ = None


def zero_state(n_qubits: int) -> StateVector:
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def basis_state(bits: str) -> StateVector:
    """Computational basis state from a bit string, qubit 1 first (``"100"``)."""
    if not bits or set(bits) - {"0", "1"}:
        raise SimulationError(f"invalid bit string {bits!r}")
    amps = np.zeros(2 ** len(bits), dtype=complex)
    amps[int(bits, 2)] = 1.0
    return StateVector(len(bits), amps)


@dataclass(frozen=True)
class GateOp:
    kind: str
    qubits: tuple
    param_index: Optional[int] = None
    fixed_angle: Optional[float] = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise SimulationError(f"unknown gate kind {self.kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        arity = 2 if self.kind in TWO_QUBIT_GATES else 1
        if len(qubits) != arity:
            raise SimulationError(f"{self.kind} acts on {arity} qubit(s), got {qubits}")
        if len(set(qubits)) != len(qubits):
            raise SimulationError(f"repeated qubit in {self.kind}{qubits}")
        if self.kind in ROTATION_GATES:
            if (self.param_index is None) == (self.fixed_angle is None):
                raise SimulationError(
                    f"{self.kind} needs exactly one of param_index / fixed_angle"
                )
        elif self.param_index is not None or self.fixed_angle is not None:
            raise SimulationError(f"{self.kind} takes no angle")

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATION_GATES


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple = ()
    n_params: int = 0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise SimulationError("n_qubits must be >= 1")
        gates = tuple(self.gates)
        object.__setattr__(self, "gates", gates)
        for gate in gates:
            for q in gate.qubits:
                if not 1 <= q <= self.n_qubits:
                    raise SimulationError(
                        f"qubit {q} out of range for {self.n_qubits} qubits"
                    )
            if gate.param_index is not None and not 0 <= gate.param_index < self.n_params:
                raise SimulationError(
                    f"param_index {gate.param_index} outside [0, {self.n_params})"
                )


@dataclass(frozen=True)
class MixtureState:
    """Classical mixture of pure branches ``sum_i p_i |psi_i><psi_i|``."""

    branches: tuple

    def __post_init__(self):
        branches = tuple((float(p), s) for p, s in self.branches)
        if not branches:
            raise SimulationError("mixture has no branches")
        probs = np.array([p for p, _ in branches])
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise SimulationError("branch probabilities must be >= 0 and sum to 1")
        if len({s.n_qubits for _, s in branches}) != 1:
            raise SimulationError("all branches must share n_qubits")
        object.__setattr__(self, "branches", branches)

    @property
    def n_qubits(self) -> int:
        return self.branches[0][1].n_qubits

    @classmethod
    def pure(cls, state: StateVector) -> "MixtureState":
        return cls(((1.0, state),))


# -- gate matrices ---------------------------------------------------------


def _rx(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(((c, -1j * s), (-1j * s, c)))


def _ry(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(((c, -s), (s, c)), dtype=complex)


def _rz(theta):
    e = cmath.exp(-0.5j * theta)
    return np.array(((e, 0), (0, e.conjugate())))


def _rzz(theta):
    return np.diag(np.exp(-0.5j * theta * _ZZ_DIAG))


def _crx(theta):
    u = np.eye(4, dtype=complex)
    u[2:, 2:] = _rx(theta)
    return u


_ROTATIONS = {"RX": (_rx, _X), "RY": (_ry, _Y), "RZ": (_rz, _Z), "RZZ": (_rzz, None)}


def gate_matrix(kind: str, angle: Optional[float] = None) -> np.ndarray:
    """Unitary of a gate. Two-qubit matrices use the gate's qubit order as
    (most significant, least significant); for CNOT/CRX that is (control, target)."""
    if kind == "H":
        return _H
    if kind == "X":
        return _X
    if kind == "Z":
        return _Z
    if kind == "CNOT":
        return _CNOT
    if angle is None:
        raise SimulationError(f"{kind} requires an angle")
    if kind == "CRX":
        return _crx(angle)
    return _ROTATIONS[kind][0](angle)


def gate_derivative(kind: str, angle: float) -> np.ndarray:
    """d/dtheta of the gate unitary, i.e. ``-i/2 * P * R_P(theta)`` for rotations."""
    if kind == "RZZ":
        return np.diag(-0.5j * _ZZ_DIAG * np.exp(-0.5j * angle * _ZZ_DIAG))
    if kind == "CRX":
        d = np.zeros((4, 4), dtype=complex)
        d[2:, 2:] = -0.5j * _X @ _rx(angle)
        return d
    if kind in _ROTATIONS:
        build, gen = _ROTATIONS[kind]
        return -0.5j * gen @ build(angle)
    raise SimulationError(f"{kind} has no parameter")


# -- raw array kernels -----------------------------------------------------


@lru_cache(maxsize=None)
def _pair_groups(n: int, a: int, b: int) -> np.ndarray:
    """Basis indices grouped by the (bit a, bit b) value, shape (4, 2**(n-2))."""
    idx = np.arange(2**n)
    key = 2 * ((idx >> (n - a)) & 1) + ((idx >> (n - b)) & 1)
    return np.stack([idx[key == v] for v in range(4)])


def _apply_matrix(psi: np.ndarray, n: int, matrix: np.ndarray, qubits) -> np.ndarray:
    """Apply a 2x2 or 4x4 matrix to the given (1-based) qubits of ``psi``.
    ``psi`` may carry leading batch axes."""
    lead = psi.shape[:-1]
    if len(qubits) == 1:
        q = qubits[0]
        return (matrix @ psi.reshape(*lead, 2 ** (q - 1), 2, 2 ** (n - q))).reshape(*lead, -1)
    groups = _pair_groups(n, qubits[0], qubits[1])
    out = np.empty_like(psi, dtype=np.result_type(psi, matrix))
    out[..., groups] = matrix @ psi[..., groups]
    return out


@lru_cache(maxsize=None)
def _z_signs(n: int, qubits: tuple) -> np.ndarray:
    """Eigenvalues (+1/-1) of the Z product on ``qubits`` for every basis index."""
    idx = np.arange(2**n)
    parity = np.zeros(2**n, dtype=np.int64)
    for q in qubits:
        parity ^= (idx >> (n - q)) & 1
    return 1.0 - 2.0 * parity


_DIAGONAL = frozenset({"RZ", "RZZ"})
_GENERATORS = {"RX": _X, "RY": _Y}
_CRX_GENERATOR = np.zeros((4, 4), dtype=complex)
_CRX_GENERATOR[2:, 2:] = _X


def _apply_kind(psi: np.ndarray, n: int, kind: str, angle, qubits, dagger: bool = False) -> np.ndarray:
    """Gate (or its inverse) on raw amplitudes; diagonal rotations skip the matmul."""
    if kind in _DIAGONAL:
        sign = 0.5j if dagger else -0.5j
        return psi * np.exp(sign * angle * _z_signs(n, qubits))
    matrix = gate_matrix(kind, angle)
    if dagger:
        matrix = matrix.conj().T
    return _apply_matrix(psi, n, matrix, qubits)


def _apply_generator(psi: np.ndarray, n: int, kind: str, qubits) -> np.ndarray:
    """P|psi> for a rotation exp(-i theta P / 2)."""
    if kind in _DIAGONAL:
        return psi * _z_signs(n, qubits)
    if kind == "CRX":
        return _apply_matrix(psi, n, _CRX_GENERATOR, qubits)
    return _apply_matrix(psi, n, _GENERATORS[kind], qubits)


def _resolve_angle(gate: GateOp, params) -> Optional[float]:
    if gate.fixed_angle is not None:
        return gate.fixed_angle
    if gate.param_index is not None:
        return float(params[gate.param_index])
    return None


def _check_params(circuit: Circuit, params) -> np.ndarray:
    params = np.asarray(params if params is not None else [], dtype=float).reshape(-1)
    if params.shape[0] != circuit.n_params:
        raise SimulationError(
            f"circuit expects {circuit.n_params} parameters, got {params.shape[0]}"
        )
    return params


def _run_raw(circuit: Circuit, params: np.ndarray, psi: np.ndarray) -> np.ndarray:
    n = circuit.n_qubits
    for gate in circuit.gates:
        psi = _apply_kind(psi, n, gate.kind, _resolve_angle(gate, params), gate.qubits)
    return psi


def _pauli_apply_raw(psi: np.ndarray, p: "PauliString") -> np.ndarray:
    return (p.phases * psi)[p.flip_index]


def _pauli_expect_raw(psi: np.ndarray, p: "PauliString") -> float:
    return float(np.vdot(psi[p.flip_index], p.phases * psi).real)


# -- public operations -----------------------------------------------------


def apply_gate(state: StateVector, gate: GateOp, angle: Optional[float] = None) -> StateVector:
    """Return ``U|psi>``. ``angle`` is used for parametrized rotations and
    ignored otherwise; gates with a fixed angle use that angle."""
    for q in gate.qubits:
        if not 1 <= q <= state.n_qubits:
            raise SimulationError(f"qubit {q} out of range for {state.n_qubits} qubits")
    if gate.fixed_angle is not None:
        angle = gate.fixed_angle
    elif gate.param_index is None:
        angle = None
    elif angle is None:
        raise SimulationError(f"unresolved parameter {gate.param_index} for {gate.kind}")
    matrix = gate_matrix(gate.kind, angle)
    return StateVector(state.n_qubits, _apply_matrix(state.amplitudes, state.n_qubits, matrix, gate.qubits))


def run_circuit(circuit: Circuit, params=None, initial: Optional[StateVector] = None) -> StateVector:
    params = _check_params(circuit, params)
    if initial is None:
        initial = zero_state(circuit.n_qubits)
    elif initial.n_qubits != circuit.n_qubits:
        raise SimulationError("initial state size does not match circuit")
    return StateVector(circuit.n_qubits, _run_raw(circuit, params, initial.amplitudes))


def pauli_expectation(state: StateVector, p: "PauliString") -> float:
    if p.n_qubits != state.n_qubits:
        raise SimulationError(
            f"Pauli string on {p.n_qubits} qubits vs state on {state.n_qubits}"
        )
    return _pauli_expect_raw(state.amplitudes, p)


def mixture_expectation(mix: MixtureState, p: "PauliString") -> float:
    if p.n_qubits != mix.n_qubits:
        raise SimulationError("dimension mismatch between mixture and Pauli string")
    return float(sum(prob * _pauli_expect_raw(s.amplitudes, p) for prob, s in mix.branches))


def fidelity_pure_vs_mixture(target: StateVector, mix: MixtureState) -> float:
    """``<target| rho_mix |target>`` = sum_i p_i |<target|psi_i>|^2."""
    if target.n_qubits != mix.n_qubits:
        raise SimulationError("dimension mismatch")
    return float(
        sum(p * abs(np.vdot(target.amplitudes, s.amplitudes)) ** 2 for p, s in mix.branches)
    )


def expectation_gradient(circuit: Circuit, params, observable: Iterable, initial: Optional[StateVector] = None) -> np.ndarray:
    """Exact gradient of ``<psi(theta)| H |psi(theta)>`` by an adjoint sweep.

    ``observable`` is an iterable of ``(weight, PauliString)`` pairs. A parameter
    shared by several gates accumulates the contribution of each of them.
    """
    params = _check_params(circuit, params)
    terms = [(float(w), p) for w, p in observable]
    for w, p in terms:
        if not np.isfinite(w):
            raise SimulationError("observable weights must be finite")
        if p.n_qubits != circuit.n_qubits:
            raise SimulationError("observable size does not match circuit")
    psi0 = zero_state(circuit.n_qubits).amplitudes if initial is None else initial.amplitudes
    grads, _ = _adjoint(circuit, params, psi0, terms)
    return grads


def _adjoint(circuit: Circuit, params: np.ndarray, psi0: np.ndarray, terms, psi: Optional[np.ndarray] = None):
    """Returns (gradient, <H>) for a weighted Pauli sum ``terms``.

    ``psi`` may pass the already simulated output state. The sweep undoes one
    gate at a time on the stacked pair (psi, lambda = H psi); for a rotation
    exp(-i theta P / 2) the derivative term 2 Re <lam|dU psi_prev> equals
    Im <lam|P psi> evaluated just after the gate.
    """
    n = circuit.n_qubits
    if psi is None:
        psi = _run_raw(circuit, params, psi0)
    lam = np.zeros_like(psi)
    for w, p in terms:
        lam = lam + w * _pauli_apply_raw(psi, p)
    value = float(np.vdot(psi, lam).real)
    grads = np.zeros(circuit.n_params)
    if not terms:
        return grads, value
    pair = np.stack([psi, lam])
    for gate in reversed(circuit.gates):
        angle = _resolve_angle(gate, params)
        if gate.param_index is not None:
            p_psi = _apply_generator(pair[0], n, gate.kind, gate.qubits)
            grads[gate.param_index] += np.vdot(pair[1], p_psi).imag
        pair = _apply_kind(pair, n, gate.kind, angle, gate.qubits, dagger=True)
    return grads, value


# -- dense density matrices (test oracles, n <= 8) -------------------------


@dataclass(frozen=True)
class DensityMatrix:
    n_qubits: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n_qubits > DENSE_MAX_QUBITS:
            raise SimulationError(f"dense matrices are limited to {DENSE_MAX_QUBITS} qubits")
        rho = np.array(self.entries, dtype=complex)
        dim = 2**self.n_qubits
        if rho.shape != (dim, dim):
            raise SimulationError(f"expected a {dim}x{dim} matrix")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise SimulationError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > 1e-12:
            raise SimulationError("density matrix trace is not 1")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        a = state.amplitudes
        return cls(state.n_qubits, np.outer(a, a.conj()))

    @classmethod
    def from_mixture(cls, mix: MixtureState) -> "DensityMatrix":
        rho = sum(p * np.outer(s.amplitudes, s.amplitudes.conj()) for p, s in mix.branches)
        return cls(mix.n_qubits, rho)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    if a.n_qubits != b.n_qubits:
        raise SimulationError("dimension mismatch")
    eigs = np.linalg.eigvalsh(a.entries - b.entries)
    return float(min(1.0, 0.5 * np.sum(np.abs(eigs))))


def pauli_matrix(p: "PauliString") -> np.ndarray:
    """Dense matrix of a Pauli string (n <= 8)."""
    if p.n_qubits > DENSE_MAX_QUBITS:
        raise SimulationError(f"dense matrices are limited to {DENSE_MAX_QUBITS} qubits")
    out = np.ones((1, 1), dtype=complex)
    for q in range(1, p.n_qubits + 1):
        out = np.kron(out, PAULI_MATRICES[p.letter(q)])
    return out


def statevector_from_array(amplitudes: Sequence[complex]) -> StateVector:
    amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
    n = int(round(np.log2(amps.shape[0])))
    return StateVector(n, amps)
