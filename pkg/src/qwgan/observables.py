"""k-local Pauli observables and expectation vectors."""

from __future__ import annotations

import csv
import io
import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property
from math import comb
from typing import Iterable, Union

import numpy as np

from .quantum_core import MixtureState, SimulationError, StateVector

LETTERS = "XYZ"
_TOKEN = re.compile(r"([XYZ])(\d+)")
# Y = i X Z, so a string is i**n_y * X^x Z^z
_I_POW = np.array([1, 1j, -1, -1j])


class LabelError(ValueError):
    pass


@dataclass(frozen=True)
class PauliString:
    """Non-identity Pauli string; ``factors`` is a sorted tuple of (qubit, letter)."""

    n_qubits: int
    factors: tuple

    def __post_init__(self):
        factors = tuple(sorted((int(q), str(l)) for q, l in dict(self.factors).items()))
        if len(factors) != len(self.factors):
            raise LabelError("repeated qubit index")
        if not factors:
            raise LabelError("identity string is not an observable")
        for q, letter in factors:
            if letter not in LETTERS:
                raise LabelError(f"unknown Pauli letter {letter!r}")
            if not 1 <= q <= self.n_qubits:
                raise LabelError(f"qubit {q} out of range for {self.n_qubits} qubits")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def from_dict(cls, n_qubits: int, factors: dict) -> "PauliString":
        return cls(n_qubits, tuple(factors.items()))

    @property
    def support(self) -> tuple:
        return tuple(q for q, _ in self.factors)

    @property
    def weight(self) -> int:
        return len(self.factors)

    @property
    def label(self) -> str:
        return "".join(f"{l}{q}" for q, l in self.factors)

    def letter(self, qubit: int) -> str:
        return dict(self.factors).get(qubit, "I")

    def __str__(self):
        return self.label

    @cached_property
    def masks(self) -> tuple:
        """(x_mask, z_mask, n_y) with qubit q on bit ``n - q``."""
        x = z = ny = 0
        for q, letter in self.factors:
            bit = 1 << (self.n_qubits - q)
            if letter in "XY":
                x |= bit
            if letter in "ZY":
                z |= bit
            ny += letter == "Y"
        return x, z, ny

    @cached_property
    def flip_index(self) -> np.ndarray:
        return np.arange(2**self.n_qubits) ^ self.masks[0]

    @cached_property
    def phases(self) -> np.ndarray:
        _, z, ny = self.masks
        return _I_POW[ny % 4] * _parity_signs(self.n_qubits, np.array([z]))[0]


def _parity_signs(n: int, zmasks: np.ndarray) -> np.ndarray:
    """(-1)**popcount(b & z) for every basis index b, one row per mask."""
    b = np.arange(2**n)
    anded = zmasks[:, None] & b[None, :]
    parity = np.zeros(anded.shape, dtype=np.int64)
    for bit in range(n):
        parity ^= (anded >> bit) & 1
    return 1.0 - 2.0 * parity


def parse_label(text: str, n_qubits: int) -> PauliString:
    text = text.strip()
    tokens = _TOKEN.findall(text)
    if not tokens or "".join(l + d for l, d in tokens) != text:
        raise LabelError(f"malformed Pauli label {text!r}")
    factors = [(int(d), l) for l, d in tokens]
    if len({q for q, _ in factors}) != len(factors):
        raise LabelError(f"repeated qubit index in {text!r}")
    return PauliString(n_qubits, tuple(factors))


def format_label(p: PauliString) -> str:
    return p.label


@dataclass(frozen=True, eq=False)
class ObservableSet:
    """All non-identity Pauli strings of weight 1..k, in canonical order:
    by weight, then support, then letters."""

    n_qubits: int
    max_weight: int
    strings: tuple = field(repr=False)

    @cached_property
    def index(self) -> dict:
        return {p.label: i for i, p in enumerate(self.strings)}

    def __len__(self):
        return len(self.strings)

    def __iter__(self):
        return iter(self.strings)

    def __getitem__(self, i):
        return self.strings[i]

    @property
    def labels(self) -> list:
        return [p.label for p in self.strings]

    def same_as(self, other: "ObservableSet") -> bool:
        return self is other or (
            self.n_qubits == other.n_qubits and self.max_weight == other.max_weight
        )

    @cached_property
    def _tables(self):
        masks = np.array([p.masks for p in self.strings], dtype=np.int64)
        xs, rows = np.unique(masks[:, 0], return_inverse=True)
        dim = 2**self.n_qubits
        flips = np.arange(dim)[None, :] ^ xs[:, None]
        walsh = _parity_signs(self.n_qubits, np.arange(dim))
        phase = _I_POW[masks[:, 2] % 4]
        return flips, walsh, rows.reshape(-1), masks[:, 1], phase

    def expectations(self, amplitudes: np.ndarray) -> np.ndarray:
        """Expectation of every string on a pure state given as raw amplitudes.

        Strings sharing an X/Y pattern differ only by Z-signs, so each such group
        is one row of ``conj(psi[b^x]) * psi[b]`` followed by a Walsh transform.
        """
        flips, walsh, rows, zs, phase = self._tables
        overlap = amplitudes[flips].conj() * amplitudes[None, :]
        table = overlap @ walsh
        return (phase * table[rows, zs]).real


def enumerate_observables(n: int, k: int) -> ObservableSet:
    if n < 1 or not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    strings = []
    for weight in range(1, k + 1):
        for support in itertools.combinations(range(1, n + 1), weight):
            for letters in itertools.product(LETTERS, repeat=weight):
                strings.append(PauliString(n, tuple(zip(support, letters))))
    return ObservableSet(n, k, tuple(strings))


def observable_count(n: int, k: int) -> int:
    return sum(comb(n, j) * 3**j for j in range(1, k + 1))


@dataclass(frozen=True, eq=False)
class ExpectationVector:
    observables: ObservableSet
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.shape[0] != len(self.observables):
            raise ValueError(
                f"{values.shape[0]} values for {len(self.observables)} observables"
            )
        if np.any(np.isnan(values)):
            raise ValueError("expectation vector contains NaN")
        if np.any(np.abs(values) > 1.0 + 1e-9):
            raise ValueError("expectation values must lie in [-1, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, label: str) -> float:
        return float(self.values[self.observables.index[label]])


def expectation_vector(source: Union[StateVector, MixtureState], obs: ObservableSet) -> ExpectationVector:
    if source.n_qubits != obs.n_qubits:
        raise SimulationError(
            f"state on {source.n_qubits} qubits vs observables on {obs.n_qubits}"
        )
    if isinstance(source, MixtureState):
        values = sum(p * obs.expectations(s.amplitudes) for p, s in source.branches)
    else:
        values = obs.expectations(source.amplitudes)
    return ExpectationVector(obs, np.clip(values, -1.0, 1.0))


# -- CSV -------------------------------------------------------------------


def expectations_to_csv(vec: ExpectationVector) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "value"])
    for label, value in zip(vec.observables.labels, vec.values):
        writer.writerow([label, repr(float(value))])
    return buf.getvalue()


def expectations_from_csv(text: str, obs: ObservableSet) -> ExpectationVector:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["label", "value"]:
        raise ValueError("expectation CSV must start with header 'label,value'")
    values = np.full(len(obs), np.nan)
    for label, value in rows[1:]:
        p = parse_label(label, obs.n_qubits)
        if p.label not in obs.index:
            raise ValueError(f"label {label} not in the observable set")
        values[obs.index[p.label]] = float(value)
    if np.any(np.isnan(values)):
        raise ValueError("expectation CSV does not cover the observable set")
    return ExpectationVector(obs, values)


def vectors_to_csv(vectors: Iterable[ExpectationVector], obs: ObservableSet) -> str:
    """Wide format: header of labels, one vector per row."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(obs.labels)
    for vec in vectors:
        writer.writerow([repr(float(v)) for v in vec.values])
    return buf.getvalue()


def vectors_from_csv(text: str, obs: ObservableSet) -> list:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty training-set file")
    header = [parse_label(l, obs.n_qubits).label for l in rows[0]]
    if header != obs.labels:
        raise ValueError("training-set header does not match the observable set")
    return [ExpectationVector(obs, [float(v) for v in row]) for row in rows[1:] if row]
