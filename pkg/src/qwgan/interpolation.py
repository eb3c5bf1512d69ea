"""Labeled unseen-state generation over the phase label g: expectation curves
of the phase-transition circuit, spline interpolation, string order parameters."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .ansatz import phase_transition_circuit
from .observables import (
    ExpectationVector,
    ObservableSet,
    PauliString,
    enumerate_observables,
    expectation_vector,
)
from .quantum_core import MixtureState, StateVector, mixture_expectation, run_circuit

G_MIN, G_MAX = -1.0, 1.0
CLAMP_WARN = 0.02


@dataclass(frozen=True, eq=False)
class LabeledSample:
    g: float
    expectations: ExpectationVector

    def __post_init__(self):
        if not G_MIN <= self.g <= G_MAX:
            raise ValueError(f"label g={self.g} outside [-1, 1]")


def label_grid(m: int) -> np.ndarray:
    if m < 2:
        raise ValueError("need at least 2 labels")
    grid = np.linspace(G_MIN, G_MAX, m)
    grid[np.abs(grid) < 1e-14] = 0.0
    return grid


def build_training_set(n: int, k: int, m: int) -> list:
    """Exact expectation vectors of the phase circuit at m evenly spaced g in [-1, 1]."""
    obs = enumerate_observables(n, k)
    samples = []
    for g in label_grid(m):
        state = run_circuit(phase_transition_circuit(n, float(g)))
        samples.append(LabeledSample(float(g), expectation_vector(state, obs)))
    return samples


# -- natural cubic spline --------------------------------------------------


def natural_spline_second_derivatives(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second derivatives at the knots with zero end curvature.

    ``y`` may be 2-D (knots x curves); every column is solved with the same
    tridiagonal system (Thomas algorithm).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = x.shape[0]
    out = np.zeros_like(y)
    if m < 3:
        return out
    h = np.diff(x)
    slopes = np.diff(y, axis=0) / h.reshape(-1, *([1] * (y.ndim - 1)))
    rhs = 6.0 * np.diff(slopes, axis=0)
    diag = 2.0 * (h[:-1] + h[1:])
    off = h[1:-1]
    # forward elimination
    d = diag.copy()
    r = rhs.copy()
    for i in range(1, m - 2):
        w = off[i - 1] / d[i - 1]
        d[i] -= w * off[i - 1]
        r[i] -= w * r[i - 1]
    sol = np.zeros_like(r)
    sol[-1] = r[-1] / d[-1]
    for i in range(m - 4, -1, -1):
        sol[i] = (r[i] - off[i] * sol[i + 1]) / d[i]
    out[1:-1] = sol
    return out


@dataclass(frozen=True, eq=False)
class Interpolant:
    """Per-observable curves over g: natural cubic splines, or piecewise linear
    when fewer than four labels are available."""

    grid: np.ndarray
    values: np.ndarray  # (m, |H|)
    observables: ObservableSet = field(repr=False)
    second: np.ndarray = field(repr=False, default=None)

    @property
    def kind(self) -> str:
        return "cubic" if self.grid.shape[0] >= 4 else "linear"

    def raw(self, g) -> np.ndarray:
        """Unclamped evaluation; ``g`` scalar -> (|H|,), array -> (len(g), |H|).
        Outside the knot range the end pieces are extended."""
        gs = np.atleast_1d(np.asarray(g, dtype=float))
        x, y = self.grid, self.values
        j = np.clip(np.searchsorted(x, gs, side="right") - 1, 0, x.shape[0] - 2)
        h = (x[j + 1] - x[j])[:, None]
        a = (x[j + 1][:, None] - gs[:, None]) / h
        b = 1.0 - a
        out = a * y[j] + b * y[j + 1]
        if self.kind == "cubic":
            out = out + ((a**3 - a) * self.second[j] + (b**3 - b) * self.second[j + 1]) * h**2 / 6.0
        return out[0] if np.ndim(g) == 0 else out

    def __call__(self, g) -> np.ndarray:
        return np.clip(self.raw(g), -1.0, 1.0)


def fit(samples: Sequence[LabeledSample]) -> Interpolant:
    if len(samples) < 2:
        raise ValueError("need at least 2 samples to interpolate")
    obs = samples[0].expectations.observables
    if any(not s.expectations.observables.same_as(obs) for s in samples):
        raise ValueError("samples use different observable sets")
    order = sorted(samples, key=lambda s: s.g)
    grid = np.array([s.g for s in order])
    if np.any(np.diff(grid) <= 0):
        raise ValueError("duplicate g values")
    values = np.stack([s.expectations.values for s in order])
    second = natural_spline_second_derivatives(grid, values) if grid.shape[0] >= 4 else np.zeros_like(values)
    return Interpolant(grid, values, obs, second)


def target_at(f: Interpolant, g: float) -> ExpectationVector:
    """Interpolated expectation vector s' = f(g), clamped to [-1, 1]."""
    if not G_MIN <= g <= G_MAX:
        raise ValueError(f"g={g} outside [-1, 1]; extrapolation is not supported")
    return ExpectationVector(f.observables, f(g))


def clamp_excess(f: Interpolant, g) -> float:
    """How far the raw spline leaves [-1, 1] at g (0 when inside)."""
    return float(np.max(np.maximum(np.abs(f.raw(g)) - 1.0, 0.0)))


# -- string order parameters ----------------------------------------------

# single-qubit Pauli products: (a, b) -> (phase, letter) with a*b = phase*letter
_PRODUCT = {
    ("X", "X"): (1, "I"), ("Y", "Y"): (1, "I"), ("Z", "Z"): (1, "I"),
    ("X", "Y"): (1j, "Z"), ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"), ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"), ("X", "Z"): (-1j, "Y"),
}


def multiply_factors(n: int, factors: Sequence) -> tuple:
    """Multiply (qubit, letter) factors left to right. Returns (phase, PauliString
    or None for the identity)."""
    phase = 1
    acc = {}
    for q, letter in factors:
        if not 1 <= q <= n:
            raise ValueError(f"qubit {q} outside 1..{n}")
        if q in acc:
            ph, res = _PRODUCT[(acc[q], letter)]
            phase *= ph
            if res == "I":
                del acc[q]
            else:
                acc[q] = res
        else:
            acc[q] = letter
    return phase, (PauliString(n, tuple(acc.items())) if acc else None)


def string_order_operator(n: int, kind: str) -> tuple:
    if kind == "S1":
        if n < 5:
            raise ValueError("S1 needs N >= 5")
        factors = [(i, "X") for i in range(3, n - 1)]
    elif kind == "SZY":
        if n < 4:
            raise ValueError("SZY needs N >= 4")
        factors = [(2, "Z"), (3, "Y")] + [(i, "X") for i in range(4, n - 2)] + [(n - 2, "Y"), (n - 1, "Z")]
    else:
        raise ValueError(f"unknown string order {kind!r}")
    phase, p = multiply_factors(n, factors)
    if abs(complex(phase).imag) > 0:
        raise ValueError(f"{kind} is not Hermitian for N={n}")
    return float(complex(phase).real), p


def string_order(state: Union[StateVector, MixtureState], kind: str) -> float:
    mix = state if isinstance(state, MixtureState) else MixtureState.pure(state)
    phase, p = string_order_operator(mix.n_qubits, kind)
    if p is None:
        return phase
    return float(np.clip(phase * mixture_expectation(mix, p), -1.0, 1.0))


# -- CSV -------------------------------------------------------------------


def samples_to_csv(samples: Sequence[LabeledSample]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["g", "label", "value"])
    for s in samples:
        for label, v in zip(s.expectations.observables.labels, s.expectations.values):
            writer.writerow([repr(s.g), label, repr(float(v))])
    return buf.getvalue()


def samples_from_csv(text: str, obs: ObservableSet) -> list:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["g", "label", "value"]:
        raise ValueError("samples CSV must start with header 'g,label,value'")
    by_g = {}
    for g, label, value in rows[1:]:
        by_g.setdefault(float(g), {})[label] = float(value)
    out = []
    for g, entries in by_g.items():
        if set(entries) != set(obs.labels):
            raise ValueError(f"samples at g={g} do not cover the observable set")
        out.append(LabeledSample(g, ExpectationVector(obs, [entries[l] for l in obs.labels])))
    return out


def phase_scan_to_csv(rows: Sequence[tuple]) -> str:
    """rows of (g, S1, SZY, source) with source in {exact, generated}."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["g", "S1", "SZY", "source"])
    for g, s1, szy, source in rows:
        writer.writerow([repr(float(g)), repr(float(s1)), repr(float(szy)), source])
    return buf.getvalue()
