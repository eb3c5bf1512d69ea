"""Linear-program discriminator: the W1 estimate over weighted k-local Pauli
strings and its optimal witness Hamiltonian."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .observables import ExpectationVector, ObservableSet

OPT_TOL = 1e-9
PIVOT_TOL = 1e-12
MAX_PIVOTS = 100_000


class LPError(RuntimeError):
    """Unbounded program or numerical breakdown inside the simplex solver."""


@dataclass(frozen=True, eq=False)
class LPInstance:
    """max c'^T w'  s.t.  w' >= 0, A w' <= 1, with columns (w_i^+, w_i^-) interleaved."""

    c: np.ndarray
    c_prime: np.ndarray
    A: np.ndarray
    rhs: np.ndarray

    @property
    def n_constraints(self) -> int:
        return self.A.shape[0]

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True, eq=False)
class DualWitness:
    weights: dict
    value: float
    iterations: int = 0
    observables: Optional[ObservableSet] = field(default=None, repr=False)

    @property
    def nnz(self) -> int:
        return len(self.weights)

    def terms(self):
        """(weight, PauliString) pairs, ready for expectation_gradient."""
        if self.observables is None:
            raise ValueError("witness is not bound to an observable set")
        return [(w, self.observables[i]) for i, w in sorted(self.weights.items())]

    def qubit_loads(self) -> np.ndarray:
        """Per-qubit sum of |w_i| over strings acting on that qubit."""
        loads = np.zeros(self.observables.n_qubits)
        for i, w in self.weights.items():
            for q in self.observables[i].support:
                loads[q - 1] += abs(w)
        return loads


def compute_objective(target: ExpectationVector, generated: ExpectationVector) -> np.ndarray:
    """c_i = <H_i>_target - <H_i>_generated."""
    if not target.observables.same_as(generated.observables):
        raise ValueError("expectation vectors refer to different observable sets")
    return np.asarray(target.values - generated.values, dtype=float)


def support_matrix(obs: ObservableSet) -> np.ndarray:
    """n x N incidence matrix, A[j, i] = 1 iff qubit j+1 is in the support of H_i."""
    a = np.zeros((obs.n_qubits, len(obs)))
    for i, p in enumerate(obs.strings):
        a[[q - 1 for q in p.support], i] = 1.0
    return a


def build_lp(c, obs: ObservableSet) -> LPInstance:
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.shape[0] != len(obs):
        raise ValueError(f"objective has {c.shape[0]} entries for {len(obs)} observables")
    c_prime = np.empty(2 * c.shape[0])
    c_prime[0::2] = c
    c_prime[1::2] = -c
    a = np.repeat(support_matrix(obs), 2, axis=1)
    return LPInstance(c, c_prime, a, np.ones(obs.n_qubits))


def simplex_solve(lp: LPInstance, observables: Optional[ObservableSet] = None) -> DualWitness:
    """Primal simplex on the tableau, starting from the slack basis.

    The right-hand side is all ones, so the slack basis is feasible and no
    phase one is needed. Entering and leaving variables follow Bland's rule,
    which rules out cycling on the (heavily degenerate) vertices of this polytope.
    """
    m, nv = lp.A.shape
    if np.any(lp.rhs <= 0):
        raise LPError("right-hand side must be strictly positive")
    tab = np.hstack([lp.A, np.eye(m)])
    b = lp.rhs.astype(float).copy()
    reduced = np.concatenate([lp.c_prime, np.zeros(m)])
    basis = list(range(nv, nv + m))

    pivots = 0
    while True:
        candidates = np.flatnonzero(reduced > OPT_TOL)
        if candidates.size == 0:
            break
        col = int(candidates[0])
        column = tab[:, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            raise LPError("LP is unbounded; the feasible region should be a polytope")
        ratios = b[rows] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + OPT_TOL]
        row = int(min(ties, key=lambda r: basis[r]))

        piv = tab[row, col]
        tab[row] /= piv
        b[row] /= piv
        others = np.arange(m) != row
        factors = tab[others, col].copy()
        tab[others] -= np.outer(factors, tab[row])
        b[others] -= factors * b[row]
        reduced -= reduced[col] * tab[row]
        basis[row] = col
        b[np.abs(b) < PIVOT_TOL] = 0.0
        if np.any(b < -1e-9):
            raise LPError("simplex lost primal feasibility")

        pivots += 1
        if pivots > MAX_PIVOTS:
            raise LPError("simplex exceeded the pivot limit")

    x = np.zeros(nv + m)
    x[basis] = b
    w = x[0:nv:2] - x[1:nv:2]
    weights = {int(i): float(w[i]) for i in np.flatnonzero(np.abs(w) > PIVOT_TOL)}
    value = float(sum(wi * lp.c[i] for i, wi in sorted(weights.items())))
    return DualWitness(weights, value, pivots, observables)


def estimate_w1(target: ExpectationVector, generated: ExpectationVector, obs: Optional[ObservableSet] = None, lipschitz_divisor: float = 1.0) -> DualWitness:
    """W1 estimate from two expectation vectors.

    ``lipschitz_divisor`` rescales the reported value (2 reads the per-qubit
    weight budget as a Lipschitz bound of 2 rather than 1); the witness weights
    are left untouched.
    """
    obs = obs or target.observables
    if not obs.same_as(target.observables):
        raise ValueError("observable set mismatch")
    c = compute_objective(target, generated)
    witness = simplex_solve(build_lp(c, obs), obs)
    if lipschitz_divisor != 1.0:
        witness = DualWitness(witness.weights, witness.value / lipschitz_divisor, witness.iterations, obs)
    return witness


def witness_to_csv(witness: DualWitness) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "weight"])
    for i, w in sorted(witness.weights.items()):
        writer.writerow([witness.observables[i].label, repr(w)])
    buf.write(f"#value,{witness.value!r}\n")
    return buf.getvalue()
