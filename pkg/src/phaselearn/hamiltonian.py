"""Spin Hamiltonians as weighted sums of Pauli strings.

Built-in chains use open boundaries unless ``periodic=True``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal

from phaselearn.errors import ConvergenceError, DomainError, ShapeError, SizeError
from phaselearn.parallel import get_num_threads, run_tasks
from phaselearn.statevector import (
    StateVector,
    _pauli_expect,
    _pauli_sum_apply,
    pauli_masks,
)

MAX_EXACT_QUBITS = 12
MAX_MATVECS = 10_000
EIG_TOL = 1e-8
MAX_TABLE_ENTRIES = 1 << 22


@dataclass(frozen=True)
class PauliString:
    """Per-qubit labels from ``IXYZ``; ``ops[0]`` acts on qubit 0."""

    ops: str

    def __post_init__(self):
        ops = self.ops.upper()
        if not ops or set(ops) - set("IXYZ"):
            raise ValueError(f"invalid Pauli string {self.ops!r}")
        object.__setattr__(self, "ops", ops)

    def __str__(self) -> str:
        return self.ops

    def __len__(self) -> int:
        return len(self.ops)

    @classmethod
    def from_sites(cls, n: int, sites: dict[int, str]) -> "PauliString":
        labels = ["I"] * n
        for q, p in sites.items():
            labels[q] = p
        return cls("".join(labels))


@dataclass(frozen=True)
class PauliTerm:
    coefficient: float
    string: PauliString

    def __post_init__(self):
        c = float(self.coefficient)
        if not math.isfinite(c) or c == 0.0:
            raise ValueError(f"term coefficient must be finite and nonzero, got {self.coefficient}")
        object.__setattr__(self, "coefficient", c)
        if isinstance(self.string, str):
            object.__setattr__(self, "string", PauliString(self.string))


@dataclass(frozen=True)
class Hamiltonian:
    n_qubits: int
    terms: tuple[PauliTerm, ...]
    model: str = "custom"
    couplings: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if len(t.string) != self.n_qubits:
                raise ShapeError(f"term {t.string} does not match {self.n_qubits} qubits")

    def coefficients(self) -> list[float]:
        return [t.coefficient for t in self.terms]

    def norm_bound(self) -> float:
        return sum(abs(t.coefficient) for t in self.terms)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(xmasks, zmasks, n_ys, coeffs)`` for the numba kernels."""
        cached = self.__dict__.get("_arrays")
        if cached is None:
            masks = [pauli_masks(t.string.ops) for t in self.terms]
            cached = (
                np.array([m[0] for m in masks], dtype=np.int64),
                np.array([m[1] for m in masks], dtype=np.int64),
                np.array([m[2] for m in masks], dtype=np.int64),
                np.array(self.coefficients(), dtype=np.float64),
            )
            object.__setattr__(self, "_arrays", cached)
        return cached

    def energy_tables(self):
        """``(diag, gx, weights, rx, rz, rny, rcoef)`` for the table energy kernel.

        Off-diagonal terms are grouped by X-mask into dense weight rows; above
        ``MAX_TABLE_ENTRIES`` they are left as individual terms instead.
        """
        cached = self.__dict__.get("_tables")
        if cached is None:
            xm, zm, ny, coef = self.arrays()
            dim = 1 << self.n_qubits
            idx = np.arange(dim, dtype=np.int64)
            diag = np.zeros(dim)
            groups: dict[int, list[int]] = {}
            for t in range(len(coef)):
                if xm[t] == 0:
                    # Z-only term, so n_y == 0
                    diag += coef[t] * (1 - 2 * _parity_array(idx & zm[t]))
                else:
                    groups.setdefault(int(xm[t]), []).append(t)
            if len(groups) * dim <= MAX_TABLE_ENTRIES:
                weights = np.zeros((len(groups), dim), dtype=np.complex128)
                for g, ts in enumerate(groups.values()):
                    for t in ts:
                        weights[g] += coef[t] * (1j ** ny[t]) * (1 - 2 * _parity_array(idx & zm[t]))
                rest: list[int] = []
                gx = np.array(list(groups), dtype=np.int64)
            else:
                weights = np.zeros((0, dim), dtype=np.complex128)
                rest = [t for ts in groups.values() for t in ts]
                gx = np.zeros(0, dtype=np.int64)
            cached = (diag, gx, weights, xm[rest].copy(), zm[rest].copy(), ny[rest].copy(), coef[rest].copy())
            object.__setattr__(self, "_tables", cached)
        return cached

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = np.empty(1 << self.n_qubits, dtype=np.complex128)
        _pauli_sum_apply(np.ascontiguousarray(v, dtype=np.complex128), out, *self.arrays())
        return out

    def to_dense(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        return np.column_stack([self.matvec(np.eye(dim, dtype=np.complex128)[:, j]) for j in range(dim)])

    def to_json(self) -> dict:
        return {"n": self.n_qubits, "terms": [{"coeff": t.coefficient, "ops": t.string.ops} for t in self.terms]}

    @classmethod
    def from_json(cls, doc: dict) -> "Hamiltonian":
        n = int(doc["n"])
        terms = [PauliTerm(float(t["coeff"]), PauliString(t["ops"])) for t in doc["terms"]]
        return cls(n, tuple(terms))


def _parity_array(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    for sh in (32, 16, 8, 4, 2, 1):
        x ^= x >> sh
    return x & 1


def load_hamiltonian(path: str | Path) -> Hamiltonian:
    return Hamiltonian.from_json(json.loads(Path(path).read_text()))


def _bonds(n: int, periodic: bool) -> list[tuple[int, int]]:
    bonds = [(i, i + 1) for i in range(n - 1)]
    if periodic and n > 2:
        bonds.append((n - 1, 0))
    return bonds


def build_tfim(n: int, j: float, h: float, *, periodic: bool = False) -> Hamiltonian:
    """``j * sum Z_i Z_{i+1} + h * sum X_i``."""
    if n < 2:
        raise SizeError(f"TFIM needs at least 2 spins, got {n}")
    if not j > 0:
        raise DomainError(f"TFIM coupling j must be positive, got {j}")
    if h < 0:
        raise DomainError(f"transverse field h must be non-negative, got {h}")
    terms = [PauliTerm(j, PauliString.from_sites(n, {a: "Z", b: "Z"})) for a, b in _bonds(n, periodic)]
    if h > 0:
        terms += [PauliTerm(h, PauliString.from_sites(n, {i: "X"})) for i in range(n)]
    return Hamiltonian(n, tuple(terms), "TFIM", {"j": float(j), "h": float(h), "periodic": periodic})


def build_xxz(n: int, j_perp: float, j_z: float, *, periodic: bool = False) -> Hamiltonian:
    """``-sum [j_perp (X X + Y Y) + j_z Z Z]`` over nearest-neighbour bonds."""
    if n < 2:
        raise SizeError(f"XXZ needs at least 2 spins, got {n}")
    terms = []
    for a, b in _bonds(n, periodic):
        if j_perp != 0:
            terms.append(PauliTerm(-j_perp, PauliString.from_sites(n, {a: "X", b: "X"})))
            terms.append(PauliTerm(-j_perp, PauliString.from_sites(n, {a: "Y", b: "Y"})))
        if j_z != 0:
            terms.append(PauliTerm(-j_z, PauliString.from_sites(n, {a: "Z", b: "Z"})))
    return Hamiltonian(n, tuple(terms), "XXZ", {"j_perp": float(j_perp), "j_z": float(j_z), "periodic": periodic})


def build_model(model: str, n: int, coupling: float, *, periodic: bool = False) -> Hamiltonian:
    """TFIM with ``J=1, h=coupling`` or XXZ with ``J_perp=1, J_z=coupling``."""
    model = model.upper()
    if model == "TFIM":
        return build_tfim(n, 1.0, coupling, periodic=periodic)
    if model == "XXZ":
        return build_xxz(n, 1.0, coupling, periodic=periodic)
    raise ValueError(f"unknown model {model!r}")


def _term_expectations(ham: Hamiltonian, amps: np.ndarray) -> list[complex]:
    xm, zm, ny, _ = ham.arrays()
    args = [(amps, xm[t], zm[t], ny[t]) for t in range(len(ham.terms))]
    threads = get_num_threads() if ham.n_qubits >= 14 else 1
    return run_tasks(_pauli_expect, args, threads)


def energy(ham: Hamiltonian, state: StateVector) -> float:
    """``<psi|H|psi>``; per-term values are summed in term order."""
    if ham.n_qubits != state.n_qubits:
        raise ShapeError(f"Hamiltonian on {ham.n_qubits} qubits, state on {state.n_qubits}")
    total = 0.0
    for term, ev in zip(ham.terms, _term_expectations(ham, state.amplitudes)):
        total += term.coefficient * ev.real
    return total


def energy_imag(ham: Hamiltonian, state: StateVector) -> float:
    """Imaginary part of the raw expectation; zero up to rounding for Hermitian ``H``."""
    return sum(t.coefficient * ev.imag for t, ev in zip(ham.terms, _term_expectations(ham, state.amplitudes)))


def exact_ground(ham: Hamiltonian, *, tol: float = EIG_TOL, max_matvecs: int = MAX_MATVECS,
                 krylov_dim: int = 120, seed: int = 1234) -> tuple[float, StateVector]:
    """Smallest eigenpair by restarted Lanczos on Pauli-term matvecs.

    Full reorthogonalisation inside each cycle; each restart begins from the
    current Ritz vector. Stops once ``||H v - E v|| <= tol``.
    """
    n = ham.n_qubits
    if n > MAX_EXACT_QUBITS:
        raise SizeError(f"exact_ground supports at most {MAX_EXACT_QUBITS} qubits, got {n}")
    dim = 1 << n
    m = min(krylov_dim, dim)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    matvecs = 0
    while True:
        Q = np.zeros((m, dim), dtype=np.complex128)
        alpha = np.zeros(m)
        beta = np.zeros(m)
        Q[0] = v
        k = 0
        for k in range(m):
            w = ham.matvec(Q[k])
            matvecs += 1
            alpha[k] = np.vdot(Q[k], w).real
            w -= Q[: k + 1].T @ (Q[: k + 1].conj() @ w)
            w -= Q[: k + 1].T @ (Q[: k + 1].conj() @ w)
            b = np.linalg.norm(w)
            beta[k] = b
            if k + 1 == m or b < 1e-13:
                break
            Q[k + 1] = w / b
        size = k + 1
        vals, vecs = eigh_tridiagonal(alpha[:size], beta[: size - 1], select="i", select_range=(0, 0))
        e0 = float(vals[0])
        v = vecs[:, 0] @ Q[:size]
        v /= np.linalg.norm(v)
        resid = np.linalg.norm(ham.matvec(v) - e0 * v)
        matvecs += 1
        if resid <= tol:
            return e0, StateVector(n, v)
        if matvecs >= max_matvecs:
            raise ConvergenceError(f"Lanczos residual {resid:.3e} after {matvecs} matvecs")
