"""Checkerboard (brick-wall) variational circuit.

Parameter layout, fixed so stored vectors stay portable:

* slots ``0 .. n-1``: initial ``RY`` on each qubit;
* then one triple ``(alpha, beta, gamma)`` per block, layer-major and left to
  right. A block on ``(i, i+1)`` applies ``CNOT(i, i+1)``, ``RY(beta)`` on
  ``i``, ``RY(gamma)`` on ``i+1``, ``CNOT(i, i+1)``, ``RY(alpha)`` on ``i+1``.

Conjugated by the CNOT pair, the two middle rotations are the real Ising-type
rotations ``exp(-i beta Y_i X_j / 2)`` and ``exp(-i gamma Z_i Y_j / 2)``, so
every prepared state has real amplitudes.

Odd layers (1-based) pair ``(0,1), (2,3), ...``; even layers pair
``(1,2), (3,4), ...``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from phaselearn.errors import ShapeError, SizeError
from phaselearn.hamiltonian import Hamiltonian, energy
from phaselearn.parallel import get_num_threads, run_tasks, split_range
from phaselearn.statevector import (
    Circuit,
    GateOp,
    CNOT,
    RY,
    StateVector,
    _prefix_states,
    _shifted_energies,
    _table_energy,
    _template_energies,
    apply_circuit,
    new_zero_state,
)

SCHEME = "checkerboard-v1"
SHIFT = math.pi / 2


@dataclass(frozen=True)
class EntanglerBlock:
    qubit_pair: tuple[int, int]
    param_slots: tuple[int, int, int]  # (alpha: final RY on j, beta: RY on i, gamma: RY on j)

    def ops(self, theta: np.ndarray) -> list[GateOp]:
        i, j = self.qubit_pair
        a, b, g = self.param_slots
        return [CNOT(i, j), RY(i, theta[b]), RY(j, theta[g]), CNOT(i, j), RY(j, theta[a])]


@dataclass(frozen=True)
class CheckerboardAnsatz:
    n_qubits: int
    depth: int
    layers: tuple[tuple[EntanglerBlock, ...], ...]
    n_params: int

    @property
    def n_blocks(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def descriptor(self) -> dict:
        return {"n": self.n_qubits, "depth": self.depth, "scheme": SCHEME}

    def circuit(self, theta) -> Circuit:
        theta = self._check_theta(theta)
        ops = [RY(q, theta[q]) for q in range(self.n_qubits)]
        for layer in self.layers:
            for block in layer:
                ops.extend(block.ops(theta))
        return Circuit(self.n_qubits, ops)

    def template(self):
        """Encoded op arrays plus the slot feeding each op."""
        cached = self.__dict__.get("_template")
        if cached is None:
            circ = self.circuit(np.zeros(self.n_params))
            kinds, q0, q1, _ = circ.encode()
            slots = list(range(self.n_qubits))
            for layer in self.layers:
                for block in layer:
                    a, b, g = block.param_slots
                    slots += [-1, b, g, -1, a]
            cached = (kinds, q0, q1, np.array(slots, dtype=np.int64))
            object.__setattr__(self, "_template", cached)
        return cached

    def slot_ops(self) -> np.ndarray:
        """Index of the single op fed by each parameter slot."""
        slots = self.template()[3]
        out = np.empty(self.n_params, dtype=np.int64)
        used = np.flatnonzero(slots >= 0)
        out[slots[used]] = used
        return out

    def _check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ShapeError(f"expected {self.n_params} parameters, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("parameters must be finite")
        return theta


def build_checkerboard(n: int, depth: int) -> CheckerboardAnsatz:
    if n < 2:
        raise SizeError(f"checkerboard needs at least 2 qubits, got {n}")
    if depth < 1:
        raise SizeError(f"depth must be >= 1, got {depth}")
    slot = n
    layers = []
    for layer_idx in range(1, depth + 1):
        start = 0 if layer_idx % 2 == 1 else 1
        blocks = []
        for i in range(start, n - 1, 2):
            blocks.append(EntanglerBlock((i, i + 1), (slot, slot + 1, slot + 2)))
            slot += 3
        layers.append(tuple(blocks))
    return CheckerboardAnsatz(n, depth, tuple(layers), slot)


def ansatz_from_descriptor(desc: dict) -> CheckerboardAnsatz:
    if desc.get("scheme", SCHEME) != SCHEME:
        raise ValueError(f"unsupported ansatz scheme {desc.get('scheme')!r}")
    return build_checkerboard(int(desc["n"]), int(desc["depth"]))


def prepare_state(ansatz: CheckerboardAnsatz, theta) -> StateVector:
    return apply_circuit(new_zero_state(ansatz.n_qubits), ansatz.circuit(theta), inplace=True)


def energy_of(ansatz: CheckerboardAnsatz, theta, ham: Hamiltonian) -> float:
    if ham.n_qubits != ansatz.n_qubits:
        raise ShapeError(f"ansatz on {ansatz.n_qubits} qubits, Hamiltonian on {ham.n_qubits}")
    return energy(ham, prepare_state(ansatz, theta))


def batch_energies(ansatz: CheckerboardAnsatz, thetas: np.ndarray, ham: Hamiltonian) -> np.ndarray:
    """Energies for each row of ``thetas``; rows are split across worker threads."""
    if ham.n_qubits != ansatz.n_qubits:
        raise ShapeError(f"ansatz on {ansatz.n_qubits} qubits, Hamiltonian on {ham.n_qubits}")
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    if thetas.ndim != 2 or thetas.shape[1] != ansatz.n_params:
        raise ShapeError(f"expected rows of {ansatz.n_params} parameters, got shape {thetas.shape}")
    out = np.empty(thetas.shape[0])
    kinds, q0, q1, slots = ansatz.template()
    args = [
        (ansatz.n_qubits, kinds, q0, q1, slots, thetas, *ham.energy_tables(), out, lo, hi)
        for lo, hi in split_range(thetas.shape[0], get_num_threads())
    ]
    run_tasks(_template_energies, args)
    return out


def shifted_parameters(theta: np.ndarray) -> np.ndarray:
    """Rows ``theta + s e_k`` then ``theta - s e_k`` for every slot ``k``."""
    p = theta.shape[0]
    rows = np.tile(theta, (2 * p, 1))
    idx = np.arange(p)
    rows[idx, idx] += SHIFT
    rows[p + idx, idx] -= SHIFT
    return rows


def energy_and_gradient(ansatz: CheckerboardAnsatz, theta, ham: Hamiltonian) -> tuple[float, np.ndarray]:
    """Energy at ``theta`` and its parameter-shift gradient.

    The state before each circuit step is cached once; every shifted
    evaluation restarts from the cached state preceding its gate. Slots are
    split across worker threads and assembled in slot order.
    """
    theta = ansatz._check_theta(theta)
    if ham.n_qubits != ansatz.n_qubits:
        raise ShapeError(f"ansatz on {ansatz.n_qubits} qubits, Hamiltonian on {ham.n_qubits}")
    kinds, q0, q1, slots = ansatz.template()
    angles = np.where(slots >= 0, theta[slots], 0.0)
    prefix = _prefix_states(ansatz.n_qubits, kinds, q0, q1, angles)
    tables = ham.energy_tables()
    e0 = _table_energy(prefix[-1], *tables)
    p = ansatz.n_params
    shift_ops = ansatz.slot_ops()
    plus = np.empty(p)
    minus = np.empty(p)
    args = [
        (kinds, q0, q1, angles, prefix, shift_ops, SHIFT, *tables, plus, minus, lo, hi)
        for lo, hi in split_range(p, get_num_threads())
    ]
    run_tasks(_shifted_energies, args)
    return float(e0), (plus - minus) / 2.0


def gradient_parameter_shift(ansatz: CheckerboardAnsatz, theta, ham: Hamiltonian) -> np.ndarray:
    """``dE/dtheta_k = [E(theta + pi/2 e_k) - E(theta - pi/2 e_k)] / 2``.

    Exact because every parametrised gate is ``exp(-i t P / 2)`` with ``P^2 = I``.
    """
    return energy_and_gradient(ansatz, theta, ham)[1]
