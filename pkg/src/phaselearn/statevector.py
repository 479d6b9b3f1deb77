"""Dense statevector simulation.

Qubit ordering is little-endian: qubit ``q`` is bit ``q`` of the basis index,
so ``|q2 q1 q0>`` with ``q0=1`` is basis index 1. Rotations follow
``R_P(theta) = exp(-i theta P / 2)``.

Gate kernels are numba functions that update a contiguous range of the
gate's index domain. A serial call covers the whole domain; with several
threads the domain is cut into disjoint ranges. Every amplitude is written
by exactly one range and the per-amplitude arithmetic is the same in both
cases, so results are bitwise identical for any thread count.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from phaselearn.errors import ShapeError, SizeError
from phaselearn.parallel import get_num_threads, run_tasks, split_range

MAX_QUBITS = 24
# below this many amplitudes a thread hand-off costs more than the gate
PARALLEL_MIN_QUBITS = 14


class Gate(str, enum.Enum):
    H = "H"
    X = "X"
    RY = "RY"
    RZ = "RZ"
    RZZ = "RZZ"
    CNOT = "CNOT"


_KIND_CODE = {Gate.H: 0, Gate.X: 1, Gate.RY: 2, Gate.RZ: 3, Gate.RZZ: 4, Gate.CNOT: 5}
_ROTATIONS = {Gate.RY, Gate.RZ, Gate.RZZ}
_TWO_QUBIT = {Gate.RZZ, Gate.CNOT}


@dataclass(frozen=True)
class GateOp:
    """One gate. For CNOT ``targets`` is ``(control, target)``."""

    kind: Gate
    targets: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        kind = Gate(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        want = 2 if kind in _TWO_QUBIT else 1
        if len(self.targets) != want:
            raise ValueError(f"{kind.value} takes {want} qubit(s), got {self.targets}")
        if want == 2 and self.targets[0] == self.targets[1]:
            raise ValueError(f"{kind.value} targets must be distinct, got {self.targets}")
        if (kind in _ROTATIONS) != (self.angle is not None):
            raise ValueError(f"angle must be given iff {kind.value} is a rotation")
        if self.angle is not None:
            object.__setattr__(self, "angle", float(self.angle))


def H(q: int) -> GateOp:
    return GateOp(Gate.H, (q,))


def X(q: int) -> GateOp:
    return GateOp(Gate.X, (q,))


def RY(q: int, theta: float) -> GateOp:
    return GateOp(Gate.RY, (q,), theta)


def RZ(q: int, theta: float) -> GateOp:
    return GateOp(Gate.RZ, (q,), theta)


def RZZ(q0: int, q1: int, theta: float) -> GateOp:
    return GateOp(Gate.RZZ, (q0, q1), theta)


def CNOT(control: int, target: int) -> GateOp:
    return GateOp(Gate.CNOT, (control, target))


@dataclass
class Circuit:
    n_qubits: int
    ops: list[GateOp] = field(default_factory=list)

    def __post_init__(self):
        for op in self.ops:
            _check_targets(op, self.n_qubits)

    def append(self, op: GateOp) -> "Circuit":
        _check_targets(op, self.n_qubits)
        self.ops.append(op)
        return self

    def extend(self, ops: Iterable[GateOp]) -> "Circuit":
        for op in ops:
            self.append(op)
        return self

    def __len__(self) -> int:
        return len(self.ops)

    def encode(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Flat arrays ``(kinds, q0, q1, angles)`` for the numba kernels."""
        return encode_ops(self.ops)


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_size(self.n_qubits)
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (1 << self.n_qubits,):
            raise ShapeError(
                f"expected {1 << self.n_qubits} amplitudes for {self.n_qubits} qubits, got {amps.shape}"
            )
        self.amplitudes = amps

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: "StateVector") -> complex:
        """``<self|other>``."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def _check_size(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise SizeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n}")


def _check_targets(op: GateOp, n: int) -> None:
    for t in op.targets:
        if not 0 <= t < n:
            raise IndexError(f"qubit {t} out of range for a {n}-qubit register ({op.kind.value})")


def encode_ops(ops: Sequence[GateOp]):
    m = len(ops)
    kinds = np.empty(m, dtype=np.int64)
    q0 = np.empty(m, dtype=np.int64)
    q1 = np.full(m, -1, dtype=np.int64)
    angles = np.zeros(m, dtype=np.float64)
    for k, op in enumerate(ops):
        kinds[k] = _KIND_CODE[op.kind]
        q0[k] = op.targets[0]
        if len(op.targets) == 2:
            q1[k] = op.targets[1]
        if op.angle is not None:
            angles[k] = op.angle
    return kinds, q0, q1, angles


def new_zero_state(n_qubits: int) -> StateVector:
    _check_size(n_qubits)
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


# ---------------------------------------------------------------- kernels
#
# Op codes: 0 H, 1 X, 2 RY, 3 RZ, 4 RZZ, 5 CNOT (q0 control, q1 target).
# Rotations are written with explicit real arithmetic. The fused entangler
# block calls the same helpers in the same order as the separate kernels
# (CNOT is a pure permutation), so fused and unfused application agree
# bitwise.


@njit(nogil=True, cache=True)
def _parity(x):
    x ^= x >> 32
    x ^= x >> 16
    x ^= x >> 8
    x ^= x >> 4
    x ^= x >> 2
    x ^= x >> 1
    return x & 1


@njit(nogil=True, cache=True)
def _rot(c, s, x0, x1):
    y0 = complex(c * x0.real - s * x1.real, c * x0.imag - s * x1.imag)
    y1 = complex(s * x0.real + c * x1.real, s * x0.imag + c * x1.imag)
    return y0, y1


@njit(nogil=True, cache=True)
def _op_domain(n_amp, kind):
    # RZZ sweeps every amplitude, the rest sweep amplitude pairs
    if kind == 4:
        return n_amp
    return n_amp >> 1


@njit(nogil=True, cache=True)
def _apply_op(a, kind, q0, q1, angle, lo, hi):
    if kind == 4:
        e_same = complex(math.cos(0.5 * angle), -math.sin(0.5 * angle))
        e_diff = complex(math.cos(0.5 * angle), math.sin(0.5 * angle))
        for k in range(lo, hi):
            if ((k >> q0) ^ (k >> q1)) & 1:
                a[k] = a[k] * e_diff
            else:
                a[k] = a[k] * e_same
        return
    low = (1 << q0) - 1
    bit = 1 << q0
    if kind == 0:
        r = 1.0 / math.sqrt(2.0)
        for j in range(lo, hi):
            i0 = ((j >> q0) << (q0 + 1)) | (j & low)
            i1 = i0 | bit
            x0 = a[i0]
            x1 = a[i1]
            a[i0] = complex((x0.real + x1.real) * r, (x0.imag + x1.imag) * r)
            a[i1] = complex((x0.real - x1.real) * r, (x0.imag - x1.imag) * r)
    elif kind == 1:
        for j in range(lo, hi):
            i0 = ((j >> q0) << (q0 + 1)) | (j & low)
            i1 = i0 | bit
            x0 = a[i0]
            a[i0] = a[i1]
            a[i1] = x0
    elif kind == 2:
        c = math.cos(0.5 * angle)
        s = math.sin(0.5 * angle)
        for j in range(lo, hi):
            i0 = ((j >> q0) << (q0 + 1)) | (j & low)
            i1 = i0 | bit
            a[i0], a[i1] = _rot(c, s, a[i0], a[i1])
    elif kind == 3:
        e0 = complex(math.cos(0.5 * angle), -math.sin(0.5 * angle))
        e1 = complex(math.cos(0.5 * angle), math.sin(0.5 * angle))
        for j in range(lo, hi):
            i0 = ((j >> q0) << (q0 + 1)) | (j & low)
            i1 = i0 | bit
            a[i0] = a[i0] * e0
            a[i1] = a[i1] * e1
    else:
        # pairs are formed over the target bit, swapped when the control is set
        tlow = (1 << q1) - 1
        tbit = 1 << q1
        for j in range(lo, hi):
            i0 = ((j >> q1) << (q1 + 1)) | (j & tlow)
            if (i0 >> q0) & 1:
                i1 = i0 | tbit
                x0 = a[i0]
                a[i0] = a[i1]
                a[i1] = x0


BLOCK_LEN = 5


@njit(nogil=True, cache=True)
def _is_block(kinds, q0, q1, k):
    """True when ops ``k..k+4`` are ``CNOT(i,j), RY(i), RY(j), CNOT(i,j), RY(j)``."""
    if k + 4 >= kinds.shape[0]:
        return False
    i = q0[k]
    j = q1[k]
    return (
        kinds[k] == 5 and kinds[k + 1] == 2 and kinds[k + 2] == 2 and kinds[k + 3] == 5 and kinds[k + 4] == 2
        and q0[k + 1] == i and q0[k + 2] == j and q0[k + 3] == i and q1[k + 3] == j and q0[k + 4] == j
    )


@njit(nogil=True, cache=True)
def _apply_block(a, qi, qj, beta, gamma, alpha, lo, hi):
    """Entangler block on ``(qi, qj)`` in one pass over the amplitude quads.

    ``CNOT(qi, qj)``, ``RY(beta)`` on ``qi``, ``RY(gamma)`` on ``qj``,
    ``CNOT(qi, qj)``, ``RY(alpha)`` on ``qj``.
    """
    cb = math.cos(0.5 * beta)
    sb = math.sin(0.5 * beta)
    cg = math.cos(0.5 * gamma)
    sg = math.sin(0.5 * gamma)
    ca = math.cos(0.5 * alpha)
    sa = math.sin(0.5 * alpha)
    p_lo = min(qi, qj)
    p_hi = max(qi, qj)
    m_lo = (1 << p_lo) - 1
    m_hi = (1 << p_hi) - 1
    bi = 1 << qi
    bj = 1 << qj
    for n in range(lo, hi):
        t = ((n >> p_lo) << (p_lo + 1)) | (n & m_lo)
        k00 = ((t >> p_hi) << (p_hi + 1)) | (t & m_hi)
        k10 = k00 | bi
        k01 = k00 | bj
        k11 = k10 | bj
        # first CNOT swaps the qj pair where qi is set
        x00 = a[k00]
        x10 = a[k11]
        x01 = a[k01]
        x11 = a[k10]
        u00, u10 = _rot(cb, sb, x00, x10)
        u01, u11 = _rot(cb, sb, x01, x11)
        v00, v01 = _rot(cg, sg, u00, u01)
        v10, v11 = _rot(cg, sg, u10, u11)
        w00, w01 = _rot(ca, sa, v00, v01)
        w10, w11 = _rot(ca, sa, v11, v10)
        a[k00] = w00
        a[k01] = w01
        a[k10] = w10
        a[k11] = w11


@njit(nogil=True, cache=True)
def _step_starts(kinds, q0, q1):
    """Start index of every fused step, followed by ``len(kinds)``."""
    m = kinds.shape[0]
    starts = np.empty(m + 1, dtype=np.int64)
    n_steps = 0
    k = 0
    while k < m:
        starts[n_steps] = k
        n_steps += 1
        k += BLOCK_LEN if _is_block(kinds, q0, q1, k) else 1
    starts[n_steps] = m
    return starts[: n_steps + 1]


@njit(nogil=True, cache=True)
def _run_one_step(a, kinds, q0, q1, angles, starts, s):
    n_amp = a.shape[0]
    k = starts[s]
    if starts[s + 1] - k == BLOCK_LEN:
        _apply_block(a, q0[k], q1[k], angles[k + 1], angles[k + 2], angles[k + 4], 0, n_amp >> 2)
    else:
        _apply_op(a, kinds[k], q0[k], q1[k], angles[k], 0, _op_domain(n_amp, kinds[k]))


@njit(nogil=True, cache=True)
def _run_steps(a, kinds, q0, q1, angles, starts, first):
    for s in range(first, starts.shape[0] - 1):
        _run_one_step(a, kinds, q0, q1, angles, starts, s)


@njit(nogil=True, cache=True)
def _run_ops(a, kinds, q0, q1, angles):
    _run_steps(a, kinds, q0, q1, angles, _step_starts(kinds, q0, q1), 0)


@njit(nogil=True, cache=True)
def _pauli_expect(a, xmask, zmask, ny):
    total = 0j
    for k in range(a.shape[0]):
        v = a[k ^ xmask].conjugate() * a[k]
        if _parity(k & zmask):
            total -= v
        else:
            total += v
    # P = i^ny X^xmask Z^zmask
    r = ny & 3
    if r == 1:
        total = total * 1j
    elif r == 2:
        total = -total
    elif r == 3:
        total = total * -1j
    return total


@njit(nogil=True, cache=True)
def _pauli_sum_expect(a, xmasks, zmasks, nys, coeffs):
    e = 0.0
    for t in range(coeffs.shape[0]):
        e += coeffs[t] * _pauli_expect(a, xmasks[t], zmasks[t], nys[t]).real
    return e


@njit(nogil=True, cache=True)
def _table_energy(a, diag, gx, weights, rx, rz, rny, rcoef):
    """Energy from precomputed tables.

    ``diag`` is the summed diagonal part. Off-diagonal terms sharing an
    X-mask ``gx[g]`` act as ``H_g |k> = weights[g, k] |k ^ gx[g]>``;
    hermiticity lets each ``(k, k ^ x)`` pair be visited once. Terms in
    ``r*`` (used when tables would be too large) are evaluated one by one.
    """
    e = 0.0
    for k in range(a.shape[0]):
        v = a[k]
        e += diag[k] * (v.real * v.real + v.imag * v.imag)
    for g in range(gx.shape[0]):
        x = gx[g]
        part = 0.0
        for k in range(a.shape[0]):
            kk = k ^ x
            if kk > k:
                p = a[kk]
                q = a[k]
                re = p.real * q.real + p.imag * q.imag
                im = p.real * q.imag - p.imag * q.real
                w = weights[g, k]
                part += re * w.real - im * w.imag
        e += 2.0 * part
    for t in range(rcoef.shape[0]):
        e += rcoef[t] * _pauli_expect(a, rx[t], rz[t], rny[t]).real
    return e


@njit(nogil=True, cache=True)
def _pauli_sum_apply(v, out, xmasks, zmasks, nys, coeffs):
    """``out = sum_t c_t P_t v``."""
    for k in range(out.shape[0]):
        out[k] = 0.0
    for t in range(coeffs.shape[0]):
        r = nys[t] & 3
        if r == 0:
            ph = complex(coeffs[t], 0.0)
        elif r == 1:
            ph = complex(0.0, coeffs[t])
        elif r == 2:
            ph = complex(-coeffs[t], 0.0)
        else:
            ph = complex(0.0, -coeffs[t])
        xm = xmasks[t]
        zm = zmasks[t]
        for k in range(v.shape[0]):
            if _parity(k & zm):
                out[k ^ xm] -= ph * v[k]
            else:
                out[k ^ xm] += ph * v[k]


@njit(nogil=True, cache=True)
def _template_energies(n, kinds, q0, q1, slots, thetas, diag, gx, weights, rx, rz, rny, rcoef, out, lo, hi):
    """Energies of a parametrised circuit for rows ``lo..hi`` of ``thetas``.

    ``slots[k]`` is the parameter index feeding op ``k`` (``-1`` for fixed ops).
    """
    starts = _step_starts(kinds, q0, q1)
    m = kinds.shape[0]
    angles = np.zeros(m)
    a = np.empty(1 << n, dtype=np.complex128)
    for r in range(lo, hi):
        for k in range(m):
            if slots[k] >= 0:
                angles[k] = thetas[r, slots[k]]
        a[:] = 0.0
        a[0] = 1.0
        _run_steps(a, kinds, q0, q1, angles, starts, 0)
        out[r] = _table_energy(a, diag, gx, weights, rx, rz, rny, rcoef)


@njit(nogil=True, cache=True)
def _prefix_states(n, kinds, q0, q1, angles):
    """State before every fused step, plus the final state in the last row."""
    starts = _step_starts(kinds, q0, q1)
    n_steps = starts.shape[0] - 1
    states = np.empty((n_steps + 1, 1 << n), dtype=np.complex128)
    states[0, :] = 0.0
    states[0, 0] = 1.0
    for s in range(n_steps):
        states[s + 1, :] = states[s, :]
        _run_one_step(states[s + 1], kinds, q0, q1, angles, starts, s)
    return states


@njit(nogil=True, cache=True)
def _shifted_energies(kinds, q0, q1, angles, prefix, shift_ops, shift,
                      diag, gx, weights, rx, rz, rny, rcoef, out_plus, out_minus, lo, hi):
    """Energies with op ``shift_ops[p]`` shifted by ``+-shift`` for ``p`` in ``lo..hi``.

    Each run restarts from the cached state before the shifted op's step.
    """
    starts = _step_starts(kinds, q0, q1)
    m = kinds.shape[0]
    step_of = np.empty(m, dtype=np.int64)
    for s in range(starts.shape[0] - 1):
        for k in range(starts[s], starts[s + 1]):
            step_of[k] = s
    a = np.empty(prefix.shape[1], dtype=np.complex128)
    shifted = angles.copy()
    for p in range(lo, hi):
        k = shift_ops[p]
        s = step_of[k]
        for sign in range(2):
            shifted[k] = angles[k] + (shift if sign == 0 else -shift)
            a[:] = prefix[s]
            _run_steps(a, kinds, q0, q1, shifted, starts, s)
            e = _table_energy(a, diag, gx, weights, rx, rz, rny, rcoef)
            if sign == 0:
                out_plus[p] = e
            else:
                out_minus[p] = e
        shifted[k] = angles[k]


@njit(nogil=True, cache=True)
def _template_probabilities(n, kinds, q0, q1, slots, thetas, out, lo, hi):
    starts = _step_starts(kinds, q0, q1)
    n_amp = 1 << n
    m = kinds.shape[0]
    angles = np.zeros(m)
    a = np.empty(n_amp, dtype=np.complex128)
    for r in range(lo, hi):
        for k in range(m):
            if slots[k] >= 0:
                angles[k] = thetas[r, slots[k]]
        a[:] = 0.0
        a[0] = 1.0
        _run_steps(a, kinds, q0, q1, angles, starts, 0)
        for k in range(n_amp):
            out[r, k] = a[k].real * a[k].real + a[k].imag * a[k].imag


# ---------------------------------------------------------------- public ops


def _apply_encoded(amps: np.ndarray, kinds, q0, q1, angles, threads: int) -> None:
    n_qubits = amps.shape[0].bit_length() - 1
    if threads <= 1 or n_qubits < PARALLEL_MIN_QUBITS:
        _run_ops(amps, kinds, q0, q1, angles)
        return
    n_amp = amps.shape[0]
    k = 0
    while k < kinds.shape[0]:
        if _is_block(kinds, q0, q1, k):
            args = [
                (amps, q0[k], q1[k], angles[k + 1], angles[k + 2], angles[k + 4], lo, hi)
                for lo, hi in split_range(n_amp >> 2, threads)
            ]
            run_tasks(_apply_block, args, threads)
            k += BLOCK_LEN
        else:
            dom = _op_domain(n_amp, kinds[k])
            args = [(amps, kinds[k], q0[k], q1[k], angles[k], lo, hi) for lo, hi in split_range(dom, threads)]
            run_tasks(_apply_op, args, threads)
            k += 1


def apply_gate(state: StateVector, gate: GateOp, *, inplace: bool = False) -> StateVector:
    _check_targets(gate, state.n_qubits)
    out = state if inplace else state.copy()
    _apply_encoded(out.amplitudes, *encode_ops([gate]), get_num_threads())
    return out


def apply_circuit(state: StateVector, circuit: Circuit, *, inplace: bool = False) -> StateVector:
    if circuit.n_qubits != state.n_qubits:
        raise ShapeError(f"circuit has {circuit.n_qubits} qubits, state has {state.n_qubits}")
    out = state if inplace else state.copy()
    if circuit.ops:
        _apply_encoded(out.amplitudes, *circuit.encode(), get_num_threads())
    return out


def pauli_masks(labels: str) -> tuple[int, int, int]:
    """``(xmask, zmask, n_y)`` for a label string, leftmost letter = qubit 0."""
    xmask = zmask = ny = 0
    for q, ch in enumerate(labels):
        if ch in "XY":
            xmask |= 1 << q
        if ch in "ZY":
            zmask |= 1 << q
        if ch == "Y":
            ny += 1
        elif ch not in "IXZ":
            raise ValueError(f"unknown Pauli label {ch!r} in {labels!r}")
    return xmask, zmask, ny


def _pauli_raw(state: StateVector, pauli) -> complex:
    labels = str(pauli)
    if len(labels) != state.n_qubits:
        raise ShapeError(f"Pauli string of length {len(labels)} on a {state.n_qubits}-qubit state")
    return complex(_pauli_expect(state.amplitudes, *pauli_masks(labels)))


def pauli_expectation(state: StateVector, pauli) -> float:
    """Exact ``<psi|P|psi>`` for a Pauli string (``str`` or ``PauliString``)."""
    return _pauli_raw(state, pauli).real


def basis_probabilities(state: StateVector) -> np.ndarray:
    a = state.amplitudes
    return a.real * a.real + a.imag * a.imag


def to_matrix(gate: GateOp, n_qubits: int) -> np.ndarray:
    """Dense ``2^n x 2^n`` unitary of a gate, built independently of the kernels."""
    _check_targets(gate, n_qubits)
    dim = 1 << n_qubits
    U = np.zeros((dim, dim), dtype=np.complex128)
    th = gate.angle or 0.0
    for col in range(dim):
        bits = [(col >> q) & 1 for q in range(n_qubits)]
        if gate.kind in (Gate.H, Gate.X, Gate.RY, Gate.RZ):
            q = gate.targets[0]
            b = bits[q]
            local = {
                Gate.H: np.array([[1, 1], [1, -1]]) / math.sqrt(2),
                Gate.X: np.array([[0, 1], [1, 0]]),
                Gate.RY: np.array([[math.cos(th / 2), -math.sin(th / 2)], [math.sin(th / 2), math.cos(th / 2)]]),
                Gate.RZ: np.diag([np.exp(-0.5j * th), np.exp(0.5j * th)]),
            }[gate.kind]
            for nb in (0, 1):
                row = col & ~(1 << q) | (nb << q)
                U[row, col] += local[nb, b]
        elif gate.kind is Gate.RZZ:
            zz = (1 - 2 * bits[gate.targets[0]]) * (1 - 2 * bits[gate.targets[1]])
            U[col, col] = np.exp(-0.5j * th * zz)
        else:
            c, t = gate.targets
            row = col ^ (1 << t) if bits[c] else col
            U[row, col] = 1.0
    return U
