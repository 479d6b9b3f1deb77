import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gate_matrix, tfim_matrix
from phaselearn.ansatz import (
    SCHEME,
    ansatz_from_descriptor,
    batch_energies,
    build_checkerboard,
    energy_and_gradient,
    energy_of,
    gradient_parameter_shift,
    prepare_state,
)
from phaselearn.errors import ShapeError, SizeError
from phaselearn.hamiltonian import build_tfim, build_xxz, exact_ground
from phaselearn.parallel import num_threads
from phaselearn.statevector import basis_probabilities


def pairs(ansatz):
    return [[b.qubit_pair for b in layer] for layer in ansatz.layers]


def central_difference(ansatz, theta, ham, step=1e-5):
    out = np.empty_like(theta)
    for k in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += step
        tm[k] -= step
        out[k] = (energy_of(ansatz, tp, ham) - energy_of(ansatz, tm, ham)) / (2 * step)
    return out


def dense_ansatz_state(ansatz, theta):
    """Reference state built by dense matrices following the documented block layout."""
    n = ansatz.n_qubits
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1
    for q in range(n):
        psi = gate_matrix("RY", (q,), theta[q], n) @ psi
    for layer in ansatz.layers:
        for block in layer:
            i, j = block.qubit_pair
            a, b, g = block.param_slots
            for kind, tg, ang in [("CNOT", (i, j), None), ("RY", (i,), theta[b]), ("RY", (j,), theta[g]),
                                  ("CNOT", (i, j), None), ("RY", (j,), theta[a])]:
                psi = gate_matrix(kind, tg, ang, n) @ psi
    return psi


# ---------------------------------------------------------------- layout


def test_layout_four_qubits_depth_two():
    a = build_checkerboard(4, 2)
    assert pairs(a) == [[(0, 1), (2, 3)], [(1, 2)]]
    assert a.n_params == 13


def test_layout_ten_qubits_depth_four():
    a = build_checkerboard(10, 4)
    assert [len(layer) for layer in a.layers] == [5, 4, 5, 4]
    assert a.n_params == 64


def test_layout_minimal():
    a = build_checkerboard(2, 1)
    assert a.n_blocks == 1 and a.n_params == 5


@given(st.integers(2, 14), st.integers(1, 8))
def test_layout_invariants(n, depth):
    a = build_checkerboard(n, depth)
    for ell, layer in enumerate(a.layers, start=1):
        assert len(layer) == (n // 2 if ell % 2 else (n - 1) // 2)
        for b in layer:
            i, j = b.qubit_pair
            assert j == i + 1 and len(set(b.param_slots)) == 3
    assert a.n_params == n + 3 * a.n_blocks
    slots = sorted(s for layer in a.layers for b in layer for s in b.param_slots)
    assert slots == list(range(n, a.n_params))


@pytest.mark.parametrize("n,depth", [(1, 1), (4, 0)])
def test_layout_errors(n, depth):
    with pytest.raises(SizeError):
        build_checkerboard(n, depth)


def test_descriptor_round_trip():
    a = build_checkerboard(6, 3)
    assert a.descriptor() == {"n": 6, "depth": 3, "scheme": SCHEME}
    assert ansatz_from_descriptor(a.descriptor()) == a
    with pytest.raises(ValueError):
        ansatz_from_descriptor({"n": 6, "depth": 3, "scheme": "other"})


def test_slot_coverage_each_slot_feeds_one_gate():
    a = build_checkerboard(5, 3)
    slots = a.template()[3]
    used = slots[slots >= 0]
    assert sorted(used.tolist()) == list(range(a.n_params))


# ---------------------------------------------------------------- states


def test_zero_parameters_give_zero_state():
    a = build_checkerboard(6, 3)
    amps = prepare_state(a, np.zeros(a.n_params)).amplitudes
    expected = np.zeros(64, dtype=complex)
    expected[0] = 1
    assert np.array_equal(amps, expected)


def test_single_rotation_little_endian():
    a = build_checkerboard(2, 1)
    probs = basis_probabilities(prepare_state(a, [math.pi, 0, 0, 0, 0]))
    assert probs[1] == pytest.approx(1.0, abs=1e-15)


def test_parameter_length_checked():
    a = build_checkerboard(4, 1)
    with pytest.raises(ShapeError):
        prepare_state(a, np.zeros(a.n_params + 1))
    with pytest.raises(ValueError):
        prepare_state(a, np.full(a.n_params, np.nan))


@given(st.integers(0, 2**32 - 1))
def test_random_state_unit_norm(seed):
    a = build_checkerboard(6, 3)
    theta = np.random.default_rng(seed).uniform(-np.pi, np.pi, a.n_params)
    assert abs(prepare_state(a, theta).norm() - 1) <= 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(1, 3))
@settings(max_examples=40)
def test_state_matches_dense_construction(seed, n, depth):
    a = build_checkerboard(n, depth)
    theta = np.random.default_rng(seed).uniform(-np.pi, np.pi, a.n_params)
    assert np.max(np.abs(prepare_state(a, theta).amplitudes - dense_ansatz_state(a, theta))) <= 1e-12


def test_perturbing_any_slot_changes_state(rng):
    a = build_checkerboard(5, 2)
    theta = rng.uniform(-np.pi, np.pi, a.n_params)
    base = prepare_state(a, theta)
    for k in range(a.n_params):
        t = theta.copy()
        t[k] += 0.3
        assert abs(base.inner(prepare_state(a, t))) ** 2 < 1 - 1e-6


# ---------------------------------------------------------------- energy


@pytest.mark.parametrize("n", [2, 5, 8])
def test_energy_at_zero(n):
    a = build_checkerboard(n, 2)
    assert energy_of(a, np.zeros(a.n_params), build_tfim(n, 1, 0.7)) == pytest.approx(n - 1, abs=1e-12)


def test_energy_dimension_mismatch():
    with pytest.raises(ShapeError):
        energy_of(build_checkerboard(3, 1), np.zeros(build_checkerboard(3, 1).n_params), build_tfim(4, 1, 1))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25)
def test_energy_above_ground(seed):
    rng = np.random.default_rng(seed)
    a = build_checkerboard(5, 2)
    ham = build_xxz(5, 1, rng.uniform(-2, 0))
    e0, _ = exact_ground(ham)
    assert energy_of(a, rng.uniform(-np.pi, np.pi, a.n_params), ham) >= e0 - 1e-8


def test_energy_matches_dense(rng):
    a = build_checkerboard(4, 3)
    theta = rng.normal(size=a.n_params)
    psi = dense_ansatz_state(a, theta)
    want = np.vdot(psi, tfim_matrix(4, 1, 0.9) @ psi).real
    assert energy_of(a, theta, build_tfim(4, 1, 0.9)) == pytest.approx(want, abs=1e-12)


def test_batch_energies_match_single(rng):
    a = build_checkerboard(5, 2)
    ham = build_tfim(5, 1, 1.1)
    thetas = rng.normal(size=(7, a.n_params))
    got = batch_energies(a, thetas, ham)
    assert np.allclose(got, [energy_of(a, t, ham) for t in thetas], atol=1e-12)
    with pytest.raises(ShapeError):
        batch_energies(a, thetas[:, :-1], ham)


# ---------------------------------------------------------------- gradients


def test_gradient_random_matches_finite_difference(rng):
    a = build_checkerboard(4, 2)
    ham = build_tfim(4, 1, 1)
    theta = rng.uniform(-np.pi, np.pi, a.n_params)
    g = gradient_parameter_shift(a, theta, ham)
    fd = central_difference(a, theta, ham)
    assert g.shape == (a.n_params,)
    assert np.all(np.abs(g - fd) <= 1e-6 * np.maximum(np.abs(fd), 1e-2))


@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(1, 3), st.booleans())
@settings(max_examples=25)
def test_gradient_property(seed, n, depth, xxz):
    rng = np.random.default_rng(seed)
    a = build_checkerboard(n, depth)
    ham = build_xxz(n, 1, rng.uniform(-2, 2)) if xxz else build_tfim(n, 1, rng.uniform(0, 2))
    theta = rng.uniform(-np.pi, np.pi, a.n_params)
    g = gradient_parameter_shift(a, theta, ham)
    fd = central_difference(a, theta, ham)
    assert np.all(np.abs(g - fd) <= np.maximum(1e-8, 1e-6 * np.abs(fd)))


def test_gradient_vanishes_at_zero_for_diagonal_hamiltonian():
    # every RY derivative of <Z...Z> at theta = 0 carries a factor sin(0)
    a = build_checkerboard(5, 3)
    theta = np.zeros(a.n_params)
    ham = build_tfim(5, 1, 0)
    assert np.all(gradient_parameter_shift(a, theta, ham) == 0)
    assert np.all(np.abs(central_difference(a, theta, ham)) <= 1e-9)


def test_energy_and_gradient_energy_agrees(rng):
    a = build_checkerboard(6, 2)
    ham = build_xxz(6, 1, -0.8)
    theta = rng.normal(size=a.n_params)
    e, _ = energy_and_gradient(a, theta, ham)
    assert e == pytest.approx(energy_of(a, theta, ham), abs=1e-12)


def test_gradient_identical_across_threads(rng):
    a = build_checkerboard(8, 3)
    ham = build_tfim(8, 1, 1)
    theta = rng.normal(size=a.n_params)
    with num_threads(1):
        g1 = gradient_parameter_shift(a, theta, ham)
    with num_threads(3):
        g3 = gradient_parameter_shift(a, theta, ham)
    assert np.array_equal(g1, g3)
