import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import hamiltonian_matrix, tfim_matrix, xxz_matrix
from phaselearn.errors import ConvergenceError, DomainError, ShapeError, SizeError
from phaselearn.hamiltonian import (
    Hamiltonian,
    PauliString,
    PauliTerm,
    build_model,
    build_tfim,
    build_xxz,
    energy,
    energy_imag,
    exact_ground,
    load_hamiltonian,
)
from phaselearn.statevector import StateVector, new_zero_state

SQRT5 = math.sqrt(5)


def random_state(rng, n):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return StateVector(n, v / np.linalg.norm(v))


def terms_of(ham):
    return [(t.coefficient, t.string.ops) for t in ham.terms]


# ---------------------------------------------------------------- types


def test_pauli_string_validation():
    assert str(PauliString("ixz")) == "IXZ"
    with pytest.raises(ValueError):
        PauliString("XA")
    with pytest.raises(ValueError):
        PauliString("")


@pytest.mark.parametrize("c", [0.0, math.inf, math.nan])
def test_pauli_term_rejects_bad_coefficient(c):
    with pytest.raises(ValueError):
        PauliTerm(c, PauliString("Z"))


def test_hamiltonian_rejects_length_mismatch():
    with pytest.raises(ShapeError):
        Hamiltonian(2, (PauliTerm(1.0, PauliString("ZZZ")),))


# ---------------------------------------------------------------- builders


def test_tfim_no_field():
    assert terms_of(build_tfim(2, 1, 0)) == [(1.0, "ZZ")]


def test_tfim_three_sites():
    ham = build_tfim(3, 1, 0.5)
    assert terms_of(ham) == [(1.0, "ZZI"), (1.0, "IZZ"), (0.5, "XII"), (0.5, "IXI"), (0.5, "IIX")]
    assert ham.model == "TFIM" and ham.couplings["h"] == 0.5


def test_tfim_errors():
    with pytest.raises(SizeError):
        build_tfim(1, 1, 1)
    with pytest.raises(DomainError):
        build_tfim(3, 0, 1)
    with pytest.raises(DomainError):
        build_tfim(3, -1, 1)


def test_xxz_two_sites():
    assert terms_of(build_xxz(2, 1, -1)) == [(-1.0, "XX"), (-1.0, "YY"), (1.0, "ZZ")]


def test_xxz_errors():
    with pytest.raises(SizeError):
        build_xxz(1, 1, -1)


@pytest.mark.parametrize("n", range(2, 11))
def test_term_counts(n):
    assert len(build_tfim(n, 1, 0.7).terms) == 2 * n - 1
    assert len(build_xxz(n, 1, -0.5).terms) == 3 * (n - 1)
    assert len(build_tfim(n, 1, 0.7).terms) <= 3 * n


def test_builders_match_dense_oracles():
    assert np.allclose(hamiltonian_matrix(build_tfim(4, 0.9, 1.3)), tfim_matrix(4, 0.9, 1.3))
    assert np.allclose(hamiltonian_matrix(build_xxz(4, 1, -0.6)), xxz_matrix(4, 1, -0.6))


def test_matvec_and_to_dense_match_oracle(rng):
    ham = build_xxz(5, 1, -1.4)
    M = xxz_matrix(5, 1, -1.4)
    v = rng.normal(size=32) + 1j * rng.normal(size=32)
    assert np.allclose(ham.matvec(v), M @ v, atol=1e-12)
    assert np.allclose(ham.to_dense(), M, atol=1e-14)


def test_periodic_adds_wrap_bond():
    assert len(build_tfim(4, 1, 1, periodic=True).terms) == 2 * 4
    assert build_xxz(4, 1, -1, periodic=True).terms[-1].string.ops == "ZIIZ"


def test_build_model_dispatch():
    assert build_model("tfim", 3, 0.4).couplings == {"j": 1.0, "h": 0.4, "periodic": False}
    assert build_model("XXZ", 3, -0.4).couplings["j_z"] == -0.4
    with pytest.raises(ValueError):
        build_model("heisenberg", 3, 1.0)


def test_json_round_trip(tmp_path):
    ham = build_xxz(3, 1, -0.3)
    p = tmp_path / "h.json"
    p.write_text(json.dumps(ham.to_json()))
    loaded = load_hamiltonian(p)
    assert terms_of(loaded) == terms_of(ham)


def test_json_custom_document():
    ham = Hamiltonian.from_json({"n": 3, "terms": [{"coeff": 0.5, "ops": "XIZ"}, {"coeff": -2, "ops": "IYY"}]})
    assert terms_of(ham) == [(0.5, "XIZ"), (-2.0, "IYY")]


# ---------------------------------------------------------------- energy


def test_energy_product_state():
    assert energy(build_tfim(4, 1, 0.5), new_zero_state(4)) == 3.0


def test_energy_dimension_mismatch():
    with pytest.raises(ShapeError):
        energy(build_tfim(3, 1, 1), new_zero_state(4))


@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_energy_matches_dense_and_bounds(seed, n):
    rng = np.random.default_rng(seed)
    ham = build_xxz(n, 1, rng.uniform(-2, 2)) if seed % 2 else build_tfim(n, rng.uniform(0.1, 2), rng.uniform(0, 2))
    s = random_state(rng, n)
    want = np.vdot(s.amplitudes, hamiltonian_matrix(ham) @ s.amplitudes).real
    e = energy(ham, s)
    assert e == pytest.approx(want, abs=1e-12)
    assert -ham.norm_bound() - 1e-12 <= e <= ham.norm_bound() + 1e-12
    assert abs(energy_imag(ham, s)) <= 1e-12


def test_energy_tables_match_term_sum(rng):
    ham = build_xxz(6, 0.8, -1.3)
    from phaselearn.statevector import _table_energy

    s = random_state(rng, 6)
    assert _table_energy(s.amplitudes, *ham.energy_tables()) == pytest.approx(energy(ham, s), abs=1e-12)


# ---------------------------------------------------------------- exact oracle


def test_exact_tfim_no_field():
    e, v = exact_ground(build_tfim(2, 1, 0))
    assert e == pytest.approx(-1.0, abs=1e-10)
    assert energy(build_tfim(2, 1, 0), v) == pytest.approx(-1.0, abs=1e-10)


def test_exact_tfim_two_sites():
    ham = build_tfim(2, 1, 1)
    e, v = exact_ground(ham)
    assert e == pytest.approx(-SQRT5, abs=1e-10)
    assert energy(ham, v) == pytest.approx(-SQRT5, abs=1e-10)


def test_exact_xxz_two_sites():
    e, v = exact_ground(build_xxz(2, 1, -1))
    assert e == pytest.approx(-3.0, abs=1e-10)
    # ground state (|01> + |10>)/sqrt2 up to phase
    assert abs(np.vdot(np.array([0, 1, 1, 0]) / math.sqrt(2), v.amplitudes)) == pytest.approx(1.0, abs=1e-8)


def test_exact_pure_ising_bond():
    e, _ = exact_ground(build_xxz(2, 0, -1))
    assert e == pytest.approx(-1.0, abs=1e-10)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_exact_matches_dense_diagonalisation(n):
    for ham in (build_tfim(n, 1, 0.8), build_xxz(n, 1, -0.7), build_xxz(n, 1, -1.5)):
        want = np.linalg.eigvalsh(hamiltonian_matrix(ham))[0]
        e, v = exact_ground(ham)
        assert e == pytest.approx(want, abs=1e-8)
        assert abs(v.norm() - 1) <= 1e-12
        assert np.linalg.norm(ham.matvec(v.amplitudes) - e * v.amplitudes) <= 1e-8


def test_exact_size_limit():
    with pytest.raises(SizeError):
        exact_ground(build_tfim(13, 1, 1))


def test_exact_iteration_cap():
    with pytest.raises(ConvergenceError):
        exact_ground(build_tfim(8, 1, 1), max_matvecs=3, krylov_dim=2)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_variational_bound(seed):
    rng = np.random.default_rng(seed)
    ham = build_tfim(5, 1, rng.uniform(0, 2))
    e0, _ = exact_ground(ham)
    assert energy(ham, random_state(rng, 5)) >= e0 - 1e-8
