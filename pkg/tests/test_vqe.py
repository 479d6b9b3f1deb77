import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phaselearn.ansatz import build_checkerboard, gradient_parameter_shift
from phaselearn.errors import DivergenceError
from phaselearn.hamiltonian import build_tfim, build_xxz, exact_ground
from phaselearn.vqe import (
    Adam,
    GradientDescent,
    Optimizer,
    OptimizerConfig,
    initial_parameters,
    run_seed,
    run_vqe,
    splitmix64,
    sweep,
)

SQRT5 = math.sqrt(5)


def test_config_defaults():
    c = OptimizerConfig()
    assert (c.learning_rate, c.max_iters, c.grad_tolerance, c.optimizer) == (0.05, 500, 1e-4, Optimizer.ADAM)
    assert (c.beta1, c.beta2, c.eps) == (0.9, 0.999, 1e-8)


@pytest.mark.parametrize("kw", [{"learning_rate": 0}, {"learning_rate": -1}, {"max_iters": 0}, {"seed": -1},
                                {"seed": 1 << 64}, {"optimizer": "lbfgs"}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        OptimizerConfig(**kw)


def test_adam_first_step_is_signed_lr():
    # bias-corrected first step moves every coordinate by lr * sign(grad)
    step = Adam(0.1).step(np.zeros(3), np.array([2.0, -0.5, 1e-3]))
    assert np.allclose(step, [-0.1, 0.1, -0.1], atol=1e-6)


def test_gradient_descent_step():
    assert np.allclose(GradientDescent(0.5).step(np.ones(2), np.array([1.0, -2.0])), [0.5, 2.0])


def test_initial_parameters_distribution():
    th = initial_parameters(20000, 3)
    assert abs(th.mean()) < 0.005 and abs(th.std() - 0.1) < 0.005
    assert np.array_equal(th, initial_parameters(20000, 3))


def test_two_site_tfim_reaches_ground():
    a = build_checkerboard(2, 1)
    res = run_vqe(a, build_tfim(2, 1, 1), OptimizerConfig(seed=7))
    assert abs(res.final_energy + SQRT5) <= 1e-3
    assert res.converged
    g = gradient_parameter_shift(a, res.theta_opt, build_tfim(2, 1, 1))
    assert np.max(np.abs(g)) <= 1e-3


def test_eight_site_tfim_small_field():
    ham = build_tfim(8, 1, 0.2)
    res = run_vqe(build_checkerboard(8, 4), ham)
    e0, _ = exact_ground(ham)
    assert abs(res.final_energy - e0) / abs(e0) <= 1e-2
    assert res.final_energy >= e0 - 1e-8


def test_single_iteration_cap():
    res = run_vqe(build_checkerboard(4, 2), build_tfim(4, 1, 1), OptimizerConfig(max_iters=1))
    assert not res.converged
    assert res.iterations_used == 1 and len(res.energy_history) == 1


def test_history_invariants():
    ham = build_xxz(4, 1, -0.5)
    res = run_vqe(build_checkerboard(4, 2), ham, OptimizerConfig(max_iters=150, seed=11))
    assert np.all(np.isfinite(res.energy_history))
    assert res.final_energy == res.energy_history[-1]
    assert res.final_energy <= res.energy_history[0]
    best = np.minimum.accumulate(res.energy_history)
    assert np.all(np.diff(best) <= 0)


def test_gradient_descent_option():
    res = run_vqe(build_checkerboard(2, 1), build_tfim(2, 1, 1),
                  OptimizerConfig(optimizer="gd", learning_rate=0.2, max_iters=300, seed=1))
    assert res.final_energy < res.energy_history[0]


@given(st.integers(0, 2**64 - 1), st.floats(0.1, 1.9))
def test_variational_floor_and_reproducibility(seed, h):
    a = build_checkerboard(4, 1)
    ham = build_tfim(4, 1, h)
    cfg = OptimizerConfig(max_iters=30, seed=seed)
    r1 = run_vqe(a, ham, cfg)
    r2 = run_vqe(a, ham, cfg)
    assert np.array_equal(r1.theta_opt, r2.theta_opt)
    assert r1.final_energy >= exact_ground(ham)[0] - 1e-8


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_divergence_raises():
    # coefficients near the float limit overflow the energy sum to a non-finite value
    ham = build_xxz(3, 1, 1e308)
    with pytest.raises(DivergenceError) as err:
        run_vqe(build_checkerboard(3, 1), ham)
    assert err.value.iteration == 0


def test_nonfinite_start_raises():
    a = build_checkerboard(2, 1)
    with pytest.raises(DivergenceError):
        run_vqe(a, build_tfim(2, 1, 1), theta0=np.full(a.n_params, np.inf))


# ---------------------------------------------------------------- sweeps


def test_splitmix_reference_values():
    # first outputs of the reference SplitMix64 generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_run_seed_mixing():
    assert run_seed(0, 3) == splitmix64(3)
    assert run_seed(5, 3) == 5 ^ splitmix64(3)
    assert len({run_seed(42, i) for i in range(1000)}) == 1000


def test_sweep_empty_couplings():
    with pytest.raises(ValueError):
        sweep("TFIM", 4, [], 1)


def test_sweep_single_coupling_eight_sites():
    s = sweep("TFIM", 8, [0.5], 4)
    assert len(s) == 1
    e0, _ = exact_ground(build_tfim(8, 1, 0.5))
    assert s.entries[0].result.final_energy <= e0 + 1e-2 * abs(e0)


def test_sweep_order_independent_seeding():
    cfg = OptimizerConfig(max_iters=20, seed=9)
    full = sweep("XXZ", 4, [-1.5, -0.5], 1, cfg)
    alone = sweep("XXZ", 4, [-0.5], 1, cfg)
    assert full.entries[1].seed == run_seed(9, 1)
    assert alone.entries[0].seed == run_seed(9, 0)
    # same coupling at the same index reproduces bit for bit
    again = sweep("XXZ", 4, [-1.5, -0.5], 1, cfg)
    assert np.array_equal(full.entries[1].result.theta_opt, again.entries[1].result.theta_opt)


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_sweep_flags_divergent_runs_and_continues():
    seen = []
    s = sweep("XXZ", 3, [-0.5, 1e308, -1.5], 1, OptimizerConfig(max_iters=20), on_entry=seen.append)
    assert [e.ok for e in s] == [True, False, True]
    assert [e.index for e in s.failures] == [1]
    assert "non-finite" in s.failures[0].error
    assert len(seen) == 3
