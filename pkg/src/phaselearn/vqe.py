"""Variational ground-state search and coupling sweeps."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Sequence

import numpy as np

from phaselearn.ansatz import CheckerboardAnsatz, build_checkerboard, energy_and_gradient
from phaselearn.errors import DivergenceError
from phaselearn.hamiltonian import Hamiltonian, build_model

log = logging.getLogger(__name__)

INIT_STD = 0.1
_MASK64 = (1 << 64) - 1


class Optimizer(str, enum.Enum):
    ADAM = "adam"
    GD = "gd"


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.05
    max_iters: int = 500
    grad_tolerance: float = 1e-4
    seed: int = 0
    optimizer: Optimizer = Optimizer.ADAM
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))


@dataclass
class VqeResult:
    theta_opt: np.ndarray
    final_energy: float
    energy_history: np.ndarray
    converged: bool
    iterations_used: int


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, x: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class GradientDescent:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, x: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return x - self.lr * grad


def _make_optimizer(cfg: OptimizerConfig):
    if cfg.optimizer is Optimizer.ADAM:
        return Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    return GradientDescent(cfg.learning_rate)


def initial_parameters(n_params: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).normal(0.0, INIT_STD, n_params)


def run_vqe(ansatz: CheckerboardAnsatz, ham: Hamiltonian, config: OptimizerConfig = OptimizerConfig(),
            theta0: np.ndarray | None = None) -> VqeResult:
    """Minimise the energy with parameter-shift gradients.

    Each iteration records ``E(theta)``, then stops if the gradient max-norm
    is within tolerance; otherwise it steps. The last iteration never steps,
    so ``theta_opt`` is always the point whose energy was recorded last.
    """
    theta = initial_parameters(ansatz.n_params, config.seed) if theta0 is None else np.array(theta0, float)
    opt = _make_optimizer(config)
    history = []
    converged = False
    for it in range(config.max_iters):
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(it, math.nan)
        e, grad = energy_and_gradient(ansatz, theta, ham)
        if not math.isfinite(e) or not np.all(np.isfinite(grad)):
            raise DivergenceError(it, e)
        history.append(e)
        if np.max(np.abs(grad)) <= config.grad_tolerance:
            converged = True
            break
        if it == config.max_iters - 1:
            break
        theta = opt.step(theta, grad)
    return VqeResult(theta, history[-1], np.array(history), converged, len(history))


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def run_seed(base_seed: int, index: int) -> int:
    """Per-coupling seed: ``base_seed XOR splitmix64(index)``."""
    return (base_seed ^ splitmix64(index)) & _MASK64


@dataclass
class SweepEntry:
    index: int
    coupling: float
    seed: int
    result: VqeResult | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None


@dataclass
class SweepSummary:
    entries: list[SweepEntry] = field(default_factory=list)

    @property
    def failures(self) -> list[SweepEntry]:
        return [e for e in self.entries if not e.ok]

    @property
    def n_converged(self) -> int:
        return sum(1 for e in self.entries if e.ok and e.result.converged)

    def __iter__(self) -> Iterator[SweepEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def iter_sweep(model: str, n: int, couplings: Sequence[float], depth: int, config: OptimizerConfig,
               *, periodic: bool = False) -> Iterator[SweepEntry]:
    """Yield one VQE run per coupling, in coupling-index order.

    Runs are independent and seeded by index, so the output does not depend on
    execution order. Each run parallelises internally over worker threads.
    """
    if len(couplings) == 0:
        raise ValueError("couplings must be non-empty")
    ansatz = build_checkerboard(n, depth)
    for i, c in enumerate(couplings):
        ham = build_model(model, n, float(c), periodic=periodic)
        seed = run_seed(config.seed, i)
        try:
            res = run_vqe(ansatz, ham, replace(config, seed=seed))
            yield SweepEntry(i, float(c), seed, res)
        except DivergenceError as exc:
            log.warning("VQE diverged for coupling %s: %s", c, exc)
            yield SweepEntry(i, float(c), seed, None, str(exc))


def sweep(model: str, n: int, couplings: Sequence[float], depth: int, config: OptimizerConfig = OptimizerConfig(),
          *, periodic: bool = False, on_entry: Callable[[SweepEntry], None] | None = None) -> SweepSummary:
    summary = SweepSummary()
    for entry in iter_sweep(model, n, couplings, depth, config, periodic=periodic):
        summary.entries.append(entry)
        if on_entry is not None:
            on_entry(entry)
    return summary
