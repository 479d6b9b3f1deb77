"""Thread-scaling benchmarks for the VQE and classifier workloads.

Each workload does a fixed amount of work (no convergence-based stopping), so
different thread counts run exactly the same arithmetic and only the work
partitioning changes. Timings are medians over repeats after one discarded
warm-up run. Benchmarks should be the only busy process on the machine.
"""

from __future__ import annotations

import csv
import io
import os
import statistics
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from phaselearn.ansatz import build_checkerboard
from phaselearn.dataset import assign_label, extract_features
from phaselearn.hamiltonian import build_model, build_tfim, exact_ground
from phaselearn.parallel import num_threads
from phaselearn.qcnn import TrainConfig, train_on_features
from phaselearn.statevector import MAX_QUBITS
from phaselearn.vqe import OptimizerConfig, run_vqe

WORKLOADS = ("VQE16", "QCNN", "TOTAL")
QCNN_MODEL_QUBITS = 6


@dataclass
class BenchResult:
    workload: str
    threads: int
    wall_time: float
    speedup_vs_1thread: float = 1.0
    value: float = float("nan")  # final energy or loss, for cross-thread comparison
    times: tuple[float, ...] = ()


def _median_time(fn, repeats: int):
    fn()  # warm-up, discarded
    times = []
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), tuple(times), out


def vqe_workload(n_qubits: int = 16, iters: int = 20, depth: int = 1, seed: int = 0):
    """Fixed-length VQE on TFIM(n, J=1, h=1); returns the result."""
    ansatz = build_checkerboard(n_qubits, depth)
    ham = build_tfim(n_qubits, 1.0, 1.0)
    ham.energy_tables()
    cfg = OptimizerConfig(max_iters=iters, grad_tolerance=0.0, seed=seed)
    return lambda: run_vqe(ansatz, ham, cfg)


def bench_vqe(threads: int, n_qubits: int = 16, iters: int = 20, *, depth: int = 1, repeats: int = 5,
              seed: int = 0) -> BenchResult:
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    if not 2 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must lie in [2, {MAX_QUBITS}], got {n_qubits}")
    work = vqe_workload(n_qubits, iters, depth, seed)
    with num_threads(threads):
        med, times, res = _median_time(work, repeats)
    return BenchResult("VQE16", threads, med, value=res.final_energy, times=times)


@lru_cache(maxsize=4)
def qcnn_features(dataset_size: int, n_qubits: int = QCNN_MODEL_QUBITS) -> tuple[np.ndarray, np.ndarray]:
    """Features of exact TFIM ground states on an even grid over ``h in [0.2, 1.8]``."""
    hs = np.linspace(0.2, 1.8, dataset_size)
    hs = hs[hs != 1.0]
    X = np.stack([extract_features(exact_ground(build_model("TFIM", n_qubits, h))[1], "TFIM") for h in hs])
    y = np.array([assign_label("TFIM", h) for h in hs])
    return X, y


def qcnn_workload(dataset_size: int = 200, epochs: int = 5, seed: int = 0):
    X, y = qcnn_features(dataset_size)
    cfg = TrainConfig(epochs=epochs, seed=seed)
    return lambda: train_on_features(X, y, X[:1], y[:1], cfg)[1]


def bench_qcnn(threads: int, dataset_size: int = 200, epochs: int = 5, *, repeats: int = 5, seed: int = 0) -> BenchResult:
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    work = qcnn_workload(dataset_size, epochs, seed)
    with num_threads(threads):
        med, times, report = _median_time(work, repeats)
    return BenchResult("QCNN", threads, med, value=report.loss_history[-1], times=times)


def with_speedups(results: Sequence[BenchResult]) -> list[BenchResult]:
    """Fill in ``speedup_vs_1thread`` per workload; every workload needs a 1-thread row."""
    base = {r.workload: r.wall_time for r in results if r.threads == 1}
    for r in results:
        if r.workload not in base:
            raise ValueError(f"no 1-thread baseline for workload {r.workload}")
        r.speedup_vs_1thread = 1.0 if r.threads == 1 else base[r.workload] / r.wall_time
    return list(results)


def add_totals(results: Sequence[BenchResult]) -> list[BenchResult]:
    """Append a TOTAL row (VQE16 + QCNN wall time) for each thread count that has both."""
    out = [r for r in results if r.workload != "TOTAL"]
    by = {(r.workload, r.threads): r for r in out}
    for t in sorted({r.threads for r in out}):
        if ("VQE16", t) in by and ("QCNN", t) in by:
            out.append(BenchResult("TOTAL", t, by["VQE16", t].wall_time + by["QCNN", t].wall_time))
    return out


def run_benchmarks(workload: str, threads: Sequence[int], *, n_qubits: int = 16, iters: int = 20, depth: int = 1,
                   dataset_size: int = 200, epochs: int = 5, repeats: int = 5, seed: int = 0) -> list[BenchResult]:
    workload = workload.lower()
    if workload not in ("vqe", "qcnn", "all"):
        raise ValueError(f"unknown workload {workload!r}")
    if 1 not in threads:
        raise ValueError("thread list must include 1 (the baseline)")
    results = []
    for t in threads:
        if workload in ("vqe", "all"):
            results.append(bench_vqe(t, n_qubits, iters, depth=depth, repeats=repeats, seed=seed))
        if workload in ("qcnn", "all"):
            results.append(bench_qcnn(t, dataset_size, epochs, repeats=repeats, seed=seed))
    if workload == "all":
        results = add_totals(results)
    order = {w: i for i, w in enumerate(WORKLOADS)}
    results.sort(key=lambda r: (order[r.workload], r.threads))
    return with_speedups(results)


def machine_info() -> dict:
    try:
        usable = len(os.sched_getaffinity(0))
    except AttributeError:
        usable = os.cpu_count() or 1
    return {
        "logical_cores": os.cpu_count() or 1,
        "usable_cores": usable,
        "timer_resolution": time.get_clock_info("perf_counter").resolution,
    }


def speedup_report(results: Sequence[BenchResult], *, header: dict | None = None) -> str:
    """CSV with ideal-line comparison; machine and workload details go in ``#`` comment lines."""
    results = with_speedups(results)
    buf = io.StringIO()
    for k, v in {**machine_info(), **(header or {})}.items():
        buf.write(f"# {k}: {v}\n")
    lin = [r for r in results if r.threads > 1 and r.speedup_vs_1thread < 0.9 * r.threads]
    if lin:
        buf.write("# below ideal linear scaling: " + ", ".join(f"{r.workload}@{r.threads}" for r in lin) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["workload", "threads", "wall_time", "speedup", "ideal_speedup", "efficiency"])
    for r in results:
        w.writerow([r.workload, r.threads, f"{r.wall_time:.6f}", f"{r.speedup_vs_1thread:.4f}", r.threads,
                    f"{r.speedup_vs_1thread / r.threads:.4f}"])
    return buf.getvalue()
