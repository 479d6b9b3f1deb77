"""Labelled ground-state datasets.

Records store only the ansatz descriptor and its parameters; states are
rebuilt on demand by running the circuit, then any symmetry tags are applied
as extra gate layers.

Augmentation tags, applied left to right after the ansatz circuit:

* ``flip``: ``X`` on every qubit;
* ``reflect``: qubit order reversal ``q -> n-1-q`` (swaps built from CNOTs);
* ``rz:<phi>``: ``RZ(phi)`` on every qubit, XXZ only.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from phaselearn import __version__
from phaselearn.ansatz import SCHEME, ansatz_from_descriptor, build_checkerboard, prepare_state
from phaselearn.errors import BoundaryError, RecordError, ShapeError
from phaselearn.hamiltonian import Hamiltonian, build_model, energy
from phaselearn.statevector import CNOT, RZ, Circuit, GateOp, StateVector, X, _pauli_expect, apply_circuit, basis_probabilities, pauli_masks
from phaselearn.vqe import OptimizerConfig, SweepEntry, iter_sweep

log = logging.getLogger(__name__)

MODELS = ("TFIM", "XXZ")
WINDOWS = {"TFIM": (0.2, 1.8), "XXZ": (-1.8, -0.2)}
BOUNDARIES = {"TFIM": 1.0, "XXZ": -1.0}
RECORD_KEYS = {"model", "n", "coupling", "ansatz", "theta", "label", "seed", "augmentation"}
GENERATOR = f"phaselearn {__version__}"


def normalize_model(model: str) -> str:
    m = str(model).upper()
    if m not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    return m


def assign_label(model: str, coupling: float) -> int:
    """Phase label: 1 for the paramagnetic TFIM phase (``h > 1``) or the planar XXZ phase (``|Jz| < 1``)."""
    model = normalize_model(model)
    c = float(coupling)
    if not math.isfinite(c):
        raise ValueError(f"coupling must be finite, got {coupling}")
    if model == "TFIM":
        if c == 1.0:
            raise BoundaryError("h = 1 lies on the TFIM phase boundary")
        return int(c > 1.0)
    if abs(c) == 1.0:
        raise BoundaryError("|Jz| = 1 lies on the XXZ phase boundary")
    return int(abs(c) < 1.0)


@dataclass(frozen=True)
class SampleRecord:
    model: str
    n_qubits: int
    coupling: float
    ansatz: dict
    theta: tuple[float, ...]
    label: int
    seed: int
    augmentation: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "model", normalize_model(self.model))
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        object.__setattr__(self, "augmentation", tuple(self.augmentation))
        if not math.isfinite(self.coupling):
            raise ValueError(f"coupling must be finite, got {self.coupling}")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if int(self.ansatz["n"]) != self.n_qubits:
            raise ShapeError(f"ansatz on {self.ansatz['n']} qubits, record on {self.n_qubits}")
        n_params = ansatz_from_descriptor(self.ansatz).n_params
        if len(self.theta) != n_params:
            raise ShapeError(f"expected {n_params} parameters, got {len(self.theta)}")
        for tag in self.augmentation:
            _tag_ops(tag, self.n_qubits, self.model)

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "n": self.n_qubits,
            "coupling": self.coupling,
            "ansatz": {"n": int(self.ansatz["n"]), "depth": int(self.ansatz["depth"]),
                       "scheme": self.ansatz.get("scheme", SCHEME)},
            "theta": list(self.theta),
            "label": self.label,
            "seed": self.seed,
            "augmentation": list(self.augmentation) or None,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SampleRecord":
        if set(doc) != RECORD_KEYS:
            raise ValueError(f"record keys {sorted(doc)} differ from {sorted(RECORD_KEYS)}")
        return cls(
            model=doc["model"],
            n_qubits=int(doc["n"]),
            coupling=float(doc["coupling"]),
            ansatz=dict(doc["ansatz"]),
            theta=tuple(doc["theta"]),
            label=int(doc["label"]),
            seed=int(doc["seed"]),
            augmentation=tuple(doc["augmentation"] or ()),
        )

    def hamiltonian(self) -> Hamiltonian:
        return build_model(self.model, self.n_qubits, self.coupling)


# ---------------------------------------------------------------- augmentation


def _reflection_ops(n: int) -> list[GateOp]:
    ops = []
    for i in range(n // 2):
        j = n - 1 - i
        ops += [CNOT(i, j), CNOT(j, i), CNOT(i, j)]
    return ops


def _tag_ops(tag: str, n: int, model: str) -> list[GateOp]:
    if tag == "flip":
        return [X(q) for q in range(n)]
    if tag == "reflect":
        return _reflection_ops(n)
    if tag.startswith("rz:"):
        if model != "XXZ":
            raise ValueError(f"global Z rotation is not a {model} symmetry")
        phi = float(tag[3:])
        return [RZ(q, phi) for q in range(n)]
    raise ValueError(f"unknown augmentation tag {tag!r}")


def rz_tag(phi: float) -> str:
    return f"rz:{phi!r}"


def augment(record: SampleRecord, *, n_rotations: int = 3, rng: np.random.Generator | None = None) -> list[SampleRecord]:
    """Symmetry-transformed copies of ``record`` (the record itself is not included).

    Both models get a global spin flip and a reflection; XXZ also gets
    ``n_rotations`` global Z rotations with angles uniform in ``[0, 2 pi)``.
    New tags are appended to the record's existing ones.
    """
    if rng is None:
        rng = np.random.default_rng([record.seed, len(record.augmentation)])
    tags = ["flip", "reflect"]
    if record.model == "XXZ":
        tags += [rz_tag(float(phi)) for phi in rng.uniform(0.0, 2 * math.pi, n_rotations)]
    return [_with_tags(record, record.augmentation + (t,)) for t in tags]


def _with_tags(record: SampleRecord, tags: tuple[str, ...]) -> SampleRecord:
    return SampleRecord(record.model, record.n_qubits, record.coupling, record.ansatz, record.theta,
                        record.label, record.seed, tags)


def augment_all(records: Iterable[SampleRecord], *, n_rotations: int = 3) -> list[SampleRecord]:
    """Each record followed by its augmented variants."""
    out = []
    for r in records:
        out.append(r)
        out.extend(augment(r, n_rotations=n_rotations))
    return out


def reconstruct_state(record: SampleRecord) -> StateVector:
    state = prepare_state(ansatz_from_descriptor(record.ansatz), np.array(record.theta))
    ops = [op for tag in record.augmentation for op in _tag_ops(tag, record.n_qubits, record.model)]
    if ops:
        apply_circuit(state, Circuit(record.n_qubits, ops), inplace=True)
    return state


def record_energy(record: SampleRecord) -> float:
    return energy(record.hamiltonian(), reconstruct_state(record))


# ---------------------------------------------------------------- features


@lru_cache(maxsize=None)
def feature_labels(model: str, n: int) -> tuple[str, ...]:
    """Pauli strings behind each feature entry, in layout order.

    TFIM: ``X_i``, ``Z_i``, ``Z_i Z_i+1`` (length ``3n - 1``).
    XXZ: ``Z_i``, ``Z_i Z_i+1``, ``X_i X_i+1``, ``Y_i Y_i+1`` (length ``4n - 3``).
    """
    model = normalize_model(model)

    def site(p):
        return ["I" * q + p + "I" * (n - q - 1) for q in range(n)]

    def bond(p):
        return ["I" * q + p + p + "I" * (n - q - 2) for q in range(n - 1)]

    if model == "TFIM":
        return tuple(site("X") + site("Z") + bond("Z"))
    return tuple(site("Z") + bond("Z") + bond("X") + bond("Y"))


def feature_length(model: str, n: int, *, probabilities: bool = False) -> int:
    return 1 << n if probabilities else len(feature_labels(model, n))


def extract_features(state: StateVector, model: str, *, probabilities: bool = False) -> np.ndarray:
    """Local and nearest-neighbour Pauli expectations, or the basis probabilities."""
    if probabilities:
        return basis_probabilities(state).copy()
    labels = feature_labels(model, state.n_qubits)
    return np.array([_pauli_expect(state.amplitudes, *pauli_masks(p)).real for p in labels])


def record_features(records: Sequence[SampleRecord], *, probabilities: bool = False) -> np.ndarray:
    if not records:
        raise ValueError("no records")
    return np.stack([extract_features(reconstruct_state(r), r.model, probabilities=probabilities) for r in records])


def record_labels(records: Sequence[SampleRecord]) -> np.ndarray:
    return np.array([r.label for r in records], dtype=np.int64)


# ---------------------------------------------------------------- files


def write_jsonl(records: Iterable[SampleRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json()) + "\n")


def read_jsonl(path: str | Path) -> list[SampleRecord]:
    """Parse a dataset file; any bad line raises ``RecordError`` with its line number."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(SampleRecord.from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise RecordError(path, i, str(exc)) from exc
    return out


def manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest.json")


# ---------------------------------------------------------------- generation


def coupling_grid(model: str, count: int, window: tuple[float, float] | None = None) -> tuple[np.ndarray, list[float]]:
    """Evenly spaced couplings over the window, minus any grid point on the boundary.

    Returns ``(grid, dropped)``. With the default symmetric windows an even
    ``count`` never touches the boundary.
    """
    model = normalize_model(model)
    if count < 2:
        raise ValueError(f"count must be >= 2, got {count}")
    lo, hi = WINDOWS[model] if window is None else window
    if not lo < hi:
        raise ValueError(f"window must satisfy lo < hi, got ({lo}, {hi})")
    grid = np.linspace(lo, hi, count)
    b = BOUNDARIES[model]
    on_boundary = np.abs(np.abs(grid) - abs(b)) <= 1e-12
    return grid[~on_boundary], [float(c) for c in grid[on_boundary]]


@dataclass
class GenerationSummary:
    path: Path
    manifest: Path
    n_records: int
    n_converged: int
    label_counts: tuple[int, int]
    exclusions: list[dict] = field(default_factory=list)

    @property
    def failure_rate(self) -> float:
        attempted = self.n_records + sum(1 for e in self.exclusions if e["reason"] != "boundary")
        return 0.0 if attempted == 0 else (attempted - self.n_records) / attempted


def generate_dataset(model: str, n: int, count: int, depth: int, seed: int, path: str | Path, *,
                     window: tuple[float, float] | None = None, config: OptimizerConfig | None = None,
                     on_record: Callable[[SweepEntry], None] | None = None) -> GenerationSummary:
    """Run a VQE sweep and stream one JSONL record per successful coupling.

    Records are written in coupling order and flushed one by one. Divergent
    runs are skipped and listed in the sidecar manifest.
    """
    model = normalize_model(model)
    grid, dropped = coupling_grid(model, count, window)
    config = OptimizerConfig(seed=seed) if config is None else config
    if config.seed != seed:
        raise ValueError("config.seed and seed disagree")
    path = Path(path)
    desc = build_checkerboard(n, depth).descriptor()
    exclusions = [{"coupling": c, "reason": "boundary"} for c in dropped]
    n_records = n_converged = 0
    counts = [0, 0]
    with open(path, "w", encoding="utf-8") as fh:
        for entry in iter_sweep(model, n, grid, depth, config):
            if on_record is not None:
                on_record(entry)
            if not entry.ok:
                exclusions.append({"index": entry.index, "coupling": entry.coupling, "seed": entry.seed,
                                   "reason": entry.error})
                continue
            label = assign_label(model, entry.coupling)
            rec = SampleRecord(model, n, entry.coupling, desc, tuple(entry.result.theta_opt), label, entry.seed)
            fh.write(json.dumps(rec.to_json()) + "\n")
            fh.flush()
            n_records += 1
            n_converged += entry.result.converged
            counts[label] += 1
    lo, hi = WINDOWS[model] if window is None else window
    manifest = {
        "generator": GENERATOR,
        "model": model,
        "n": n,
        "depth": depth,
        "count": count,
        "window": [float(lo), float(hi)],
        "grid": [float(c) for c in grid],
        "seed": seed,
        "optimizer": {
            "name": config.optimizer.value,
            "learning_rate": config.learning_rate,
            "max_iters": config.max_iters,
            "grad_tolerance": config.grad_tolerance,
        },
        "records": n_records,
        "converged": n_converged,
        "label_counts": counts,
        "exclusions": exclusions,
    }
    mpath = manifest_path(path)
    mpath.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return GenerationSummary(path, mpath, n_records, n_converged, (counts[0], counts[1]), exclusions)


# ---------------------------------------------------------------- splitting


def split(records: Sequence, fraction: float = 0.8, seed: int = 0) -> tuple[list, list]:
    """Shuffle with ``seed`` and cut into train/test.

    The test size is ``floor(N * (1 - fraction))``, so any remainder goes to
    training (5 records at 0.8 give 4/1).
    """
    if len(records) == 0:
        raise ValueError("cannot split an empty dataset")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    n = len(records)
    # rounding guards against 100 * 0.2 = 20.000000000000004 style artefacts
    n_test = math.floor(round(n * (1.0 - fraction), 9))
    order = np.random.default_rng(seed).permutation(n)
    train = [records[i] for i in order[: n - n_test]]
    test = [records[i] for i in order[n - n_test:]]
    return train, test
