"""Hybrid convolutional/quantum phase classifier, written directly in numpy.

Forward pass for a feature vector of length ``L``::

    conv1d(30 channels, kernel L) -> ReLU -> maxpool(1) -> fc1 -> ReLU -> fc2 (3)
    -> quantum layer (7) -> [fc -> quantum layer] * extra_stacks
    -> dropout -> fc3 (1) -> sigmoid

The quantum layer runs H then ``RY(x_q + theta_q)`` on each of three qubits
and returns the probabilities of the basis states ``000 .. 110``; ``111`` is
dropped. Its Jacobian comes from the parameter-shift rule.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from phaselearn.dataset import augment_all, record_features, record_labels, split
from phaselearn.errors import ShapeError
from phaselearn.parallel import get_num_threads, run_tasks, split_range
from phaselearn.statevector import RY, Circuit, H, _template_probabilities

FORMAT_VERSION = 1
N_CHANNELS = 30
Q_QUBITS = 3
Q_OUTPUTS = 7
SHIFT = math.pi / 2
P_CLAMP = 1e-12


def _quantum_template():
    ops = [H(q) for q in range(Q_QUBITS)] + [RY(q, 0.0) for q in range(Q_QUBITS)]
    kinds, q0, q1, _ = Circuit(Q_QUBITS, ops).encode()
    slots = np.array([-1] * Q_QUBITS + list(range(Q_QUBITS)), dtype=np.int64)
    return kinds, q0, q1, slots


_TEMPLATE = _quantum_template()


def quantum_probabilities(phi: np.ndarray) -> np.ndarray:
    """All 8 basis probabilities for each row of angles ``phi`` (shape ``(B, 3)``)."""
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    out = np.empty((phi.shape[0], 1 << Q_QUBITS))
    kinds, q0, q1, slots = _TEMPLATE
    args = [(Q_QUBITS, kinds, q0, q1, slots, phi, out, lo, hi) for lo, hi in split_range(phi.shape[0], get_num_threads())]
    run_tasks(_template_probabilities, args)
    return out


def quantum_layer_forward(x, thetas) -> np.ndarray:
    """Seven outcome probabilities for one input: angles ``x + thetas``."""
    phi = np.asarray(x, dtype=np.float64) + np.asarray(thetas, dtype=np.float64)
    if phi.shape != (Q_QUBITS,):
        raise ShapeError(f"quantum layer takes {Q_QUBITS} angles, got shape {phi.shape}")
    return quantum_probabilities(phi[None, :])[0, :Q_OUTPUTS]


def quantum_layer_jacobian(phi: np.ndarray) -> np.ndarray:
    """``dP_k / dphi_q`` for each row, shape ``(B, 7, 3)``, by parameter shift."""
    b = phi.shape[0]
    shifted = np.repeat(phi[:, None, :], 2 * Q_QUBITS, axis=1)
    for q in range(Q_QUBITS):
        shifted[:, q, q] += SHIFT
        shifted[:, Q_QUBITS + q, q] -= SHIFT
    probs = quantum_probabilities(shifted.reshape(-1, Q_QUBITS)).reshape(b, 2 * Q_QUBITS, -1)[:, :, :Q_OUTPUTS]
    jac = (probs[:, :Q_QUBITS] - probs[:, Q_QUBITS:]) / 2.0
    return jac.transpose(0, 2, 1)


# ---------------------------------------------------------------- model


@dataclass
class QcnnModel:
    feature_length: int
    hidden: int = 16
    dropout_p: float = 0.5
    extra_stacks: int = 0
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must lie in [0, 1), got {self.dropout_p}")
        if self.feature_length < 1 or self.hidden < 1 or self.extra_stacks < 0:
            raise ValueError("feature_length and hidden must be >= 1, extra_stacks >= 0")
        shapes = param_shapes(self.feature_length, self.hidden, self.extra_stacks)
        if not self.params:
            self.params = {k: np.zeros(s) for k, s in shapes.items()}
        if list(self.params) != list(shapes):
            raise ShapeError(f"parameter names {list(self.params)} do not match {list(shapes)}")
        for k, s in shapes.items():
            self.params[k] = np.asarray(self.params[k], dtype=np.float64)
            if self.params[k].shape != s:
                raise ShapeError(f"{k}: expected shape {s}, got {self.params[k].shape}")
            if not np.all(np.isfinite(self.params[k])):
                raise ValueError(f"{k} contains non-finite values")

    def copy(self) -> "QcnnModel":
        return QcnnModel(self.feature_length, self.hidden, self.dropout_p, self.extra_stacks,
                         {k: v.copy() for k, v in self.params.items()})

    @property
    def n_params(self) -> int:
        return sum(v.size for v in self.params.values())


def param_shapes(feature_length: int, hidden: int, extra_stacks: int = 0) -> dict[str, tuple]:
    shapes = {
        "conv_w": (N_CHANNELS, feature_length),
        "conv_b": (N_CHANNELS,),
        "fc1_w": (hidden, N_CHANNELS),
        "fc1_b": (hidden,),
        "fc2_w": (Q_QUBITS, hidden),
        "fc2_b": (Q_QUBITS,),
        "q_theta": (Q_QUBITS,),
    }
    for s in range(extra_stacks):
        shapes[f"stack{s}_w"] = (Q_QUBITS, Q_OUTPUTS)
        shapes[f"stack{s}_b"] = (Q_QUBITS,)
        shapes[f"stack{s}_theta"] = (Q_QUBITS,)
    shapes["fc3_w"] = (Q_OUTPUTS,)
    shapes["fc3_b"] = (1,)
    return shapes


def init_model(feature_length: int, *, hidden: int = 16, dropout_p: float = 0.5, extra_stacks: int = 0,
               rng: np.random.Generator) -> QcnnModel:
    """Uniform ``+-1/sqrt(fan_in)`` weights and biases; quantum angles start at 0."""
    params = {}
    for k, s in param_shapes(feature_length, hidden, extra_stacks).items():
        if k == "q_theta" or k.endswith("_theta"):
            params[k] = np.zeros(s)
            continue
        fan_in = {"conv": feature_length, "fc1": N_CHANNELS, "fc2": hidden}.get(k.split("_")[0], Q_OUTPUTS)
        bound = 1.0 / math.sqrt(fan_in)
        params[k] = rng.uniform(-bound, bound, s)
    return QcnnModel(feature_length, hidden, dropout_p, extra_stacks, params)


def dropout_mask(rng: np.random.Generator, batch: int, p: float) -> np.ndarray:
    """Inverted-dropout mask: kept units are scaled by ``1 / (1 - p)``."""
    if p == 0.0:
        return np.ones((batch, Q_OUTPUTS))
    return (rng.random((batch, Q_OUTPUTS)) >= p) / (1.0 - p)


def forward(model: QcnnModel, features: np.ndarray, training: bool = False, rng: np.random.Generator | None = None,
            *, mask: np.ndarray | None = None):
    """Batch forward pass; returns ``(probabilities, cache)``.

    ``features`` is ``(B, L)`` or a single ``(L,)`` vector. In training mode a
    dropout mask is drawn from ``rng`` unless one is passed explicitly.
    """
    X = np.asarray(features, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.feature_length:
        raise ShapeError(f"model expects {model.feature_length} features, got {X.shape[1]}")
    p = model.params
    z1 = X @ p["conv_w"].T + p["conv_b"]
    a1 = np.maximum(z1, 0.0)
    # max-pool with kernel 1 over a length-1 output is the identity
    z2 = a1 @ p["fc1_w"].T + p["fc1_b"]
    a2 = np.maximum(z2, 0.0)
    z3 = a2 @ p["fc2_w"].T + p["fc2_b"]
    phis = [z3 + p["q_theta"]]
    q = quantum_probabilities(phis[0])[:, :Q_OUTPUTS]
    qs = [q]
    for s in range(model.extra_stacks):
        phis.append(q @ p[f"stack{s}_w"].T + p[f"stack{s}_b"] + p[f"stack{s}_theta"])
        q = quantum_probabilities(phis[-1])[:, :Q_OUTPUTS]
        qs.append(q)
    if training:
        if mask is None:
            if rng is None:
                raise ValueError("training mode needs an rng or an explicit dropout mask")
            mask = dropout_mask(rng, X.shape[0], model.dropout_p)
    else:
        mask = np.ones_like(q)
    d = q * mask
    z4 = d @ p["fc3_w"] + p["fc3_b"][0]
    prob = expit(z4)
    cache = {"X": X, "z1": z1, "a1": a1, "z2": z2, "a2": a2, "phis": phis, "qs": qs, "mask": mask, "d": d, "prob": prob}
    return (prob[0] if single else prob), cache


def predict(model: QcnnModel, features: np.ndarray) -> np.ndarray:
    return forward(model, np.atleast_2d(features), training=False)[0]


def loss(prediction, label):
    """Binary cross-entropy with the prediction clamped to ``[1e-12, 1 - 1e-12]``."""
    p = np.clip(np.asarray(prediction, dtype=np.float64), P_CLAMP, 1.0 - P_CLAMP)
    y = np.asarray(label, dtype=np.float64)
    out = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(out) if out.ndim == 0 else out


def batch_loss(model: QcnnModel, X: np.ndarray, y: np.ndarray, *, training: bool = False,
               mask: np.ndarray | None = None) -> float:
    prob, _ = forward(model, X, training, mask=mask)
    return float(np.mean(loss(prob, y)))


def backward(model: QcnnModel, cache: dict, y: np.ndarray, upstream: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Gradients of the mean batch loss for every parameter.

    ``upstream`` overrides ``dL/dz`` at the sigmoid input (per sample, already
    divided by the batch size); by default it is the cross-entropy gradient.
    """
    p = model.params
    prob = cache["prob"]
    b = prob.shape[0]
    if upstream is None:
        y = np.asarray(y, dtype=np.float64)
        inside = (prob > P_CLAMP) & (prob < 1.0 - P_CLAMP)
        upstream = np.where(inside, prob - y, 0.0) / b
    g = {}
    g["fc3_w"] = cache["d"].T @ upstream
    g["fc3_b"] = np.array([upstream.sum()])
    dq = np.outer(upstream, p["fc3_w"]) * cache["mask"]
    for s in reversed(range(model.extra_stacks)):
        dphi = np.einsum("bk,bkq->bq", dq, quantum_layer_jacobian(cache["phis"][s + 1]))
        g[f"stack{s}_theta"] = dphi.sum(axis=0)
        g[f"stack{s}_w"] = dphi.T @ cache["qs"][s]
        g[f"stack{s}_b"] = dphi.sum(axis=0)
        dq = dphi @ p[f"stack{s}_w"]
    dphi = np.einsum("bk,bkq->bq", dq, quantum_layer_jacobian(cache["phis"][0]))
    g["q_theta"] = dphi.sum(axis=0)
    g["fc2_w"] = dphi.T @ cache["a2"]
    g["fc2_b"] = dphi.sum(axis=0)
    dz2 = (dphi @ p["fc2_w"]) * (cache["z2"] > 0)
    g["fc1_w"] = dz2.T @ cache["a1"]
    g["fc1_b"] = dz2.sum(axis=0)
    dz1 = (dz2 @ p["fc1_w"]) * (cache["z1"] > 0)
    g["conv_w"] = dz1.T @ cache["X"]
    g["conv_b"] = dz1.sum(axis=0)
    return {k: g[k] for k in p}


# ---------------------------------------------------------------- training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-3
    batch_size: int = 16
    split_fraction: float = 0.8
    threshold: float = 0.5
    seed: int = 0
    hidden: int = 16
    dropout_p: float = 0.5
    extra_stacks: int = 0
    augment: bool = False
    n_rotations: int = 3
    probabilities: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


@dataclass
class TrainReport:
    loss_history: list[float]
    train_accuracy_history: list[float]
    test_accuracy: float
    confusion: list[list[int]]
    train_size: int
    test_size: int
    raw_train_size: int

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class EvalResult:
    accuracy: float
    confusion: list[list[int]]
    probabilities: np.ndarray


class AdamState:
    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for k in params:
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * grads[k]
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * grads[k] ** 2
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def confusion_matrix(y_true, y_pred) -> list[list[int]]:
    """``[[TN, FP], [FN, TP]]``."""
    cm = [[0, 0], [0, 0]]
    for t, p in zip(y_true, y_pred):
        cm[int(t)][int(p)] += 1
    return cm


def evaluate(model: QcnnModel, features: np.ndarray, labels, threshold: float = 0.5) -> EvalResult:
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("cannot evaluate on an empty set")
    prob = predict(model, X)
    pred = (prob > threshold).astype(np.int64)
    return EvalResult(float(np.mean(pred == y)), confusion_matrix(y, pred), prob)


def train_on_features(X_train: np.ndarray, y_train: np.ndarray, X_test: np.ndarray, y_test: np.ndarray,
                      config: TrainConfig = TrainConfig(), *, raw_train_size: int | None = None) -> tuple[QcnnModel, TrainReport]:
    """Minibatch Adam on precomputed features, then a thresholded test evaluation."""
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    if len(set(y_train.tolist())) < 2:
        raise ValueError("training data must contain both labels")
    rng = np.random.default_rng(config.seed)
    model = init_model(X_train.shape[1], hidden=config.hidden, dropout_p=config.dropout_p,
                       extra_stacks=config.extra_stacks, rng=rng)
    opt = AdamState(model.params, config.learning_rate)
    n = X_train.shape[0]
    losses, accs = [], []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo: lo + config.batch_size]
            prob, cache = forward(model, X_train[idx], training=True, rng=rng)
            total += float(np.sum(loss(prob, y_train[idx])))
            opt.step(model.params, backward(model, cache, y_train[idx]))
        losses.append(total / n)
        accs.append(evaluate(model, X_train, y_train, config.threshold).accuracy)
    if len(y_test) == 0:
        raise ValueError("test split is empty")
    res = evaluate(model, X_test, y_test, config.threshold)
    report = TrainReport(losses, accs, res.accuracy, res.confusion, n, len(y_test),
                         n if raw_train_size is None else raw_train_size)
    return model, report


def train(records: Sequence, config: TrainConfig = TrainConfig()) -> tuple[QcnnModel, TrainReport]:
    """Split records, optionally augment the training half, extract features and train.

    Augmentation never touches the test half, so no symmetry copy of a test
    state can leak into training.
    """
    if len({r.label for r in records}) < 2:
        raise ValueError("dataset must contain both labels")
    train_recs, test_recs = split(records, config.split_fraction, config.seed)
    raw = len(train_recs)
    if config.augment:
        train_recs = augment_all(train_recs, n_rotations=config.n_rotations)
    X_train = record_features(train_recs, probabilities=config.probabilities)
    X_test = record_features(test_recs, probabilities=config.probabilities) if test_recs else np.zeros((0, X_train.shape[1]))
    return train_on_features(X_train, record_labels(train_recs), X_test, record_labels(test_recs), config,
                             raw_train_size=raw)


# ---------------------------------------------------------------- curves


def phase_curve(couplings, probabilities) -> list[tuple[float, float]]:
    """``(coupling, probability)`` pairs sorted by coupling."""
    pairs = sorted(zip((float(c) for c in couplings), (float(p) for p in probabilities)))
    return pairs


def crossing_point(curve: Sequence[tuple[float, float]], level: float = 0.5) -> float | None:
    """First coupling where the curve rises above ``level``, linearly interpolated.

    ``None`` when no pair of neighbouring points straddles the level.
    """
    for (c0, p0), (c1, p1) in zip(curve, curve[1:]):
        if p0 <= level < p1:
            return c0 + (level - p0) * (c1 - c0) / (p1 - p0)
    return None


# ---------------------------------------------------------------- files


def save_checkpoint(model: QcnnModel, path: str | Path, *, meta: dict | None = None) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "feature_length": model.feature_length,
        "hidden": model.hidden,
        "dropout_p": model.dropout_p,
        "extra_stacks": model.extra_stacks,
        "meta": meta or {},
        "params": {k: v.tolist() for k, v in model.params.items()},
    }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[QcnnModel, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {doc.get('format_version')!r}")
    model = QcnnModel(int(doc["feature_length"]), int(doc["hidden"]), float(doc["dropout_p"]),
                      int(doc["extra_stacks"]), {k: np.array(v, dtype=np.float64) for k, v in doc["params"].items()})
    return model, doc.get("meta", {})


def metrics_csv(report: TrainReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "train_loss", "train_acc"])
    for e, (l, a) in enumerate(zip(report.loss_history, report.train_accuracy_history), start=1):
        w.writerow([e, repr(l), repr(a)])
    return buf.getvalue()


def curve_csv(curve: Sequence[tuple[float, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["coupling", "probability"])
    for c, p in curve:
        w.writerow([repr(c), repr(p)])
    return buf.getvalue()
