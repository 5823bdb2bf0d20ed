"""Variational quantum classifier on top of :mod:`qsafeml.circuit`.

Features are angle-encoded (``RY(pi * x_j)`` on qubit ``j``), followed by
``n_layers`` of trainable ``RY`` rotations on every qubit and a linear CNOT
chain.  Basis state ``b`` is read out as class ``b mod n_classes``.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .circuit import Circuit, finite_difference, parameter_shift, run_batch
from .errors import EmptyDataset, LabelOutOfRange, NonFiniteLoss, TooManyFeatures
from .states import StateVector

PROB_FLOOR = 1e-12
BINNING_RULES = ("mod",)
GRADIENT_MODES = ("finite_difference", "parameter_shift")


@dataclass(frozen=True)
class VqcModel:
    n_qubits: int
    n_layers: int
    n_classes: int
    params: np.ndarray
    class_binning: str = "mod"
    seed: int = None
    loss_history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        params = np.array(self.params, dtype=float).reshape(-1)
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if not 2 <= self.n_classes <= 2 ** self.n_qubits:
            raise ValueError(f"n_classes must be in [2, 2**n_qubits], got {self.n_classes}")
        if params.size != self.n_layers * self.n_qubits:
            raise ValueError(
                f"expected {self.n_layers * self.n_qubits} params, got {params.size}"
            )
        if self.class_binning not in BINNING_RULES:
            raise ValueError(f"unknown class_binning {self.class_binning!r}")
        params.setflags(write=False)
        object.__setattr__(self, "params", params)

    @classmethod
    def init(cls, n_qubits, n_layers, n_classes, seed=0, scale=0.1):
        """Small random initial angles drawn from ``N(0, scale^2)``."""
        rng = np.random.default_rng(seed)
        params = rng.normal(0.0, scale, size=n_layers * n_qubits)
        return cls(n_qubits, n_layers, n_classes, params, seed=seed)

    @property
    def dim(self):
        return 2 ** self.n_qubits

    def binning_matrix(self):
        """``(dim, n_classes)`` 0/1 matrix summing basis probabilities into classes."""
        m = np.zeros((self.dim, self.n_classes))
        m[np.arange(self.dim), np.arange(self.dim) % self.n_classes] = 1.0
        return m


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    seed: int = 42
    gradient_mode: str = "finite_difference"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.gradient_mode not in GRADIENT_MODES:
            raise ValueError(f"gradient_mode must be one of {GRADIENT_MODES}")


def encode(features, n_qubits=None) -> Circuit:
    """Angle-encoding circuit: ``RY(pi * x_j)`` on qubit ``j``."""
    x = np.asarray(features, dtype=float).reshape(-1)
    n = x.size if n_qubits is None else n_qubits
    if x.size > n:
        raise TooManyFeatures(f"{x.size} features do not fit on {n} qubits")
    circuit = Circuit(max(n, 1))
    for j, v in enumerate(x):
        circuit.ry(j, np.pi * v)
    return circuit


def ansatz(model: VqcModel, params=None) -> Circuit:
    theta = model.params if params is None else np.asarray(params, dtype=float)
    n = model.n_qubits
    circuit = Circuit(n)
    for layer in range(model.n_layers):
        for q in range(n):
            circuit.ry(q, theta[layer * n + q])
        for q in range(n - 1):
            circuit.cnot(q, q + 1)
    return circuit


def _encoded_states(features, n_qubits):
    """Product states ``RY(pi x)|0>`` for a batch, built without gate calls."""
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] > n_qubits:
        raise TooManyFeatures(f"{x.shape[1]} features do not fit on {n_qubits} qubits")
    states = np.ones((x.shape[0], 1), dtype=complex)
    for q in range(n_qubits):
        if q < x.shape[1]:
            half = np.pi * x[:, q] / 2
            qubit = np.stack([np.cos(half), np.sin(half)], axis=1)
        else:
            qubit = np.tile([1.0, 0.0], (x.shape[0], 1))
        states = np.einsum("bi,bj->bij", states, qubit).reshape(x.shape[0], -1)
    return states


def forward(model: VqcModel, features, params=None):
    """Output statevectors for a batch of feature rows, shape ``(batch, dim)``."""
    return run_batch(ansatz(model, params), _encoded_states(features, model.n_qubits))


def class_probabilities(model, states):
    probs = np.abs(states) ** 2 @ model.binning_matrix()
    return probs / probs.sum(axis=-1, keepdims=True)


def predict_proba(model: VqcModel, features):
    """Class probabilities and raw output state for one feature vector."""
    out = forward(model, np.asarray(features, dtype=float).reshape(1, -1))[0]
    return class_probabilities(model, out[None, :])[0], StateVector(out)


def predict_batch(model, features):
    """``(probs, states)`` for a batch; ``probs`` is ``(batch, n_classes)``."""
    states = forward(model, features)
    return class_probabilities(model, states), states


def _xy(dataset):
    x = np.asarray(dataset.features, dtype=float)
    y = np.asarray(dataset.labels, dtype=int)
    if x.shape[0] == 0:
        raise EmptyDataset("dataset has no samples")
    return x, y


def _check_labels(model, y):
    if np.any(y < 0) or np.any(y >= model.n_classes):
        raise LabelOutOfRange(f"labels must lie in [0, {model.n_classes})")


def _loss_at(model, x, y, params):
    probs = class_probabilities(model, forward(model, x, params))
    picked = np.maximum(probs[np.arange(y.size), y], PROB_FLOOR)
    return float(-np.mean(np.log(picked)))


def loss(model: VqcModel, dataset) -> float:
    """Mean cross-entropy of the true-class probability (floored at 1e-12)."""
    x, y = _xy(dataset)
    _check_labels(model, y)
    value = _loss_at(model, x, y, model.params)
    if not np.isfinite(value):
        raise NonFiniteLoss(f"loss is {value!r}")
    return value


def gradient(model: VqcModel, dataset, mode="finite_difference", step=1e-5):
    """Gradient of :func:`loss` with respect to ``model.params``.

    ``parameter_shift`` differentiates the class-probability vector with the
    shift rule and chain-rules through the cross-entropy; ``finite_difference``
    differentiates the loss directly with the fourth-order central stencil.
    """
    x, y = _xy(dataset)
    _check_labels(model, y)
    if mode == "finite_difference":
        return finite_difference(lambda p: _loss_at(model, x, y, p), model.params, step, order=4)
    if mode != "parameter_shift":
        raise ValueError(f"unknown gradient mode {mode!r}")

    rows = np.arange(y.size)

    def true_class_probs(p):
        return class_probabilities(model, forward(model, x, p))[rows, y]

    picked = true_class_probs(model.params)
    dprobs = parameter_shift(true_class_probs, model.params)  # (n_params, batch)
    live = picked > PROB_FLOOR
    weights = np.where(live, -1.0 / np.where(live, picked, 1.0), 0.0)
    return dprobs @ weights / y.size


def train(model: VqcModel, dataset, cfg: TrainConfig) -> VqcModel:
    """Full-batch gradient descent; the returned model records its loss history."""
    x, y = _xy(dataset)
    _check_labels(model, y)
    params = np.array(model.params)
    history = []
    current = model
    for _ in range(cfg.epochs):
        current = replace(model, params=params)
        value = _loss_at(current, x, y, params)
        if not np.isfinite(value):
            raise NonFiniteLoss(f"loss became {value!r} after {len(history)} epochs")
        history.append(value)
        params = params - cfg.learning_rate * gradient(current, dataset, cfg.gradient_mode)
    final = replace(model, params=params)
    history.append(_loss_at(final, x, y, params))
    return replace(final, seed=model.seed, loss_history=tuple(history))


def accuracy(model, dataset) -> float:
    x, y = _xy(dataset)
    probs, _ = predict_batch(model, x)
    return float(np.mean(np.argmax(probs, axis=1) == y))


def save_model(model: VqcModel, path, extra=None):
    doc = {
        "format": "qsafeml-vqc",
        "version": 1,
        "n_qubits": model.n_qubits,
        "n_layers": model.n_layers,
        "n_classes": model.n_classes,
        "class_binning": model.class_binning,
        "params": [float(p) for p in model.params],
        "seed": model.seed,
        "loss_history": [float(v) for v in model.loss_history],
    }
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_model(path):
    """Return ``(model, document)``; the document carries any extra keys."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "qsafeml-vqc":
        raise ValueError(f"{path} is not a qsafeml model checkpoint")
    model = VqcModel(
        n_qubits=doc["n_qubits"],
        n_layers=doc["n_layers"],
        n_classes=doc["n_classes"],
        params=doc["params"],
        class_binning=doc.get("class_binning", "mod"),
        seed=doc.get("seed"),
        loss_history=tuple(doc.get("loss_history", ())),
    )
    return model, doc
