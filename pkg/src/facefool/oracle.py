"""Classifier oracles.

Attacks talk to any :class:`Oracle`: a classifier that answers `classify`
with a normalized per-class confidence vector and counts every query it
serves. The built-in oracle is a multinomial softmax regression over
normalized flattened pixels; it is fully differentiable, so it also
exposes the white-box input gradient the FGSM attack needs. Remote
classifiers join through the wire-protocol client in :mod:`facefool.wire`.
"""

from __future__ import annotations

import math
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import DatasetError, ModelError, OracleError
from .image import GrayscaleImage

# Fixed input normalization: intensity v enters the model as v / 255.
PIXEL_SCALE = 255.0

MODEL_FILE_MAGIC = "facefool-softmax 1"


@dataclass(frozen=True)
class ClassProbabilities:
    """Normalized per-class confidences; argmax ties break to the lowest index."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError("empty probability vector")
        for v in self.values:
            if not math.isfinite(v) or not (0.0 <= v <= 1.0):
                raise ValueError(f"probability {v!r} outside [0, 1]")
        total = math.fsum(self.values)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {total!r}, not 1")

    def argmax(self) -> int:
        return self.values.index(max(self.values))

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> float:
        return self.values[i]


class Oracle(ABC):
    """A classifier reachable through `classify`; every query is counted."""

    def __init__(self):
        self._queries = 0
        self._query_lock = threading.Lock()

    num_classes: int
    input_width: int
    input_height: int
    class_names: tuple[str, ...]

    @property
    def queries(self) -> int:
        """Number of classify calls issued so far."""
        return self._queries

    @property
    def descriptor(self) -> str:
        return type(self).__name__

    def classify(self, image: GrayscaleImage) -> ClassProbabilities:
        """Confidence vector for one image. Pure with respect to the image."""
        if (image.width, image.height) != (self.input_width, self.input_height):
            raise OracleError(
                f"image is {image.width}x{image.height}, oracle expects "
                f"{self.input_width}x{self.input_height}"
            )
        with self._query_lock:
            self._queries += 1
        return self._predict(image)

    @abstractmethod
    def _predict(self, image: GrayscaleImage) -> ClassProbabilities:
        ...


@dataclass(frozen=True)
class TrainConfig:
    """Full-batch gradient-descent settings for the built-in model.

    The default step size is small enough that the regularized loss
    descends monotonically on desk-scale data; larger steps still converge
    but overshoot early.
    """

    epochs: int = 500
    learning_rate: float = 0.01
    l2_penalty: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ModelError(f"epochs must be >= 1, got {self.epochs}")
        if not (self.learning_rate > 0):
            raise ModelError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.l2_penalty < 0:
            raise ModelError(f"l2 penalty must be >= 0, got {self.l2_penalty}")


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class SoftmaxModel(Oracle):
    """Multinomial softmax regression over flattened, v/255-normalized pixels.

    Immutable after construction: `classify` and `loss_input_gradient` are
    pure, so the model is safe to share across threads.
    """

    def __init__(
        self,
        weights: np.ndarray,
        biases: np.ndarray,
        input_width: int,
        input_height: int,
        class_names: tuple[str, ...],
    ):
        super().__init__()
        weights = np.asarray(weights, dtype=np.float64)
        biases = np.asarray(biases, dtype=np.float64)
        if weights.ndim != 2 or biases.ndim != 1:
            raise ModelError("weights must be 2-D and biases 1-D")
        num_classes = weights.shape[0]
        if biases.shape[0] != num_classes:
            raise ModelError(
                f"{num_classes} weight rows but {biases.shape[0]} biases"
            )
        if weights.shape[1] != input_width * input_height:
            raise ModelError(
                f"weight columns {weights.shape[1]} != "
                f"{input_width}x{input_height} pixels"
            )
        if len(class_names) != num_classes:
            raise ModelError(f"{len(class_names)} names for {num_classes} classes")
        if not (np.isfinite(weights).all() and np.isfinite(biases).all()):
            raise ModelError("weights and biases must be finite")
        self.weights = weights
        self.biases = biases
        self.input_width = input_width
        self.input_height = input_height
        self.class_names = tuple(class_names)
        self.num_classes = num_classes
        self.loss_history: tuple[float, ...] = ()
        self.weights.setflags(write=False)
        self.biases.setflags(write=False)

    @property
    def descriptor(self) -> str:
        return (
            f"builtin-softmax/{self.num_classes}c"
            f"/{self.input_width}x{self.input_height}"
        )

    def _features(self, image: GrayscaleImage) -> np.ndarray:
        return image.to_array().astype(np.float64).ravel() / PIXEL_SCALE

    def _probabilities(self, x: np.ndarray) -> np.ndarray:
        return _softmax_rows(self.weights @ x + self.biases)

    def _predict(self, image: GrayscaleImage) -> ClassProbabilities:
        p = self._probabilities(self._features(image))
        return ClassProbabilities(tuple(float(v) for v in p))

    def loss_input_gradient(self, image: GrayscaleImage, true_label: int) -> np.ndarray:
        """Gradient of the cross-entropy loss w.r.t. the normalized input.

        Computed analytically as W^T (p - onehot(true_label)), reshaped to
        [height, width]. White-box access: does not count as an oracle query.
        """
        if not (0 <= true_label < self.num_classes):
            raise OracleError(f"label {true_label} outside [0, {self.num_classes})")
        p = self._probabilities(self._features(image))
        p[true_label] -= 1.0
        return (self.weights.T @ p).reshape(self.input_height, self.input_width)


def train_softmax(train: Dataset, cfg: TrainConfig) -> SoftmaxModel:
    """Fit the built-in model by full-batch gradient descent from zero init.

    Minimizes mean cross-entropy plus (l2/2)*||W||^2 (biases unpenalized).
    Deterministic: zero initialization and full batches leave nothing to
    chance, so identical inputs produce bit-identical models. The per-epoch
    loss (measured before each step) is kept on `model.loss_history`.
    """
    if not train.items:
        raise DatasetError("cannot train on an empty dataset")
    n = len(train.items)
    width, height = train.width, train.height
    dim = width * height
    num_classes = train.num_classes
    x = np.stack([
        item.image.to_array().astype(np.float64).ravel() / PIXEL_SCALE
        for item in train.items
    ])
    labels = np.array([item.label for item in train.items])
    onehot = np.zeros((n, num_classes))
    onehot[np.arange(n), labels] = 1.0

    w = np.zeros((num_classes, dim))
    b = np.zeros(num_classes)
    losses: list[float] = []
    for _ in range(cfg.epochs):
        probs = _softmax_rows(x @ w.T + b)
        ce = -np.log(np.clip(probs[np.arange(n), labels], 1e-300, None)).mean()
        losses.append(float(ce + 0.5 * cfg.l2_penalty * np.sum(w * w)))
        err = probs - onehot
        grad_w = err.T @ x / n + cfg.l2_penalty * w
        grad_b = err.mean(axis=0)
        w = w - cfg.learning_rate * grad_w
        b = b - cfg.learning_rate * grad_b

    model = SoftmaxModel(w, b, width, height, train.class_names)
    model.loss_history = tuple(losses)
    return model


def accuracy(oracle: Oracle, ds: Dataset) -> float:
    """Fraction of items whose top class matches the label."""
    if not ds.items:
        raise DatasetError("accuracy over an empty dataset is undefined")
    hits = sum(
        1 for item in ds.items if oracle.classify(item.image).argmax() == item.label
    )
    return hits / len(ds.items)


def save_model(model: SoftmaxModel, path: str | Path) -> None:
    """Write the flat-text dump: header, names, weight rows, then biases."""
    lines = [
        MODEL_FILE_MAGIC,
        f"{model.input_width} {model.input_height} {model.num_classes}",
    ]
    lines.extend(model.class_names)
    for row in model.weights:
        lines.append(" ".join(repr(float(v)) for v in row))
    lines.append(" ".join(repr(float(v)) for v in model.biases))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> SoftmaxModel:
    """Read a model written by :func:`save_model`."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as err:
        raise ModelError(f"cannot read model file {path}: {err}") from err
    if not lines or lines[0] != MODEL_FILE_MAGIC:
        raise ModelError(f"{path} is not a model file (missing header)")
    try:
        width, height, num_classes = map(int, lines[1].split())
        names = tuple(lines[2 : 2 + num_classes])
        rows = lines[2 + num_classes : 2 + 2 * num_classes]
        weights = np.array([[float(v) for v in row.split()] for row in rows])
        biases = np.array([float(v) for v in lines[2 + 2 * num_classes].split()])
    except (IndexError, ValueError) as err:
        raise ModelError(f"malformed model file {path}: {err}") from err
    if len(names) != num_classes or weights.shape != (num_classes, width * height):
        raise ModelError(f"model file {path} is internally inconsistent")
    return SoftmaxModel(weights, biases, width, height, names)
