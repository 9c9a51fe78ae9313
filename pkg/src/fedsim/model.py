"""Two-block dense classifier with a splittable parameter layout.

The network is `inputs -> tanh(x W1 + b1) -> softmax(h W2 + b2)`. The first
affine layer plus nonlinearity form the *feature block*, the second affine
layer plus softmax the *classifier block*. The two blocks can be detached,
trained on different machines and recombined, which is what the offloading
strategies in the engine rely on.

Checkpoint binary layout (little endian):

    bytes 0..3    magic ``b"PMC1"``
    bytes 4..7    uint32 format version (currently 1)
    bytes 8..39   four int64 header fields: input_dim, hidden_dim,
                  num_classes, seed
    bytes 40..    float64 parameter payload, in order:
                  W1 row-major (input_dim x hidden_dim), b1 (hidden_dim),
                  W2 row-major (hidden_dim x num_classes), b2 (num_classes)

All arithmetic is float64.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_MAGIC = b"PMC1"
_VERSION = 1
_HEADER = struct.Struct("<4sIqqqq")

# Floor applied inside log() so an exactly-zero predicted probability cannot
# produce -inf loss.
LOG_EPS = 1e-12


class ShapeError(ValueError):
    """Raised when array dimensions do not line up."""


@dataclass
class Batch:
    """A mini-batch of training data.

    Attributes:
        inputs: float array of shape (batch, input_dim).
        labels: int array of shape (batch,) with values in [0, num_classes).
    """

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        if self.inputs.ndim != 2:
            raise ShapeError(f"batch inputs must be 2-D, got shape {self.inputs.shape}")
        if self.labels.ndim != 1:
            raise ShapeError(f"batch labels must be 1-D, got shape {self.labels.shape}")
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ShapeError(
                f"batch size mismatch: {self.inputs.shape[0]} inputs vs "
                f"{self.labels.shape[0]} labels"
            )
        if self.inputs.shape[0] < 1:
            raise ShapeError("batch must contain at least one sample")


@dataclass
class FeatureBlock:
    weights: np.ndarray  # (input_dim, hidden_dim)
    bias: np.ndarray  # (hidden_dim,)


@dataclass
class ClassifierBlock:
    weights: np.ndarray  # (hidden_dim, num_classes)
    bias: np.ndarray  # (num_classes,)


@dataclass
class PartitionedModel:
    """Dense two-block classifier parameters."""

    feature_weights: np.ndarray
    feature_bias: np.ndarray
    classifier_weights: np.ndarray
    classifier_bias: np.ndarray
    num_classes: int

    @property
    def input_dim(self) -> int:
        return self.feature_weights.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.feature_weights.shape[1]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (
            self.feature_weights,
            self.feature_bias,
            self.classifier_weights,
            self.classifier_bias,
        )

    def copy(self) -> "PartitionedModel":
        return PartitionedModel(
            self.feature_weights.copy(),
            self.feature_bias.copy(),
            self.classifier_weights.copy(),
            self.classifier_bias.copy(),
            self.num_classes,
        )


@dataclass
class Gradients:
    """Per-block gradients. Feature gradients are None in frozen mode."""

    feature_weights: np.ndarray | None
    feature_bias: np.ndarray | None
    classifier_weights: np.ndarray
    classifier_bias: np.ndarray


def init_model(input_dim: int, hidden_dim: int, num_classes: int, seed: int) -> PartitionedModel:
    """Create a model with uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] init.

    Biases use the same interval as their layer's weights.
    """
    if input_dim < 1 or hidden_dim < 1 or num_classes < 2:
        raise ValueError(
            f"invalid dimensions: input_dim={input_dim} hidden_dim={hidden_dim} "
            f"num_classes={num_classes}"
        )
    rng = np.random.default_rng(seed)
    bound1 = 1.0 / np.sqrt(input_dim)
    bound2 = 1.0 / np.sqrt(hidden_dim)
    return PartitionedModel(
        feature_weights=rng.uniform(-bound1, bound1, size=(input_dim, hidden_dim)),
        feature_bias=rng.uniform(-bound1, bound1, size=hidden_dim),
        classifier_weights=rng.uniform(-bound2, bound2, size=(hidden_dim, num_classes)),
        classifier_bias=rng.uniform(-bound2, bound2, size=num_classes),
        num_classes=num_classes,
    )


def _check_batch(model: PartitionedModel, batch: Batch) -> None:
    if batch.inputs.shape[1] != model.input_dim:
        raise ShapeError(
            f"batch input_dim {batch.inputs.shape[1]} does not match model "
            f"input_dim {model.input_dim}"
        )
    if batch.labels.min() < 0 or batch.labels.max() >= model.num_classes:
        raise ValueError(
            f"labels must lie in [0, {model.num_classes}), got range "
            f"[{batch.labels.min()}, {batch.labels.max()}]"
        )


def forward(model: PartitionedModel, batch: Batch) -> tuple[np.ndarray, np.ndarray]:
    """Run the network and return (hidden activations, class probabilities)."""
    _check_batch(model, batch)
    hidden = np.tanh(batch.inputs @ model.feature_weights + model.feature_bias)
    logits = hidden @ model.classifier_weights + model.classifier_bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    return hidden, probs


def cross_entropy(
    probs: np.ndarray,
    labels: np.ndarray,
    proximal: tuple[float, PartitionedModel, PartitionedModel] | None = None,
) -> float:
    """Mean negative log likelihood, optionally plus a proximal penalty.

    Args:
        probs: (batch, num_classes) probabilities from forward().
        labels: (batch,) int class indices.
        proximal: optional (mu, anchor_model, current_model); adds
            (mu / 2) * squared l2 distance between the two parameter sets.
    """
    picked = probs[np.arange(labels.shape[0]), labels]
    loss = float(-np.mean(np.log(np.maximum(picked, LOG_EPS))))
    if proximal is not None:
        mu, anchor, current = proximal
        sq = 0.0
        for a, c in zip(anchor.arrays(), current.arrays()):
            diff = c - a
            sq += float(np.sum(diff * diff))
        loss += 0.5 * mu * sq
    return loss


def _classifier_grads(
    hidden: np.ndarray, probs: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    batch = labels.shape[0]
    dlogits = probs.copy()
    dlogits[np.arange(batch), labels] -= 1.0
    dlogits /= batch
    return hidden.T @ dlogits, dlogits.sum(axis=0), dlogits


def backward_full(model: PartitionedModel, batch: Batch) -> Gradients:
    """Gradients of the mean cross entropy for every parameter."""
    hidden, probs = forward(model, batch)
    d_w2, d_b2, dlogits = _classifier_grads(hidden, probs, batch.labels)
    dhidden = dlogits @ model.classifier_weights.T
    dpre = dhidden * (1.0 - hidden * hidden)
    return Gradients(
        feature_weights=batch.inputs.T @ dpre,
        feature_bias=dpre.sum(axis=0),
        classifier_weights=d_w2,
        classifier_bias=d_b2,
    )


def backward_frozen(model: PartitionedModel, batch: Batch) -> Gradients:
    """Classifier gradients only; the feature block is treated as constant."""
    hidden, probs = forward(model, batch)
    d_w2, d_b2, _ = _classifier_grads(hidden, probs, batch.labels)
    return Gradients(
        feature_weights=None,
        feature_bias=None,
        classifier_weights=d_w2,
        classifier_bias=d_b2,
    )


def sgd_step(model: PartitionedModel, grads: Gradients, lr: float) -> PartitionedModel:
    """Return a new model moved one SGD step along the given gradients.

    Blocks without gradients are carried over unchanged.
    """
    present = [
        g
        for g in (
            grads.feature_weights,
            grads.feature_bias,
            grads.classifier_weights,
            grads.classifier_bias,
        )
        if g is not None
    ]
    for g in present:
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient values")
    if grads.feature_weights is None:
        fw = model.feature_weights.copy()
        fb = model.feature_bias.copy()
    else:
        fw = model.feature_weights - lr * grads.feature_weights
        fb = model.feature_bias - lr * grads.feature_bias
    return PartitionedModel(
        feature_weights=fw,
        feature_bias=fb,
        classifier_weights=model.classifier_weights - lr * grads.classifier_weights,
        classifier_bias=model.classifier_bias - lr * grads.classifier_bias,
        num_classes=model.num_classes,
    )


def split(model: PartitionedModel) -> tuple[FeatureBlock, ClassifierBlock]:
    """Detach the two blocks as independent copies."""
    return (
        FeatureBlock(model.feature_weights.copy(), model.feature_bias.copy()),
        ClassifierBlock(model.classifier_weights.copy(), model.classifier_bias.copy()),
    )


def merge(feature: FeatureBlock, classifier: ClassifierBlock) -> PartitionedModel:
    """Recombine two blocks into a model; inverse of split()."""
    if feature.weights.shape[1] != classifier.weights.shape[0]:
        raise ShapeError(
            f"hidden dim mismatch: feature block has {feature.weights.shape[1]}, "
            f"classifier block expects {classifier.weights.shape[0]}"
        )
    return PartitionedModel(
        feature_weights=feature.weights.copy(),
        feature_bias=feature.bias.copy(),
        classifier_weights=classifier.weights.copy(),
        classifier_bias=classifier.bias.copy(),
        num_classes=classifier.weights.shape[1],
    )


def save_checkpoint(model: PartitionedModel, path: str | Path, seed: int = 0) -> None:
    """Write the binary checkpoint format documented in the module docstring."""
    header = _HEADER.pack(
        _MAGIC, _VERSION, model.input_dim, model.hidden_dim, model.num_classes, seed
    )
    flat = np.concatenate([a.ravel() for a in model.arrays()]).astype("<f8")
    Path(path).write_bytes(header + flat.tobytes())


def load_checkpoint(path: str | Path) -> tuple[PartitionedModel, int]:
    """Read a checkpoint written by save_checkpoint; returns (model, seed)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"checkpoint truncated: {len(raw)} bytes")
    magic, version, input_dim, hidden_dim, num_classes, seed = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"bad checkpoint magic {magic!r}")
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    counts = [
        input_dim * hidden_dim,
        hidden_dim,
        hidden_dim * num_classes,
        num_classes,
    ]
    flat = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if flat.shape[0] != sum(counts):
        raise ValueError(
            f"checkpoint payload has {flat.shape[0]} floats, expected {sum(counts)}"
        )
    parts = np.split(flat.astype(np.float64), np.cumsum(counts)[:-1])
    model = PartitionedModel(
        feature_weights=parts[0].reshape(input_dim, hidden_dim),
        feature_bias=parts[1],
        classifier_weights=parts[2].reshape(hidden_dim, num_classes),
        classifier_bias=parts[3],
        num_classes=num_classes,
    )
    return model, seed


def debug_dump(model: PartitionedModel, seed: int = 0) -> str:
    """JSON rendering of the full parameter set, for eyeballing checkpoints."""
    return json.dumps(
        {
            "input_dim": model.input_dim,
            "hidden_dim": model.hidden_dim,
            "num_classes": model.num_classes,
            "seed": seed,
            "feature_weights": model.feature_weights.tolist(),
            "feature_bias": model.feature_bias.tolist(),
            "classifier_weights": model.classifier_weights.tolist(),
            "classifier_bias": model.classifier_bias.tolist(),
        },
        indent=2,
        sort_keys=True,
    )
