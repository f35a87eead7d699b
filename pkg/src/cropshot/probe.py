"""Linear classification head on frozen embeddings.

Training is deterministic full-batch gradient descent from zero
initialization on a convex objective: weighted-mean softmax
cross-entropy plus an l2 penalty on the weight matrix. Zero init makes
the untrained head output exactly uniform probabilities, and per-sample
weights let callers down-weight augmented crops if desired.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from cropshot import kernels
from cropshot.errors import ValidationError


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    l2_weight: float = 1e-4
    normalize_features: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.l2_weight < 0:
            raise ValidationError(f"l2_weight must be >= 0, got {self.l2_weight}")

    def to_metadata(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "l2_weight": self.l2_weight,
            "normalize_features": self.normalize_features,
        }


@dataclass(frozen=True)
class LinearHead:
    """Softmax classifier: weights (ways x dim) and bias (ways)."""

    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise ValidationError(f"head shapes disagree: W {W.shape}, b {b.shape}")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ValidationError("head contains non-finite entries")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def ways(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def export_json(self, path: str | Path, class_labels: list[str] | None = None) -> None:
        doc = {"W": self.W.tolist(), "b": self.b.tolist()}
        if class_labels is not None:
            doc["classes"] = list(class_labels)
        Path(path).write_text(json.dumps(doc) + "\n")


@dataclass(frozen=True)
class TrainResult:
    head: LinearHead
    losses: np.ndarray = field(repr=False)  # epochs + 1 objective values


def normalize(x: np.ndarray) -> np.ndarray:
    """Scale a vector (or each row of a matrix) to unit Euclidean norm."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValidationError("cannot normalize a zero vector")
    return x / norms


def train_head(
    features,
    labels,
    n_classes: int,
    weights=None,
    config: TrainConfig = TrainConfig(),
) -> TrainResult:
    """Fit the linear head by full-batch gradient descent.

    Validates before any step: feature/label/weight lengths agree, labels
    cover every class in [0, n_classes), features are finite.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        X = np.stack([np.asarray(f, dtype=np.float64) for f in features])
    y = np.asarray(labels, dtype=np.int64)
    if weights is None:
        weights = np.ones(len(y), dtype=np.float64)
    w_arr = np.asarray(weights, dtype=np.float64)
    if not (len(X) == len(y) == len(w_arr)):
        raise ValidationError(
            f"length mismatch: {len(X)} features, {len(y)} labels, {len(w_arr)} weights"
        )
    if len(X) == 0:
        raise ValidationError("empty training set")
    if not np.all(np.isfinite(X)):
        raise ValidationError("training features contain NaN/Inf")
    if np.any(w_arr < 0) or w_arr.sum() <= 0:
        raise ValidationError("sample weights must be non-negative with positive sum")
    if y.min() < 0 or y.max() >= n_classes:
        raise ValidationError(f"labels outside [0, {n_classes})")
    present = np.unique(y)
    if len(present) != n_classes:
        missing = sorted(set(range(n_classes)) - set(present.tolist()))
        raise ValidationError(f"classes {missing} have no training samples")

    if config.normalize_features:
        X = normalize(X)
    W, b, losses = kernels.train_linear_head(
        X, y, w_arr, n_classes, config.learning_rate, config.epochs, config.l2_weight
    )
    return TrainResult(head=LinearHead(W=W, b=b), losses=losses)


def predict_proba(head: LinearHead, x) -> np.ndarray:
    """Class probabilities for one vector (dim,) or a batch (n, dim)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[-1] != head.dim:
        raise ValidationError(f"feature dim {X.shape[-1]} != head dim {head.dim}")
    Z = X @ head.W.T + head.b
    Z -= Z.max(axis=1, keepdims=True)
    expZ = np.exp(Z)
    P = expZ / expZ.sum(axis=1, keepdims=True)
    return P[0] if single else P


def predict(head: LinearHead, x) -> tuple[int, float]:
    """(argmax label, confidence); ties break to the lowest class index."""
    p = predict_proba(head, x)
    if p.ndim != 1:
        raise ValidationError("predict takes a single feature vector; use predict_proba for batches")
    label = int(np.argmax(p))
    return label, float(p[label])
