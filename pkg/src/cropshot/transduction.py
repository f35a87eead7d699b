"""Soft k-means pseudolabeling of the unlabeled query pool.

Clusters start at the class means of the labeled support features
(augmented crops included) and alternate soft assignment of the query
features with centroid updates until the largest centroid displacement
drops below tolerance. Support features keep weight 1 on their true
class in every update, anchoring clusters to the labels. The hard argmax
of the final assignments becomes the pseudolabels.

The assignment is a softmax over negative squared Euclidean distances
with inverse temperature beta; beta, the distance choice, and the
convergence rule are configuration (surfaced in run metadata), defaulted
for unit-normalized features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cropshot import kernels
from cropshot._kernels_py import softmax_neg_sqdist
from cropshot.errors import ValidationError


@dataclass(frozen=True)
class SoftKMeansConfig:
    beta: float = 5.0
    max_iters: int = 100
    tol: float = 1e-6

    def __post_init__(self):
        if self.beta <= 0:
            raise ValidationError(f"beta must be > 0, got {self.beta}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol <= 0:
            raise ValidationError(f"tol must be > 0, got {self.tol}")

    def to_metadata(self) -> dict:
        return {"beta": self.beta, "max_iters": self.max_iters, "tol": self.tol}


@dataclass(frozen=True)
class ClusterState:
    centroids: np.ndarray                       # (ways, dim)
    responsibilities: np.ndarray = field(repr=False)  # (n_query, ways) row-stochastic

    def __post_init__(self):
        r = np.asarray(self.responsibilities, dtype=np.float64)
        if np.any(r < 0) or (len(r) and np.abs(r.sum(axis=1) - 1.0).max() > 1e-9):
            raise ValidationError("responsibilities must be row-stochastic")


@dataclass(frozen=True)
class SoftKMeansResult:
    pseudolabels: np.ndarray  # (n_query,) int
    state: ClusterState
    iterations: int
    converged: bool


def init_centroids(class_features) -> np.ndarray:
    """Per-class arithmetic means of support (plus augment) features.

    ``class_features`` holds one (n_c, dim) array per class, either as a
    sequence indexed by class or as a mapping keyed by class index;
    every class must be non-empty.
    """
    if isinstance(class_features, dict):
        class_features = [class_features[c] for c in sorted(class_features)]
    centroids = []
    for c, feats in enumerate(class_features):
        F = np.asarray(feats, dtype=np.float64)
        if F.ndim != 2 or F.shape[0] == 0:
            raise ValidationError(f"class {c} has no support features")
        centroids.append(F.mean(axis=0))
    return np.stack(centroids)


def soft_assign(features, centroids, beta: float) -> np.ndarray:
    """Responsibilities r_ic proportional to exp(-beta * ||x_i - c_c||^2), rows normalized."""
    F = np.asarray(features, dtype=np.float64)
    C = np.asarray(centroids, dtype=np.float64)
    if F.shape[-1] != C.shape[-1]:
        raise ValidationError(f"feature dim {F.shape[-1]} != centroid dim {C.shape[-1]}")
    return softmax_neg_sqdist(F, C, beta)


def run_soft_kmeans(
    support_features,
    support_labels,
    query_features,
    n_classes: int,
    config: SoftKMeansConfig = SoftKMeansConfig(),
) -> SoftKMeansResult:
    """Pseudolabel the query features; ties break to the lowest class index.

    Hitting max_iters is not an error: the result carries converged=False.
    """
    S = np.asarray(support_features, dtype=np.float64)
    y = np.asarray(support_labels, dtype=np.int64)
    Q = np.asarray(query_features, dtype=np.float64)
    if len(S) != len(y):
        raise ValidationError(f"{len(S)} support features vs {len(y)} labels")
    if Q.ndim != 2 or Q.shape[0] == 0:
        raise ValidationError("query set must be a non-empty (n, dim) array")

    class_feats = [S[y == c] for c in range(n_classes)]
    centroids0 = init_centroids(class_feats)
    sums = np.stack([f.sum(axis=0) for f in class_feats])
    counts = np.array([len(f) for f in class_feats], dtype=np.float64)

    R, C, iterations, converged = kernels.soft_kmeans(
        sums, counts, Q, centroids0, config.beta, config.max_iters, config.tol
    )
    return SoftKMeansResult(
        pseudolabels=np.argmax(R, axis=1),
        state=ClusterState(centroids=C, responsibilities=R),
        iterations=iterations,
        converged=converged,
    )
