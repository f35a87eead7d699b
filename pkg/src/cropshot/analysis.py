"""Latent-space statistics: class variance, centroid shift, and 2-D PCA.

"Class variance" is scalarized as the mean squared Euclidean distance of
class members to their class centroid (the trace of the population
covariance), making it directly comparable to the centroid-shift curve.
The PCA basis is always fit on the uncropped reference features only;
cropped features are projected into that fixed frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cropshot.errors import ValidationError


@dataclass(frozen=True)
class VarianceCurve:
    fractions: tuple[float, ...]
    variance: tuple[float, ...]
    centroid_distance: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.fractions) == len(self.variance) == len(self.centroid_distance)):
            raise ValidationError("variance curve columns must have equal length")


@dataclass(frozen=True)
class PcaBasis:
    """Top-2 principal frame of the reference (uncropped) features."""

    mean: np.ndarray
    components: np.ndarray           # (2, dim), orthonormal rows
    explained_variance: np.ndarray   # (2,), descending

    def __post_init__(self):
        dim = np.asarray(self.mean).shape
        if len(dim) != 1:
            raise ValidationError(f"mean must be a vector, got shape {dim}")
        if np.asarray(self.components).shape != (2, dim[0]):
            raise ValidationError(
                f"components must have shape (2, {dim[0]}), "
                f"got {np.asarray(self.components).shape}"
            )
        if np.asarray(self.explained_variance).shape != (2,):
            raise ValidationError("explained_variance must have shape (2,)")


def _class_centroids(features_by_class: dict) -> dict:
    centroids = {}
    for label, feats in features_by_class.items():
        F = np.asarray(feats, dtype=np.float64)
        if F.ndim != 2 or F.shape[0] == 0:
            raise ValidationError(f"class {label!r} has no features")
        centroids[label] = F.mean(axis=0)
    return centroids


def class_variance(features_by_class: dict) -> float:
    """Mean over classes of mean squared distance to the class centroid."""
    per_class = []
    for label, feats in features_by_class.items():
        F = np.asarray(feats, dtype=np.float64)
        if F.ndim != 2 or F.shape[0] == 0:
            raise ValidationError(f"class {label!r} has no features")
        centroid = F.mean(axis=0)
        per_class.append(((F - centroid) ** 2).sum(axis=1).mean())
    if not per_class:
        raise ValidationError("no classes given")
    return float(np.mean(per_class))


def centroid_shift(features_by_class: dict, reference_centroids: dict) -> float:
    """Mean over classes of distance between current and reference centroids."""
    if set(features_by_class) != set(reference_centroids):
        raise ValidationError(
            f"class mismatch: {sorted(features_by_class)} vs {sorted(reference_centroids)}"
        )
    centroids = _class_centroids(features_by_class)
    dists = [
        np.linalg.norm(centroids[label] - np.asarray(reference_centroids[label], dtype=np.float64))
        for label in sorted(centroids)
    ]
    return float(np.mean(dists))


def reference_centroids(features_by_class: dict) -> dict:
    """Class centroids of the uncropped feature sets (the shift reference)."""
    return _class_centroids(features_by_class)


def pca_fit(reference_features, rank_tol: float = 1e-10) -> PcaBasis:
    """Top-2 eigenvectors of the population covariance of the reference set.

    Deterministic across platforms: symmetric eigendecomposition with each
    component's sign fixed so its largest-magnitude coordinate is positive.
    """
    X = np.asarray(reference_features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 3:
        raise ValidationError(f"PCA needs >= 3 samples, got shape {X.shape}")
    if X.shape[1] < 2:
        raise ValidationError(f"PCA needs dimension >= 2, got {X.shape[1]}")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = (centered.T @ centered) / X.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]

    scale = max(float(eigvals[0]), 0.0)
    rank = int(np.sum(eigvals > rank_tol * max(scale, 1.0)))
    if rank < 2:
        raise ValidationError(f"reference covariance has rank {rank}, need >= 2 for a 2-D basis")

    components = eigvecs[:, :2].T.copy()
    for i in range(2):
        j = int(np.argmax(np.abs(components[i])))
        if components[i, j] < 0:
            components[i] = -components[i]
    return PcaBasis(
        mean=mean,
        components=components,
        explained_variance=eigvals[:2].copy(),
    )


def pca_project(basis: PcaBasis, features) -> np.ndarray:
    """Project features into the 2-D frame after centering by the reference mean."""
    X = np.asarray(features, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != basis.mean.shape[0]:
        raise ValidationError(f"feature dim {X.shape[1]} != basis dim {basis.mean.shape[0]}")
    coords = (X - basis.mean) @ basis.components.T
    return coords[0] if single else coords
