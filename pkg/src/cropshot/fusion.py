"""Inference-time disambiguation via object crops of the test image.

A test sample is first classified from its full-image feature. When that
prediction's confidence clears the threshold, the crops are ignored;
otherwise every candidate (the crops, plus the full image unless
configured off) competes and the single most confident prediction wins.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from cropshot.errors import ValidationError
from cropshot.probe import LinearHead, predict_proba

logger = logging.getLogger(__name__)

DEFAULT_CROP_LADDER = (0.2, 0.5, 0.8)


@dataclass(frozen=True)
class FusionConfig:
    threshold: float = 0.8
    crop_ladder: tuple[float, ...] = DEFAULT_CROP_LADDER
    # Whether the full image competes with the crops below threshold.
    include_original: bool = True

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValidationError(f"threshold must be in [0, 1], got {self.threshold}")
        if any(not 0.0 <= f <= 1.0 for f in self.crop_ladder):
            raise ValidationError(f"crop ladder values must be in [0, 1]: {self.crop_ladder}")

    def to_metadata(self) -> dict:
        return {
            "threshold": self.threshold,
            "crop_ladder": list(self.crop_ladder),
            "include_original": self.include_original,
        }


@dataclass(frozen=True)
class FusedPrediction:
    label: int
    confidence: float
    provenance: str          # "original" or "crop_<k>"
    full_confidence: float


def fused_predict(
    head: LinearHead,
    full_feature,
    crop_features,
    config: FusionConfig = FusionConfig(),
) -> FusedPrediction:
    """Predict one test sample from its full feature and crop features.

    With no crops available below threshold, the original prediction
    stands (logged rather than raised; a failed segmentation should not
    abort scoring).
    """
    p_full = predict_proba(head, np.asarray(full_feature, dtype=np.float64))
    full_label = int(np.argmax(p_full))
    full_conf = float(p_full[full_label])

    if full_conf >= config.threshold:
        return FusedPrediction(full_label, full_conf, "original", full_conf)

    candidates: list[tuple[float, int, str]] = []
    if config.include_original:
        candidates.append((full_conf, full_label, "original"))
    for k, feat in enumerate(crop_features):
        p = predict_proba(head, np.asarray(feat, dtype=np.float64))
        label = int(np.argmax(p))
        candidates.append((float(p[label]), label, f"crop_{k}"))
    if not candidates:
        logger.warning("no crop candidates below threshold; keeping original prediction")
        return FusedPrediction(full_label, full_conf, "original", full_conf)

    # Max confidence; earlier candidates win ties so the order
    # (original first, then crops by ladder index) is deterministic.
    best = max(candidates, key=lambda c: c[0])
    return FusedPrediction(best[1], best[0], best[2], full_conf)
