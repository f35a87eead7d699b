"""Axis-aligned bounding boxes and crop-augmentation planning.

All boxes use the half-open pixel convention [x_min, x_max) x
[y_min, y_max), so width == x_max - x_min with no off-by-one ambiguity.
Interpolated and padded crops are rounded *outward* (floor on mins, ceil
on maxes) so a planned crop always contains its source box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from cropshot.errors import EmptyMaskError, ValidationError

# Context fractions used by "multiple" mode: three crops covering 20%,
# 50% and 80% of the remaining context, kept alongside the original.
MULTIPLE_FRACTIONS = (0.2, 0.5, 0.8)

# "replace" trains on a single crop padded by 60 context pixels total
# (30 per side), discarding the original image.
REPLACE_CONTEXT_PIXELS = 60


@dataclass(frozen=True, order=True)
class BoundingBox:
    """Half-open pixel rectangle [x_min, x_max) x [y_min, y_max)."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise ValidationError(f"box coordinate {name}={v!r} is not an integer")
            object.__setattr__(self, name, int(v))
        if not (0 <= self.x_min < self.x_max):
            raise ValidationError(f"invalid box x-range: [{self.x_min}, {self.x_max})")
        if not (0 <= self.y_min < self.y_max):
            raise ValidationError(f"invalid box y-range: [{self.y_min}, {self.y_max})")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    def contains(self, other: "BoundingBox") -> bool:
        return (
            self.x_min <= other.x_min
            and self.y_min <= other.y_min
            and self.x_max >= other.x_max
            and self.y_max >= other.y_max
        )

    def contains_point(self, x: int, y: int) -> bool:
        return self.x_min <= x < self.x_max and self.y_min <= y < self.y_max

    def validate_within(self, width: int, height: int, context: str = "box") -> None:
        """Raise unless the box fits an image of the given dimensions."""
        if self.x_max > width or self.y_max > height:
            raise ValidationError(
                f"{context} {self.as_tuple()} exceeds image bounds {width}x{height}"
            )

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @classmethod
    def from_sequence(cls, seq) -> "BoundingBox":
        vals = list(seq)
        if len(vals) != 4:
            raise ValidationError(f"box needs 4 coordinates, got {len(vals)}")
        return cls(*vals)


def full_image_box(width: int, height: int) -> BoundingBox:
    return BoundingBox(0, 0, width, height)


def pad_box(box: BoundingBox, pad_per_side: float, width: int, height: int) -> BoundingBox:
    """Grow every edge outward by ``pad_per_side`` pixels, clamped to the image.

    Fractional pads round outward so the result still contains ``box``.
    """
    if pad_per_side < 0:
        raise ValidationError(f"pad_per_side must be >= 0, got {pad_per_side}")
    box.validate_within(width, height)
    return BoundingBox(
        max(0, math.floor(box.x_min - pad_per_side)),
        max(0, math.floor(box.y_min - pad_per_side)),
        min(width, math.ceil(box.x_max + pad_per_side)),
        min(height, math.ceil(box.y_max + pad_per_side)),
    )


def interpolate_context(
    box: BoundingBox, fraction: float, width: int, height: int
) -> BoundingBox:
    """Interpolate between the minimal crop (0) and the full image (1).

    Each corner moves linearly from the source box toward the image
    border; mins floor and maxes ceil so crops nest as the fraction
    grows and always contain the source box.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError(f"context fraction must be in [0, 1], got {fraction}")
    box.validate_within(width, height)
    return BoundingBox(
        math.floor((1.0 - fraction) * box.x_min),
        math.floor((1.0 - fraction) * box.y_min),
        math.ceil(box.x_max + fraction * (width - box.x_max)),
        math.ceil(box.y_max + fraction * (height - box.y_max)),
    )


def mask_to_box(mask: np.ndarray) -> BoundingBox:
    """Tightest half-open box around the true pixels of a (H, W) mask."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValidationError(f"mask must be 2-D (H, W), got shape {mask.shape}")
    ys, xs = np.nonzero(mask)
    if len(ys) == 0:
        raise EmptyMaskError("mask has no true pixels")
    return BoundingBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)


@dataclass(frozen=True)
class AugmentMode:
    """One crop-augmentation recipe.

    kind: "replace" | "minimal" | "pad_px" | "context_pct" | "multiple".
    pad_px carries the total added context in ``pixels`` (split evenly
    per side); context_pct carries the interpolation ``fraction``.
    """

    kind: str
    pixels: int | None = None
    fraction: float | None = None

    KINDS = ("replace", "minimal", "pad_px", "context_pct", "multiple")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown augment mode {self.kind!r}")
        if self.kind == "pad_px":
            if self.pixels is None or self.pixels < 0:
                raise ValidationError(f"pad_px needs pixels >= 0, got {self.pixels}")
        elif self.kind == "context_pct":
            if self.fraction is None or not 0.0 <= self.fraction <= 1.0:
                raise ValidationError(
                    f"context_pct needs fraction in [0, 1], got {self.fraction}"
                )
        elif self.pixels is not None or self.fraction is not None:
            raise ValidationError(f"mode {self.kind!r} takes no parameter")

    @classmethod
    def parse(cls, text: str) -> "AugmentMode":
        """Parse "minimal", "pad_px:60", "context_pct:0.5", etc."""
        parts = text.split(":")
        kind = parts[0]
        if kind in ("replace", "minimal", "multiple"):
            if len(parts) != 1:
                raise ValidationError(f"mode {kind!r} takes no parameter: {text!r}")
            return cls(kind)
        if kind == "pad_px":
            if len(parts) != 2:
                raise ValidationError(f"pad_px needs a pixel count: {text!r}")
            return cls(kind, pixels=int(parts[1]))
        if kind == "context_pct":
            if len(parts) != 2:
                raise ValidationError(f"context_pct needs a fraction: {text!r}")
            return cls(kind, fraction=float(parts[1]))
        raise ValidationError(f"unknown augment mode {text!r}")

    def __str__(self):
        if self.kind == "pad_px":
            return f"pad_px:{self.pixels}"
        if self.kind == "context_pct":
            return f"context_pct:{self.fraction:g}"
        return self.kind


# "gt" methods default to a fixed 60-pixel context window (30 per side).
GT_DEFAULT_MODE = AugmentMode("pad_px", pixels=60)


@dataclass(frozen=True)
class AugmentPlan:
    """Crops one augmentation mode produces for one image."""

    mode: AugmentMode
    crops: tuple[BoundingBox, ...]
    keep_original: bool = field(default=True)

    def __post_init__(self):
        if self.keep_original == (self.mode.kind == "replace"):
            raise ValidationError("keep_original must be False exactly for replace mode")


def plan_augments(
    mode: AugmentMode, source_box: BoundingBox, width: int, height: int
) -> AugmentPlan:
    """Plan the crop rectangles for one image under one augmentation mode.

    Crops that clamp to identical rectangles are deduplicated, as is any
    crop equal to the full image when the original is kept (the original
    full-image feature already covers it).
    """
    source_box.validate_within(width, height, "source box")
    if mode.kind == "replace":
        crops = [pad_box(source_box, REPLACE_CONTEXT_PIXELS / 2, width, height)]
    elif mode.kind == "minimal":
        crops = [source_box]
    elif mode.kind == "pad_px":
        crops = [pad_box(source_box, mode.pixels / 2, width, height)]
    elif mode.kind == "context_pct":
        crops = [interpolate_context(source_box, mode.fraction, width, height)]
    else:  # multiple
        crops = [
            interpolate_context(source_box, f, width, height) for f in MULTIPLE_FRACTIONS
        ]
    keep_original = mode.kind != "replace"

    full = full_image_box(width, height)
    deduped: list[BoundingBox] = []
    for crop in crops:
        if keep_original and crop == full:
            continue
        if crop not in deduped:
            deduped.append(crop)
    return AugmentPlan(mode=mode, crops=tuple(deduped), keep_original=keep_original)
