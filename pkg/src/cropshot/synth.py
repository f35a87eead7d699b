"""Synthetic feature oracle with a controllable context knob.

Generative model for the embedding of image i of class c cropped at
context fraction t (0 = tightest object crop, 1 = full image):

    x(c, i, t) = f_c + t * (m + h_c + g_i) + eps(c, i, t)

where f_c is the fixed class signal, m a shared background mean, h_c a
fixed class-conditional context vector, g_i the per-image background
(reused across the t sweep of one image, because cropping removes
context from the *same* picture), and eps fresh sensor noise per
(image, t). Scale parameters are expected vector norms: coordinates are
drawn with std scale/sqrt(dim).

Consequences the pipeline tests lean on: class variance grows
monotonically in t when the background spread is positive, and class
centroids at fraction t sit (1 - t) * ||m + h_c|| away from the
uncropped centroids in expectation.

Synthetic images carry a context margin of exactly CONTEXT_MARGIN
pixels on every side of the ground-truth box, so the fraction a planned
crop retains is recovered exactly from its rectangle and generation
agrees bit-for-bit with what the geometry pipeline requests.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from cropshot.boxes import BoundingBox, interpolate_context, pad_box
from cropshot.errors import ValidationError
from cropshot.featurestore import FULL, FeatureStore, canonical_key, key_for_crop
from cropshot.manifest import DatasetManifest, ImageRecord

CONTEXT_MARGIN = 300

# Sub-stream tags for seeding; fixed so draws are independent of call order.
_TAG_BACKGROUND_MEAN = 0
_TAG_CLASS_SIGNAL = 1
_TAG_CLASS_CONTEXT = 2
_TAG_IMAGE_BACKGROUND = 3
_TAG_NOISE = 4
_TAG_GEOMETRY = 5

# Crop fractions covered by default in generated stores: the analysis
# grid, the multi-crop ladder, and the 60 / 150 pixel pad windows.
DEFAULT_FRACTIONS = tuple(sorted({i / 10 for i in range(11)} | {0.2, 0.5, 0.8}))
DEFAULT_PADS = (30.0, 75.0)


@dataclass(frozen=True)
class SynthConfig:
    classes: int = 5
    dim: int = 64
    foreground_scale: float = 1.0      # ||f||
    background_mean_scale: float = 0.5  # ||m||
    background_spread: float = 2.0     # per-image background norm scale
    class_context_scale: float = 0.3   # class-conditional context norm scale
    noise_scale: float = 0.05          # sensor noise norm scale
    seed: int = 0

    def __post_init__(self):
        if self.classes < 2:
            raise ValidationError(f"need >= 2 classes, got {self.classes}")
        if self.dim < 2:
            raise ValidationError(f"need dim >= 2, got {self.dim}")
        for name in (
            "foreground_scale",
            "background_mean_scale",
            "background_spread",
            "class_context_scale",
            "noise_scale",
        ):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")

    def to_metadata(self) -> dict:
        return {
            "classes": self.classes,
            "dim": self.dim,
            "foreground_scale": self.foreground_scale,
            "background_mean_scale": self.background_mean_scale,
            "background_spread": self.background_spread,
            "class_context_scale": self.class_context_scale,
            "noise_scale": self.noise_scale,
            "seed": self.seed,
        }


PRESETS = {
    "default": SynthConfig(),
    # More per-image background relative to the class signal: full-image
    # test features are frequently ambiguous, which is the regime where
    # inference-time crop fusion has room to help.
    "background-heavy": SynthConfig(
        background_spread=3.5, background_mean_scale=0.8
    ),
    # Class evidence rides mostly on context rather than the object
    # itself: heads trained only on tight crops underweight what full
    # test images discriminate by, so discarding originals costs accuracy.
    "context-heavy": SynthConfig(
        foreground_scale=0.4, class_context_scale=1.5, background_spread=2.0
    ),
}


def _rng(config: SynthConfig, *entropy: int) -> np.random.Generator:
    seq = np.random.SeedSequence((int(config.seed), *[int(e) for e in entropy]))
    return np.random.Generator(np.random.PCG64(seq))


def _gaussian(config: SynthConfig, scale: float, *entropy: int) -> np.ndarray:
    return _rng(config, *entropy).normal(0.0, scale / np.sqrt(config.dim), config.dim)


class SynthModel:
    """Deterministic vector factory for one configuration.

    Class- and image-level draws are cached; noise is recomputed (it is a
    pure function of its seed, so caching is an optimization only).
    """

    def __init__(self, config: SynthConfig):
        self.config = config
        self._class_signal: dict[int, np.ndarray] = {}
        self._class_context: dict[int, np.ndarray] = {}
        self._image_background: dict[tuple[int, int], np.ndarray] = {}
        g = _rng(config, _TAG_BACKGROUND_MEAN).normal(0.0, 1.0, config.dim)
        self.background_mean = g / np.linalg.norm(g) * config.background_mean_scale

    def class_signal(self, c: int) -> np.ndarray:
        if c not in self._class_signal:
            self._class_signal[c] = _gaussian(
                self.config, self.config.foreground_scale, _TAG_CLASS_SIGNAL, c
            )
        return self._class_signal[c]

    def class_context(self, c: int) -> np.ndarray:
        if c not in self._class_context:
            self._class_context[c] = _gaussian(
                self.config, self.config.class_context_scale, _TAG_CLASS_CONTEXT, c
            )
        return self._class_context[c]

    def context_direction(self, c: int) -> np.ndarray:
        """m + h_c: what a class centroid loses as context is cropped away."""
        return self.background_mean + self.class_context(c)

    def image_background(self, c: int, i: int) -> np.ndarray:
        key = (c, i)
        if key not in self._image_background:
            self._image_background[key] = _gaussian(
                self.config, self.config.background_spread, _TAG_IMAGE_BACKGROUND, c, i
            )
        return self._image_background[key]

    def feature(self, c: int, i: int, fraction: float) -> np.ndarray:
        if not 0.0 <= fraction <= 1.0:
            raise ValidationError(f"context fraction must be in [0, 1], got {fraction}")
        noise = _gaussian(
            self.config,
            self.config.noise_scale,
            _TAG_NOISE,
            c,
            i,
            int(round(fraction * 1e9)),
        )
        return (
            self.class_signal(c)
            + fraction * (self.context_direction(c) + self.image_background(c, i))
            + noise
        )

    def expected_centroid(self, c: int, fraction: float) -> np.ndarray:
        """Population mean of class-c features at the given fraction."""
        return self.class_signal(c) + fraction * self.context_direction(c)

    # -- geometry ------------------------------------------------------

    def box_geometry(self, c: int, i: int) -> tuple[int, int, BoundingBox]:
        """(width, height, gt_box) for image i of class c, margins of CONTEXT_MARGIN."""
        rng = _rng(self.config, _TAG_GEOMETRY, c, i)
        bw = int(rng.integers(40, 81))
        bh = int(rng.integers(40, 81))
        box = BoundingBox(
            CONTEXT_MARGIN, CONTEXT_MARGIN, CONTEXT_MARGIN + bw, CONTEXT_MARGIN + bh
        )
        return bw + 2 * CONTEXT_MARGIN, bh + 2 * CONTEXT_MARGIN, box


@lru_cache(maxsize=8)
def _model(config: SynthConfig) -> SynthModel:
    return SynthModel(config)


def generate(config: SynthConfig, c: int, i: int, fraction: float) -> np.ndarray:
    """One feature vector; deterministic in (config, c, i, fraction)."""
    return _model(config).feature(c, i, fraction)


def context_fraction_of_box(gt_box: BoundingBox, crop: BoundingBox | None,
                            width: int, height: int) -> float:
    """Fraction of the surrounding context a crop retains, per the model.

    Mean over the sides with nonzero margin of the retained share of that
    side's margin, clamped to [0, 1]; the full image (crop=None) is 1.
    """
    if crop is None:
        return 1.0
    fractions = []
    if gt_box.x_min > 0:
        fractions.append((gt_box.x_min - crop.x_min) / gt_box.x_min)
    if gt_box.y_min > 0:
        fractions.append((gt_box.y_min - crop.y_min) / gt_box.y_min)
    if width > gt_box.x_max:
        fractions.append((crop.x_max - gt_box.x_max) / (width - gt_box.x_max))
    if height > gt_box.y_max:
        fractions.append((crop.y_max - gt_box.y_max) / (height - gt_box.y_max))
    if not fractions:
        return 1.0
    return min(1.0, max(0.0, sum(fractions) / len(fractions)))


@dataclass(frozen=True)
class SynthDataset:
    """Manifest + store pair with the id -> (class, image) mapping."""

    config: SynthConfig
    manifest: DatasetManifest
    store: FeatureStore
    ids: dict[str, tuple[int, int]]

    def model(self) -> SynthModel:
        return _model(self.config)


def class_label(c: int) -> str:
    return f"class_{c:02d}"


def image_id(c: int, i: int) -> str:
    return f"c{c:02d}_i{i:04d}"


def coverage_boxes(
    width: int,
    height: int,
    gt_box: BoundingBox,
    fractions=DEFAULT_FRACTIONS,
    pads=DEFAULT_PADS,
) -> list[BoundingBox]:
    boxes: list[BoundingBox] = []
    for f in fractions:
        box = interpolate_context(gt_box, f, width, height)
        if box not in boxes:
            boxes.append(box)
    for p in pads:
        box = pad_box(gt_box, p, width, height)
        if box not in boxes:
            boxes.append(box)
    return boxes


def make_dataset(
    config: SynthConfig,
    per_class: int = 100,
    name: str = "synth",
    fractions=DEFAULT_FRACTIONS,
    pads=DEFAULT_PADS,
) -> SynthDataset:
    """Emit a manifest + feature store covering full images and crop boxes.

    Derived sam/salient boxes are set equal to the ground-truth box so
    every method string runs against synthetic data; the store covers
    each image's full feature plus one feature per coverage box at that
    box's recovered context fraction.
    """
    if per_class < 1:
        raise ValidationError(f"per_class must be >= 1, got {per_class}")
    model = _model(config)
    records: list[ImageRecord] = []
    ids: dict[str, tuple[int, int]] = {}
    store = FeatureStore(dimension=config.dim)
    for c in range(config.classes):
        for i in range(per_class):
            width, height, gt_box = model.box_geometry(c, i)
            img_id = image_id(c, i)
            ids[img_id] = (c, i)
            records.append(
                ImageRecord(
                    image_id=img_id,
                    width=width,
                    height=height,
                    class_label=class_label(c),
                    gt_box=gt_box,
                    derived_boxes={"sam": gt_box, "salient": gt_box},
                )
            )
            store.put(canonical_key(img_id, FULL), model.feature(c, i, 1.0))
            for box in coverage_boxes(width, height, gt_box, fractions, pads):
                key = key_for_crop(img_id, box, width, height)
                if key.crop is None:
                    continue  # full-image crop folds onto the FULL entry
                frac = context_fraction_of_box(gt_box, box, width, height)
                store.put(key, model.feature(c, i, frac))
    manifest = DatasetManifest(
        name=name,
        classes=[class_label(c) for c in range(config.classes)],
        images=records,
    )
    manifest.validate()
    return SynthDataset(config=config, manifest=manifest, store=store, ids=ids)


def preset_config(preset: str, seed: int | None = None, **overrides) -> SynthConfig:
    if preset not in PRESETS:
        raise ValidationError(f"unknown preset {preset!r} (have: {sorted(PRESETS)})")
    config = PRESETS[preset]
    if seed is not None:
        overrides["seed"] = seed
    return replace(config, **overrides) if overrides else config
