"""Extraction jobs: fill a feature cache, derive object boxes.

Both jobs are all-or-nothing: per-item failures are collected into an
ExtractError report and no partial output is written.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from cropfeat.boxes import mask_to_box, validate_box
from cropfeat.cache import CacheKey, write_cache
from cropfeat.encoders import get_encoder
from cropfeat.errors import ExtractError, ItemError
from cropfeat.manifests import (
    click_point,
    find_image_file,
    image_entry,
    load_dataset_doc,
    read_crop_lines,
    save_dataset_doc,
)
from cropfeat.segmenters import get_segmenter

logger = logging.getLogger("cropfeat.jobs")

BOX_MODES = ("sam", "salient")


@dataclass
class ExtractJob:
    """Everything an extraction run needs, serializable as flags or config."""

    dataset_root: Path
    crop_manifest: Path
    output_cache: Path
    encoder_id: str = "pooled-patch"
    segmenter_id: str = "flood-point"
    saliency_id: str = "border-contrast"
    device: str = "cpu"
    batch_size: int = 32
    weights: str | None = None
    weights_sha256: str | None = None

    def __post_init__(self):
        self.dataset_root = Path(self.dataset_root)
        self.crop_manifest = Path(self.crop_manifest)
        self.output_cache = Path(self.output_cache)
        if self.batch_size < 1:
            raise ExtractError(f"batch_size must be >= 1, got {self.batch_size}")


class _ImageLoader:
    """Opens each image file once; remembers undecodable files."""

    def __init__(self, root: Path):
        self.root = root
        self._cache: dict[str, Image.Image | str] = {}

    def load(self, entry: dict) -> Image.Image:
        image_id = entry["id"]
        if image_id not in self._cache:
            try:
                path = find_image_file(self.root, entry)
                with Image.open(path) as img:
                    self._cache[image_id] = img.convert("RGB")
            except FileNotFoundError as exc:
                self._cache[image_id] = str(exc)
            except (UnidentifiedImageError, OSError) as exc:
                self._cache[image_id] = f"undecodable image: {exc}"
        cached = self._cache[image_id]
        if isinstance(cached, str):
            raise ExtractError(cached)
        return cached


def embed_crops(job: ExtractJob, manifest_path: str | Path) -> int:
    """Encode every crop-manifest request into the output cache.

    One record per distinct (image_id, crop) key; duplicate request lines
    collapse (re-encoding them would produce the identical vector). Returns
    the number of records written.
    """
    doc = load_dataset_doc(manifest_path)
    lines = read_crop_lines(job.crop_manifest)
    if not lines:
        raise ExtractError(f"crop manifest {job.crop_manifest} is empty")
    encoder = get_encoder(
        job.encoder_id, job.device, job.weights, job.weights_sha256
    )
    loader = _ImageLoader(job.dataset_root)

    todo: dict[CacheKey, Image.Image] = {}
    failures: list[ItemError] = []
    for line in lines:
        key: CacheKey = (line.image_id, line.crop)
        if key in todo:
            continue
        try:
            entry = image_entry(doc, line.image_id)
            image = loader.load(entry)
            if line.crop is None:
                view = image
            else:
                box = validate_box(line.crop, image.width, image.height, "crop")
                view = image.crop(box)
            todo[key] = view
        except ExtractError as exc:
            failures.append(ItemError(line.image_id, line.crop, str(exc)))
    if failures:
        raise ExtractError(
            f"{len(failures)} of {len(lines)} crop requests failed; no cache written",
            failures,
        )

    keys = list(todo)
    vectors: dict[CacheKey, np.ndarray] = {}
    for start in range(0, len(keys), job.batch_size):
        chunk = keys[start : start + job.batch_size]
        batch = encoder.encode_batch([todo[k] for k in chunk])
        for key, vec in zip(chunk, batch):
            vectors[key] = vec
    job.output_cache.parent.mkdir(parents=True, exist_ok=True)
    return write_cache(job.output_cache, encoder.dimension, vectors)


def derive_boxes(job: ExtractJob, manifest_path: str | Path, mode: str,
                 out_path: str | Path) -> tuple[int, int]:
    """Fill derived_boxes[mode] for every image and write the manifest.

    ``sam`` prompts the segmenter with the annotation point (gt-box center
    when absent); ``salient`` needs no prompt. An empty mask leaves the box
    absent with a warning. Returns (boxes written, images skipped).
    """
    if mode not in BOX_MODES:
        raise ExtractError(f"unknown box mode {mode!r}; expected one of {BOX_MODES}")
    doc = load_dataset_doc(manifest_path)
    model_id = job.segmenter_id if mode == "sam" else job.saliency_id
    segmenter = get_segmenter(model_id, job.device, job.weights, job.weights_sha256)
    if mode == "salient" and segmenter.needs_point:
        raise ExtractError(
            f"segmenter {model_id!r} needs a point prompt; salient mode forbids one"
        )
    loader = _ImageLoader(job.dataset_root)

    written = 0
    skipped = 0
    failures: list[ItemError] = []
    for entry in doc["images"]:
        try:
            image = loader.load(entry)
            point = click_point(entry) if segmenter.needs_point else None
            mask = segmenter.segment(image, point)
            box = mask_to_box(mask)
            if box is not None:
                box = validate_box(
                    box, int(entry["width"]), int(entry["height"]), f"{mode} box"
                )
        except ExtractError as exc:
            failures.append(ItemError(entry.get("id", "?"), None, str(exc)))
            continue
        if box is None:
            logger.warning(
                "image %s: empty %s mask, derived box left absent", entry["id"], mode
            )
            entry.get("derived_boxes", {}).pop(mode, None)
            skipped += 1
            continue
        entry.setdefault("derived_boxes", {})[mode] = list(box)
        written += 1
    if failures:
        raise ExtractError(
            f"{len(failures)} of {len(doc['images'])} images failed; manifest not written",
            failures,
        )
    save_dataset_doc(doc, out_path)
    return written, skipped
