"""Feature cache: canonical keys, in-memory store, and the binary codec.

Cache file layout (little-endian throughout):

    magic   8 bytes  b"FSCACHE1"
    d       u32      vector dimension
    n       u32      record count
    record  n times:
        id_len  u16
        id      id_len bytes, UTF-8
        tag     u8   0 = full image, 1 = box crop
        box     4 x u32 (x_min, y_min, x_max, y_max), only when tag == 1
        vector  d x f32

Vectors are persisted as float32 (typical encoder output precision) and
kept as float32 in memory so write -> read round-trips bit-exactly;
consumers promote to float64 at the point of arithmetic.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from cropshot.boxes import BoundingBox, full_image_box
from cropshot.errors import (
    BadMagicError,
    DimensionMismatchError,
    FeatureNotFoundError,
    TruncatedCacheError,
    ValidationError,
)

MAGIC = b"FSCACHE1"

# Sentinel for "the whole image" in keys and crop manifests.
FULL = None


@dataclass(frozen=True)
class FeatureKey:
    """Canonical (image, crop) address of one embedding.

    ``crop`` is None for the full image. Two keys are equal iff image_id
    and crop coordinates match exactly.
    """

    image_id: str
    crop: BoundingBox | None = None

    def __str__(self):
        crop = "full" if self.crop is None else str(self.crop.as_tuple())
        return f"{self.image_id}@{crop}"


def canonical_key(image_id: str, crop: BoundingBox | None = None) -> FeatureKey:
    """Build a validated key; ``crop=None`` addresses the full image."""
    if not image_id:
        raise ValidationError("image_id must be non-empty")
    if crop is not None and not isinstance(crop, BoundingBox):
        crop = BoundingBox.from_sequence(crop)
    return FeatureKey(image_id, crop)


def key_for_crop(
    image_id: str, crop: BoundingBox, width: int, height: int
) -> FeatureKey:
    """Key for a planned crop, folding full-image crops onto the FULL key.

    Keeps keys canonical: a crop spanning the whole image is the same
    embedding as the uncropped image and must not get a second address.
    """
    if crop == full_image_box(width, height):
        return canonical_key(image_id, FULL)
    return canonical_key(image_id, crop)


class FeatureStore:
    """Immutable-after-load map from FeatureKey to a float32 vector."""

    def __init__(self, dimension: int):
        if dimension <= 0:
            raise ValidationError(f"dimension must be positive, got {dimension}")
        self.dimension = int(dimension)
        self._entries: dict[FeatureKey, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: FeatureKey) -> bool:
        return key in self._entries

    def keys(self) -> Iterator[FeatureKey]:
        return iter(self._entries)

    def put(self, key: FeatureKey, vector) -> None:
        vec = np.asarray(vector, dtype=np.float32)
        if vec.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"vector for {key} has shape {vec.shape}, store dimension is {self.dimension}"
            )
        if not np.all(np.isfinite(vec)):
            raise ValidationError(f"vector for {key} contains NaN/Inf")
        self._entries[key] = vec

    def get(self, key: FeatureKey) -> np.ndarray:
        try:
            return self._entries[key]
        except KeyError:
            raise FeatureNotFoundError(f"feature key not in store: {key}") from None

    def missing(self, keys: Iterable[FeatureKey]) -> list[FeatureKey]:
        return [k for k in keys if k not in self._entries]

    def matrix(self, keys: Iterable[FeatureKey]) -> np.ndarray:
        """Stack features for ``keys`` as a float64 (n, d) matrix."""
        rows = [self.get(k) for k in keys]
        if not rows:
            return np.zeros((0, self.dimension), dtype=np.float64)
        return np.stack(rows).astype(np.float64)


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedCacheError(f"cache truncated while reading {what}")
    return data


def write_store(store: FeatureStore, path: str | Path) -> None:
    """Persist a store; record order follows insertion order."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", store.dimension, len(store)))
        for key in store.keys():
            id_bytes = key.image_id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise ValidationError(f"image_id too long to encode: {key.image_id[:32]}...")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            if key.crop is None:
                fh.write(b"\x00")
            else:
                fh.write(b"\x01")
                fh.write(struct.pack("<IIII", *key.crop.as_tuple()))
            fh.write(store.get(key).astype("<f4").tobytes())


def read_store(path: str | Path) -> FeatureStore:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise BadMagicError(f"bad magic in {path}: {magic!r}")
        d, n = struct.unpack("<II", _read_exact(fh, 8, "header"))
        store = FeatureStore(dimension=d)
        for i in range(n):
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2, f"record {i} id length"))
            image_id = _read_exact(fh, id_len, f"record {i} id").decode("utf-8")
            tag = _read_exact(fh, 1, f"record {i} crop tag")[0]
            if tag == 0:
                crop = None
            elif tag == 1:
                coords = struct.unpack("<IIII", _read_exact(fh, 16, f"record {i} box"))
                crop = BoundingBox(*coords)
            else:
                raise TruncatedCacheError(f"record {i}: unknown crop tag {tag}")
            raw = _read_exact(fh, 4 * d, f"record {i} vector")
            vec = np.frombuffer(raw, dtype="<f4")
            key = FeatureKey(image_id, crop)
            if not np.all(np.isfinite(vec)):
                raise ValidationError(f"record {i} ({key}) contains NaN/Inf")
            store._entries[key] = vec.copy()
        trailing = fh.read(1)
        if trailing:
            raise TruncatedCacheError(f"{path}: trailing bytes after {n} records")
    return store


# -- crop manifest (engine -> extractor) -------------------------------

@dataclass(frozen=True)
class CropRequest:
    """One line of the newline-delimited crop manifest."""

    image_id: str
    crop: BoundingBox | None
    purpose: str

    def key(self) -> FeatureKey:
        return FeatureKey(self.image_id, self.crop)


def write_crop_manifest(requests: Iterable[CropRequest], path: str | Path) -> int:
    count = 0
    with open(path, "w") as fh:
        for req in requests:
            crop = "full" if req.crop is None else list(req.crop.as_tuple())
            fh.write(
                json.dumps(
                    {"image_id": req.image_id, "crop": crop, "purpose": req.purpose},
                    sort_keys=False,
                )
                + "\n"
            )
            count += 1
    return count


def read_crop_manifest(path: str | Path) -> list[CropRequest]:
    requests = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            crop = obj["crop"]
            requests.append(
                CropRequest(
                    image_id=obj["image_id"],
                    crop=None if crop == "full" else BoundingBox.from_sequence(crop),
                    purpose=obj.get("purpose", ""),
                )
            )
        except (json.JSONDecodeError, KeyError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad crop manifest line ({exc})") from exc
    return requests
