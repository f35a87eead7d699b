"""Writer (and reader, for round-trip checks) of the binary feature cache.

Layout, little-endian throughout:

    magic   8 bytes  b"FSCACHE1"
    d       u32      vector dimension
    n       u32      record count
    record  n times:
        id_len  u16
        id      id_len bytes, UTF-8
        tag     u8   0 = full image, 1 = box crop
        box     4 x u32 (x_min, y_min, x_max, y_max), only when tag == 1
        vector  d x f32

Record order is reader-insensitive; this writer sorts keys so that equal
contents always serialize to equal bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from cropfeat.boxes import Box
from cropfeat.errors import ExtractError

MAGIC = b"FSCACHE1"

# (image_id, crop); crop None addresses the full image.
CacheKey = tuple[str, "Box | None"]


def _sort_token(key: CacheKey):
    image_id, crop = key
    return (image_id, 0 if crop is None else 1, crop or ())


def write_cache(path: str | Path, dimension: int, records: dict[CacheKey, np.ndarray]) -> int:
    """Write records to ``path``; returns the record count."""
    if dimension <= 0:
        raise ExtractError(f"cache dimension must be positive, got {dimension}")
    entries = []
    for key in sorted(records, key=_sort_token):
        image_id, crop = key
        vec = np.asarray(records[key], dtype="<f4")
        if vec.shape != (dimension,):
            raise ExtractError(
                f"vector for {image_id!r} has shape {vec.shape}, cache dimension is {dimension}"
            )
        if not np.all(np.isfinite(vec)):
            raise ExtractError(f"vector for {image_id!r} contains NaN/Inf")
        id_bytes = image_id.encode("utf-8")
        if not id_bytes or len(id_bytes) > 0xFFFF:
            raise ExtractError(f"image id not encodable in a u16 length: {image_id!r}")
        entries.append((id_bytes, crop, vec))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", dimension, len(entries)))
        for id_bytes, crop, vec in entries:
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            if crop is None:
                fh.write(b"\x00")
            else:
                fh.write(b"\x01")
                fh.write(struct.pack("<IIII", *crop))
            fh.write(vec.tobytes())
    return len(entries)


def read_cache(path: str | Path) -> tuple[int, dict[CacheKey, np.ndarray]]:
    """Read a cache back as (dimension, records). Strict about truncation."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ExtractError(f"{path}: bad magic {data[:8]!r}")
    dimension, count = struct.unpack_from("<II", data, 8)
    offset = 16
    records: dict[CacheKey, np.ndarray] = {}
    try:
        for _ in range(count):
            (id_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            image_id = data[offset : offset + id_len].decode("utf-8")
            offset += id_len
            tag = data[offset]
            offset += 1
            crop: Box | None
            if tag == 0:
                crop = None
            elif tag == 1:
                crop = struct.unpack_from("<IIII", data, offset)
                offset += 16
            else:
                raise ExtractError(f"{path}: unknown crop tag {tag}")
            vec = np.frombuffer(data, dtype="<f4", count=dimension, offset=offset).copy()
            offset += 4 * dimension
            records[(image_id, crop)] = vec
    except (struct.error, IndexError, ValueError) as exc:
        raise ExtractError(f"{path}: truncated cache ({exc})") from exc
    if offset != len(data):
        raise ExtractError(f"{path}: trailing bytes after {count} records")
    return dimension, records
