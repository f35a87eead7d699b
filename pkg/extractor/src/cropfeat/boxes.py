"""Box helpers on plain int tuples, half-open pixel convention.

A box is (x_min, y_min, x_max, y_max) with x_min < x_max and y_min < y_max;
the max edges are exclusive, so the box covers columns [x_min, x_max) and
rows [y_min, y_max).
"""

from __future__ import annotations

import numpy as np

from cropfeat.errors import ExtractError

Box = tuple[int, int, int, int]


def validate_box(box, width: int, height: int, ctx: str = "box") -> Box:
    """Coerce to an int tuple and check it sits inside a width x height image."""
    if len(box) != 4:
        raise ExtractError(f"{ctx}: expected 4 coordinates, got {len(box)}")
    coords = []
    for value in box:
        if int(value) != value:
            raise ExtractError(f"{ctx}: non-integer coordinate {value!r}")
        coords.append(int(value))
    x0, y0, x1, y1 = coords
    if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
        raise ExtractError(
            f"{ctx}: {coords} out of bounds for {width}x{height} image"
        )
    return (x0, y0, x1, y1)


def is_full_box(box: Box, width: int, height: int) -> bool:
    return box == (0, 0, width, height)


def mask_to_box(mask) -> Box | None:
    """Minimal half-open box containing every nonzero mask pixel.

    Returns None for an all-zero mask.
    """
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ExtractError(f"mask must be 2-D, got shape {arr.shape}")
    rows = np.flatnonzero(arr.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(arr.any(axis=0))
    return (int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two half-open boxes."""
    ix0, iy0 = max(a[0], b[0]), max(a[1], b[1])
    ix1, iy1 = min(a[2], b[2]), min(a[3], b[3])
    inter = max(0, ix1 - ix0) * max(0, iy1 - iy0)
    if inter == 0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)
