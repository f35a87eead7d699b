"""Segmentation models behind a string-id registry.

Two deterministic built-ins cover the two annotation styles:

- ``flood-point``: point-prompted. Grows a region of pixels whose color is
  close to the seed pixel and keeps the connected component containing the
  seed. Stands in for a promptable segmenter.
- ``border-contrast``: promptless saliency. Estimates the background color
  from the image border, masks pixels that contrast with it, and keeps the
  largest connected component.

Both return a binary uint8 mask of the image's shape; an all-zero mask
means "nothing found" and the caller records the box as absent.
"""

from __future__ import annotations

import numpy as np
from PIL import Image
from scipy import ndimage

from cropfeat.errors import ExtractError


def _rgb_array(image: Image.Image) -> np.ndarray:
    return np.asarray(image.convert("RGB"), dtype=np.float64)


class PointFloodSegmenter:
    name = "flood-point"
    needs_point = True

    def __init__(self, tolerance: float = 30.0):
        self.tolerance = tolerance

    def segment(self, image: Image.Image, point: tuple[int, int]) -> np.ndarray:
        arr = _rgb_array(image)
        height, width = arr.shape[:2]
        x, y = point
        if not (0 <= x < width and 0 <= y < height):
            raise ExtractError(f"point {point} outside {width}x{height} image")
        seed = arr[y, x]
        close = np.linalg.norm(arr - seed, axis=-1) <= self.tolerance
        labels, _ = ndimage.label(close)
        return (labels == labels[y, x]).astype(np.uint8)


class BorderContrastSaliency:
    name = "border-contrast"
    needs_point = False

    def __init__(self, tolerance: float = 30.0, border: int = 2):
        self.tolerance = tolerance
        self.border = border

    def segment(self, image: Image.Image, point=None) -> np.ndarray:
        arr = _rgb_array(image)
        b = self.border
        ring = np.concatenate(
            [
                arr[:b].reshape(-1, 3),
                arr[-b:].reshape(-1, 3),
                arr[:, :b].reshape(-1, 3),
                arr[:, -b:].reshape(-1, 3),
            ]
        )
        background = np.median(ring, axis=0)
        contrast = np.linalg.norm(arr - background, axis=-1) > self.tolerance
        labels, count = ndimage.label(contrast)
        if count == 0:
            return np.zeros(arr.shape[:2], dtype=np.uint8)
        sizes = ndimage.sum_labels(contrast, labels, index=np.arange(1, count + 1))
        keep = 1 + int(np.argmax(sizes))
        return (labels == keep).astype(np.uint8)


_BUILTIN = {
    "flood-point": PointFloodSegmenter,
    "border-contrast": BorderContrastSaliency,
}

# Heavy segmenters: id -> loader name in cropfeat.plugins.
_PLUGIN = {
    "sam": "load_sam",
    "move": "load_move",
}


def segmenter_ids() -> list[str]:
    return sorted(list(_BUILTIN) + list(_PLUGIN))


def get_segmenter(segmenter_id: str, device: str = "cpu", weights: str | None = None,
                  weights_sha256: str | None = None):
    if segmenter_id in _BUILTIN:
        return _BUILTIN[segmenter_id]()
    if segmenter_id in _PLUGIN:
        from cropfeat import plugins

        loader = getattr(plugins, _PLUGIN[segmenter_id])
        return loader(device=device, weights=weights, weights_sha256=weights_sha256)
    raise ExtractError(
        f"unknown segmenter {segmenter_id!r}; available: {', '.join(segmenter_ids())}"
    )
