"""Image encoders behind a string-id registry.

The built-in ``pooled-patch`` encoder is tiny and fully deterministic: it
resizes to a fixed input, pools color statistics over a grid of cells, and
L2-normalizes. It exists so the whole extraction pipeline runs and is
testable without model weights. Heavy encoders (CLIP and friends) load
through :mod:`cropfeat.plugins` and require their packages and weights.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from cropfeat.errors import ExtractError


class PooledPatchEncoder:
    """Grid-pooled color statistics of a bilinear-resized image.

    Feature layout: per-cell mean R, G, B over a grid x grid partition,
    then per-cell luminance standard deviation; L2-normalized.
    """

    name = "pooled-patch"

    def __init__(self, input_size: int = 32, grid: int = 4):
        if input_size % grid != 0:
            raise ExtractError(f"input_size {input_size} not divisible by grid {grid}")
        self.input_size = input_size
        self.grid = grid
        self.dimension = grid * grid * 3 + grid * grid

    def encode(self, image: Image.Image) -> np.ndarray:
        small = image.convert("RGB").resize(
            (self.input_size, self.input_size), Image.BILINEAR
        )
        arr = np.asarray(small, dtype=np.float64) / 255.0
        cell = self.input_size // self.grid
        # (grid, cell, grid, cell, 3) blocks
        blocks = arr.reshape(self.grid, cell, self.grid, cell, 3)
        means = blocks.mean(axis=(1, 3))
        luma = blocks @ np.array([0.299, 0.587, 0.114])
        stds = luma.std(axis=(1, 3))
        vec = np.concatenate([means.ravel(), stds.ravel()])
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec = vec / norm
        return vec.astype(np.float32)

    def encode_batch(self, images: list[Image.Image]) -> np.ndarray:
        if not images:
            return np.zeros((0, self.dimension), dtype=np.float32)
        return np.stack([self.encode(img) for img in images])


_BUILTIN = {
    "pooled-patch": PooledPatchEncoder,
}

# Heavy encoders: id -> loader name in cropfeat.plugins.
_PLUGIN = {
    "clip-rn50": "load_clip_rn50",
}


def encoder_ids() -> list[str]:
    return sorted(list(_BUILTIN) + list(_PLUGIN))


def get_encoder(encoder_id: str, device: str = "cpu", weights: str | None = None,
                weights_sha256: str | None = None):
    if encoder_id in _BUILTIN:
        return _BUILTIN[encoder_id]()
    if encoder_id in _PLUGIN:
        from cropfeat import plugins

        loader = getattr(plugins, _PLUGIN[encoder_id])
        return loader(device=device, weights=weights, weights_sha256=weights_sha256)
    raise ExtractError(
        f"unknown encoder {encoder_id!r}; available: {', '.join(encoder_ids())}"
    )
