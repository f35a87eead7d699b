"""Loaders for heavy, optional models.

Each loader imports its package lazily and fails with an install hint when
the package is absent, so the core extractor stays dependency-light. Weight
files are pinned by sha256: a loader given both a weights path and an
expected digest refuses to run on a mismatch.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from cropfeat.errors import ExtractError


def verify_weights(path: str | Path, expected_sha256: str) -> None:
    """Check a weight file's content hash before loading it."""
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    if digest != expected_sha256.lower():
        raise ExtractError(
            f"weights {path}: sha256 {digest} does not match pinned {expected_sha256}"
        )


def _check_pin(weights, weights_sha256):
    if weights_sha256 is not None:
        if weights is None:
            raise ExtractError("weights_sha256 given without a weights path")
        verify_weights(weights, weights_sha256)


def load_clip_rn50(device: str = "cpu", weights: str | None = None,
                   weights_sha256: str | None = None):
    """CLIP ResNet50 image encoder via open_clip."""
    _check_pin(weights, weights_sha256)
    try:
        import open_clip
        import torch
    except ImportError as exc:
        raise ExtractError(
            "encoder 'clip-rn50' needs torch and open_clip "
            "(pip install open_clip_torch)"
        ) from exc

    model, _, preprocess = open_clip.create_model_and_transforms(
        "RN50", pretrained=weights or "openai", device=device
    )
    model.eval()

    class _ClipEncoder:
        name = "clip-rn50"
        dimension = model.visual.output_dim

        def encode(self, image):
            return self.encode_batch([image])[0]

        def encode_batch(self, images):
            with torch.inference_mode():
                batch = torch.stack([preprocess(img.convert("RGB")) for img in images])
                feats = model.encode_image(batch.to(device))
            return feats.cpu().numpy().astype(np.float32)

    return _ClipEncoder()


def load_sam(device: str = "cpu", weights: str | None = None,
             weights_sha256: str | None = None):
    """Point-promptable segmenter via segment_anything; keeps the
    highest-scoring of the multi-mask output."""
    _check_pin(weights, weights_sha256)
    try:
        import torch  # noqa: F401
        from segment_anything import SamPredictor, sam_model_registry
    except ImportError as exc:
        raise ExtractError(
            "segmenter 'sam' needs torch and segment_anything "
            "(pip install segment-anything)"
        ) from exc
    if weights is None:
        raise ExtractError("segmenter 'sam' needs --weights (a SAM checkpoint)")

    sam = sam_model_registry["vit_b"](checkpoint=weights).to(device)
    predictor = SamPredictor(sam)

    class _SamSegmenter:
        name = "sam"
        needs_point = True

        def segment(self, image, point):
            predictor.set_image(np.asarray(image.convert("RGB")))
            masks, scores, _ = predictor.predict(
                point_coords=np.array([point], dtype=np.float64),
                point_labels=np.array([1]),
                multimask_output=True,
            )
            return masks[int(np.argmax(scores))].astype(np.uint8)

    return _SamSegmenter()


def load_move(device: str = "cpu", weights: str | None = None,
              weights_sha256: str | None = None):
    """Unsupervised salient-object segmenter. No maintained pip package
    exists; load a user-provided torchscript export."""
    _check_pin(weights, weights_sha256)
    try:
        import torch
    except ImportError as exc:
        raise ExtractError("segmenter 'move' needs torch") from exc
    if weights is None:
        raise ExtractError("segmenter 'move' needs --weights (a torchscript export)")

    model = torch.jit.load(weights, map_location=device).eval()

    class _MoveSegmenter:
        name = "move"
        needs_point = False

        def segment(self, image, point=None):
            arr = np.asarray(image.convert("RGB"), dtype=np.float32) / 255.0
            tensor = torch.from_numpy(arr).permute(2, 0, 1)[None].to(device)
            with torch.inference_mode():
                out = model(tensor)[0, 0]
            return (out.cpu().numpy() > 0.5).astype(np.uint8)

    return _MoveSegmenter()
