"""Dataset- and crop-manifest I/O.

The dataset manifest is a JSON document: name, classes, and an images array
of {id, width, height, label, gt_box?, point?, derived_boxes?}. We edit it
as a raw document so unknown fields survive a round trip.

The crop manifest is newline-delimited JSON, one request per line:
{"image_id": ..., "crop": "full" | [x0, y0, x1, y1], "purpose": ...}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from cropfeat.boxes import Box, validate_box
from cropfeat.errors import ExtractError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass(frozen=True)
class CropLine:
    image_id: str
    crop: Box | None
    purpose: str


def read_crop_lines(path: str | Path) -> list[CropLine]:
    lines = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
            crop = obj["crop"]
            lines.append(
                CropLine(
                    image_id=obj["image_id"],
                    crop=None if crop == "full" else tuple(int(v) for v in crop),
                    purpose=obj.get("purpose", ""),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ExtractError(f"{path}:{lineno}: bad crop manifest line ({exc})") from exc
    return lines


def load_dataset_doc(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ExtractError(f"manifest {path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("images"), list):
        raise ExtractError(f"manifest {path}: expected an object with an images array")
    return doc


def save_dataset_doc(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def image_entry(doc: dict, image_id: str) -> dict:
    for entry in doc["images"]:
        if entry.get("id") == image_id:
            return entry
    raise ExtractError(f"manifest has no image with id {image_id!r}")


def click_point(entry: dict) -> tuple[int, int]:
    """The annotation click; simulated at the gt_box center when absent."""
    point = entry.get("point")
    if point is not None:
        return int(point[0]), int(point[1])
    gt = entry.get("gt_box")
    if gt is None:
        raise ExtractError(
            f"image {entry.get('id')!r} has neither point nor gt_box to click"
        )
    box = validate_box(gt, int(entry["width"]), int(entry["height"]), "gt_box")
    return (box[0] + box[2]) // 2, (box[1] + box[3]) // 2


def find_image_file(root: str | Path, entry: dict) -> Path:
    """Locate an image on disk: explicit file field, else id + known suffix."""
    root = Path(root)
    explicit = entry.get("file")
    if explicit is not None:
        path = root / explicit
        if not path.is_file():
            raise FileNotFoundError(f"image file {path} listed in manifest not found")
        return path
    image_id = entry["id"]
    for suffix in IMAGE_SUFFIXES:
        path = root / f"{image_id}{suffix}"
        if path.is_file():
            return path
    raise FileNotFoundError(
        f"no image file for id {image_id!r} under {root} (tried {', '.join(IMAGE_SUFFIXES)})"
    )
