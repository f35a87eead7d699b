"""Dataset manifest: image records, labels, boxes, and JSON (de)serialization.

The manifest is the only place box annotations live; segmentation-derived
boxes (sam / salient) are cached here rather than recomputed per run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from cropshot.boxes import BoundingBox
from cropshot.errors import ValidationError

BOX_SOURCES = ("gt", "sam", "salient")


@dataclass(frozen=True)
class ImageRecord:
    """One dataset image: dimensions, label, and optional object boxes.

    ``point`` is a simulated annotator click; when a run needs one and the
    record lacks it, the center of ``gt_box`` stands in.
    """

    image_id: str
    width: int
    height: int
    class_label: str
    gt_box: BoundingBox | None = None
    point: tuple[int, int] | None = None
    derived_boxes: dict[str, BoundingBox] = field(default_factory=dict)

    def validate(self) -> None:
        ctx = f"image {self.image_id!r}"
        if not self.image_id:
            raise ValidationError("image_id must be non-empty")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"{ctx}: non-positive dimensions {self.width}x{self.height}")
        if self.gt_box is not None:
            self.gt_box.validate_within(self.width, self.height, f"{ctx}: gt_box")
        for source, box in self.derived_boxes.items():
            if source not in ("sam", "salient"):
                raise ValidationError(f"{ctx}: unknown derived box source {source!r}")
            box.validate_within(self.width, self.height, f"{ctx}: {source} box")
        if self.point is not None:
            x, y = self.point
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise ValidationError(f"{ctx}: point {self.point} outside image")
            if self.gt_box is not None and not self.gt_box.contains_point(x, y):
                raise ValidationError(f"{ctx}: point {self.point} outside gt_box")

    def box_for_source(self, source: str) -> BoundingBox | None:
        """The annotation box for a method's source, None when absent."""
        if source == "gt":
            return self.gt_box
        if source in ("sam", "salient"):
            return self.derived_boxes.get(source)
        raise ValidationError(f"unknown box source {source!r}")

    def click_point(self) -> tuple[int, int]:
        """The annotator click, simulated at the gt_box center if absent."""
        if self.point is not None:
            return self.point
        if self.gt_box is None:
            raise ValidationError(f"image {self.image_id!r} has neither point nor gt_box")
        return (
            (self.gt_box.x_min + self.gt_box.x_max) // 2,
            (self.gt_box.y_min + self.gt_box.y_max) // 2,
        )


@dataclass
class DatasetManifest:
    name: str
    classes: list[str]
    images: list[ImageRecord]

    def validate(self) -> None:
        seen: set[str] = set()
        class_set = set(self.classes)
        if len(class_set) != len(self.classes):
            raise ValidationError("duplicate entries in classes list")
        for rec in self.images:
            rec.validate()
            if rec.image_id in seen:
                raise ValidationError(f"duplicate image_id {rec.image_id!r}")
            seen.add(rec.image_id)
            if rec.class_label not in class_set:
                raise ValidationError(
                    f"image {rec.image_id!r}: label {rec.class_label!r} not in classes"
                )

    def by_id(self, image_id: str) -> ImageRecord:
        if not hasattr(self, "_index"):
            self._index = {rec.image_id: rec for rec in self.images}
        try:
            return self._index[image_id]
        except KeyError:
            raise ValidationError(f"unknown image id {image_id!r}") from None

    def ids_by_class(self) -> dict[str, list[str]]:
        """Image ids grouped by class, in manifest order."""
        groups: dict[str, list[str]] = {label: [] for label in self.classes}
        for rec in self.images:
            groups[rec.class_label].append(rec.image_id)
        return groups


def _box_to_json(box: BoundingBox) -> list[int]:
    return list(box.as_tuple())


def record_to_json(rec: ImageRecord) -> dict:
    obj: dict = {
        "id": rec.image_id,
        "width": rec.width,
        "height": rec.height,
        "label": rec.class_label,
    }
    if rec.gt_box is not None:
        obj["gt_box"] = _box_to_json(rec.gt_box)
    if rec.point is not None:
        obj["point"] = list(rec.point)
    if rec.derived_boxes:
        obj["derived_boxes"] = {
            src: _box_to_json(box) for src, box in sorted(rec.derived_boxes.items())
        }
    return obj


def record_from_json(obj: dict) -> ImageRecord:
    try:
        gt = obj.get("gt_box")
        point = obj.get("point")
        derived = obj.get("derived_boxes") or {}
        return ImageRecord(
            image_id=obj["id"],
            width=int(obj["width"]),
            height=int(obj["height"]),
            class_label=obj["label"],
            gt_box=None if gt is None else BoundingBox.from_sequence(gt),
            point=None if point is None else (int(point[0]), int(point[1])),
            derived_boxes={
                src: BoundingBox.from_sequence(box) for src, box in derived.items()
            },
        )
    except KeyError as exc:
        raise ValidationError(f"image record missing field {exc}") from exc


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    manifest.validate()
    doc = {
        "name": manifest.name,
        "classes": list(manifest.classes),
        "images": [record_to_json(rec) for rec in manifest.images],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def load_manifest(path: str | Path) -> DatasetManifest:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest {path}: invalid JSON ({exc})") from exc
    try:
        manifest = DatasetManifest(
            name=doc["name"],
            classes=list(doc["classes"]),
            images=[record_from_json(obj) for obj in doc["images"]],
        )
    except KeyError as exc:
        raise ValidationError(f"manifest {path}: missing field {exc}") from exc
    manifest.validate()
    return manifest
