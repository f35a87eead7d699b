import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

# 10 images, two classes. Solid background, one solid-color rectangle
# object per image; gt_box is exactly the rectangle (half-open).
BACKGROUNDS = [
    (200, 200, 205), (198, 204, 198), (205, 198, 200), (202, 202, 196),
    (196, 200, 204), (204, 196, 202), (200, 205, 198), (198, 198, 205),
    (205, 202, 196), (196, 204, 200),
]
OBJECTS = [
    (180, 40, 50), (40, 150, 60), (50, 60, 170), (170, 150, 40),
    (150, 40, 160), (40, 160, 150), (120, 80, 30), (30, 120, 90),
    (90, 30, 130), (160, 90, 40),
]
SIZE = 96


def object_box(i: int) -> tuple[int, int, int, int]:
    x0 = 12 + 3 * i
    y0 = 16 + 2 * i
    return (x0, y0, x0 + 30 + 2 * i, y0 + 26 + 2 * i)


def paint_image(i: int) -> Image.Image:
    arr = np.empty((SIZE, SIZE, 3), dtype=np.uint8)
    arr[:] = BACKGROUNDS[i]
    x0, y0, x1, y1 = object_box(i)
    arr[y0:y1, x0:x1] = OBJECTS[i]
    return Image.fromarray(arr)


def write_fixture_dataset(root: Path) -> Path:
    """Images + manifest; even images carry an explicit click point."""
    root.mkdir(parents=True, exist_ok=True)
    images = []
    for i in range(10):
        image_id = f"im{i:02d}"
        paint_image(i).save(root / f"{image_id}.png")
        x0, y0, x1, y1 = object_box(i)
        entry = {
            "id": image_id,
            "width": SIZE,
            "height": SIZE,
            "label": "a" if i % 2 == 0 else "b",
            "gt_box": [x0, y0, x1, y1],
        }
        if i % 2 == 0:
            entry["point"] = [(x0 + x1) // 2, (y0 + y1) // 2]
        images.append(entry)
    manifest = root / "manifest.json"
    manifest.write_text(
        json.dumps({"name": "fixture", "classes": ["a", "b"], "images": images}, indent=2)
        + "\n"
    )
    return manifest


@pytest.fixture(scope="session")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixture_images")
    manifest = write_fixture_dataset(root)
    return root, manifest


def write_crops(path: Path, lines: list[dict]) -> Path:
    path.write_text("".join(json.dumps(obj) + "\n" for obj in lines))
    return path
