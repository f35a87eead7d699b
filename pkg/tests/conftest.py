import numpy as np
import pytest

from cropshot.boxes import BoundingBox
from cropshot.manifest import DatasetManifest, ImageRecord
from cropshot.synth import PRESETS, make_dataset


def toy_record(i: int, label: str, width: int = 200, height: int = 200) -> ImageRecord:
    return ImageRecord(
        image_id=f"im{i:03d}",
        width=width,
        height=height,
        class_label=label,
        gt_box=BoundingBox(10, 10, 40, 40),
    )


@pytest.fixture
def toy_manifest() -> DatasetManifest:
    classes = [f"k{j}" for j in range(4)]
    images = [toy_record(i, classes[i % 4]) for i in range(40)]
    return DatasetManifest(name="toy", classes=classes, images=images)


@pytest.fixture(scope="session")
def default_dataset():
    return make_dataset(PRESETS["default"], per_class=50)


@pytest.fixture(scope="session")
def context_dataset():
    return make_dataset(PRESETS["context-heavy"], per_class=50)


@pytest.fixture(scope="session")
def background_dataset():
    return make_dataset(PRESETS["background-heavy"], per_class=50)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
