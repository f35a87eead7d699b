"""Feature extractor companion package.

Consumes the dataset manifest and crop-request manifest formats, runs an
image encoder over the requested crops, and writes the binary feature cache
(FSCACHE1) that the evaluation engine imports. Also derives object boxes
(sam / salient) from segmentation masks and writes them back into the
dataset manifest.

The two packages communicate only through these file formats and CLIs;
nothing here imports the engine.
"""

from cropfeat.errors import ExtractError, ItemError
from cropfeat.jobs import ExtractJob, derive_boxes, embed_crops

__version__ = "0.1.0"

__all__ = [
    "ExtractError",
    "ExtractJob",
    "ItemError",
    "derive_boxes",
    "embed_crops",
]
