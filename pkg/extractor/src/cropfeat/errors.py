"""Error types for extraction jobs."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ItemError:
    """One failed crop-manifest entry: which item and why."""

    image_id: str
    crop: tuple[int, int, int, int] | None
    reason: str

    def __str__(self):
        where = "full" if self.crop is None else str(list(self.crop))
        return f"{self.image_id}@{where}: {self.reason}"


class ExtractError(Exception):
    """Job-level failure. Carries the per-item error report when present."""

    def __init__(self, message: str, items: list[ItemError] | None = None):
        self.items = items or []
        if self.items:
            lines = [message] + [f"  - {item}" for item in self.items]
            message = "\n".join(lines)
        super().__init__(message)
