"""Seeded, class-balanced sampling of few-shot tasks.

Randomness comes from numpy's PCG64 generator seeded through
SeedSequence, a named algorithm with a platform-stable bit stream; the
test suite freezes concrete draws as cross-implementation vectors.

Sampling order is fixed: classes first, then one permutation per class
consumed as successive prefixes (support, query, test). Consequences
relied on by sweeps: growing the support size extends the support set
monotonically for a fixed seed, and changing the test size never alters
which support or query items are drawn.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cropshot.errors import ValidationError
from cropshot.manifest import DatasetManifest

SETTINGS = ("inductive", "transductive")


@dataclass(frozen=True)
class EpisodeConfig:
    ways: int
    n_support: int
    n_query: int
    n_test: int
    seed: int
    setting: str = "inductive"

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValidationError(f"setting must be one of {SETTINGS}, got {self.setting!r}")
        if self.ways < 2:
            raise ValidationError(f"ways must be >= 2, got {self.ways}")
        if self.n_support < self.ways or self.n_support % self.ways:
            raise ValidationError(
                f"n_support must be a positive multiple of ways={self.ways}, got {self.n_support}"
            )
        if self.n_query % self.ways:
            raise ValidationError(f"n_query must be a multiple of ways, got {self.n_query}")
        if self.setting == "inductive" and self.n_query != 0:
            raise ValidationError("inductive episodes take no query set")
        if self.n_test < self.ways or self.n_test % self.ways:
            raise ValidationError(
                f"n_test must be a positive multiple of ways, got {self.n_test}"
            )
        if not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    @property
    def per_class_need(self) -> int:
        return (self.n_support + self.n_query + self.n_test) // self.ways


@dataclass(frozen=True)
class Episode:
    """One sampled few-shot task over manifest image ids."""

    classes: tuple[str, ...]
    support: tuple[tuple[str, str], ...]       # (image_id, label)
    query: tuple[str, ...]                     # labels hidden from the pipeline
    query_labels: tuple[str, ...]              # retained for scoring only
    test: tuple[tuple[str, str], ...]
    config: EpisodeConfig

    def class_index(self, label: str) -> int:
        return self.classes.index(label)

    def to_json(self) -> dict:
        return {
            "classes": list(self.classes),
            "support": [list(pair) for pair in self.support],
            "query": list(self.query),
            "test": [list(pair) for pair in self.test],
        }


def sample_episode(manifest: DatasetManifest, config: EpisodeConfig) -> Episode:
    """Deterministically sample a class-balanced episode.

    Raises a descriptive error naming the first sampled class whose image
    pool cannot cover support+query+test.
    """
    if config.ways > len(manifest.classes):
        raise ValidationError(
            f"manifest {manifest.name!r} has {len(manifest.classes)} classes, "
            f"episode needs {config.ways}"
        )
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))

    class_order = rng.permutation(len(manifest.classes))
    classes = tuple(manifest.classes[i] for i in class_order[: config.ways])

    pools = manifest.ids_by_class()
    per_s = config.n_support // config.ways
    per_q = config.n_query // config.ways
    per_t = config.n_test // config.ways

    support: list[tuple[str, str]] = []
    query: list[str] = []
    query_labels: list[str] = []
    test: list[tuple[str, str]] = []
    for label in classes:
        pool = pools[label]
        # Permute the full pool regardless of sizes so the generator state
        # consumed per class does not depend on n_support/n_query/n_test.
        order = rng.permutation(len(pool))
        if len(pool) < config.per_class_need:
            raise ValidationError(
                f"class {label!r} has {len(pool)} images, episode needs "
                f"{config.per_class_need} per class"
            )
        picked = [pool[i] for i in order]
        support.extend((img, label) for img in picked[:per_s])
        query.extend(picked[per_s : per_s + per_q])
        query_labels.extend([label] * per_q)
        test.extend((img, label) for img in picked[per_s + per_q : per_s + per_q + per_t])
    return Episode(
        classes=classes,
        support=tuple(support),
        query=tuple(query),
        query_labels=tuple(query_labels),
        test=tuple(test),
        config=config,
    )


def derive_run_seed(base_seed: int, run_index: int) -> int:
    """Stable per-run episode seed from a base seed."""
    seq = np.random.SeedSequence((int(base_seed), int(run_index)))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def export_episodes(episodes: list[Episode], path: str | Path) -> None:
    """Dump sampled episodes as JSON for audit."""
    Path(path).write_text(
        json.dumps([ep.to_json() for ep in episodes], indent=2) + "\n"
    )
