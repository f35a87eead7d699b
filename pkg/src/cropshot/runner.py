"""Experiment engine: sweeps, fusion evaluation, and latent analysis.

A method string names one way of building the support training set:

    baseline                  full images only, no crops
    gt-default                ground-truth boxes, 60 px padded crop + original
    sam-default, salient-default
                              derived boxes, three context crops + original
    gt | sam | salient        the source's default mode
    replace | minimal | multiple | pad_px:<px> | context_pct:<f>
                              explicit mode on ground-truth boxes
    <source>:<mode>[:<param>] explicit source and mode

Episodes are shared across methods within one (n_support, run) cell, so
per-run accuracy differences are paired and the sign test applies.
Support images whose requested box source is absent fall back to the
full image with a warning; absent *features* abort with the key list.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from cropshot import kernels
from cropshot.boxes import (
    AugmentMode,
    AugmentPlan,
    GT_DEFAULT_MODE,
    interpolate_context,
    plan_augments,
)
from cropshot.episodes import Episode, EpisodeConfig, derive_run_seed, sample_episode
from cropshot.errors import MissingDataError, MissingFeaturesError, ValidationError
from cropshot.featurestore import (
    FULL,
    CropRequest,
    FeatureKey,
    FeatureStore,
    canonical_key,
    key_for_crop,
)
from cropshot.fusion import FusionConfig, fused_predict
from cropshot.manifest import DatasetManifest, ImageRecord
from cropshot.probe import LinearHead, TrainConfig, normalize, predict, train_head
from cropshot.report import RunReport, RunRow, append_aggregates
from cropshot.transduction import SoftKMeansConfig, run_soft_kmeans
from cropshot.analysis import (
    centroid_shift,
    class_variance,
    pca_fit,
    pca_project,
    reference_centroids,
)

logger = logging.getLogger(__name__)

BOX_SOURCES = ("gt", "sam", "salient")
DEFAULT_SWEEP = (5, 10, 15, 20, 25)
DEFAULT_QUERY_BUDGET = 50  # transductive: n_support + n_query per episode

SOURCE_DEFAULT_MODES = {
    "gt": GT_DEFAULT_MODE,
    "sam": AugmentMode("multiple"),
    "salient": AugmentMode("multiple"),
}


@dataclass(frozen=True)
class MethodSpec:
    """Parsed method string; source/mode are None for the baseline."""

    name: str
    source: str | None
    mode: AugmentMode | None

    @property
    def is_baseline(self) -> bool:
        return self.source is None


def parse_method(text: str) -> MethodSpec:
    text = text.strip()
    if not text:
        raise ValidationError("empty method string")
    if text == "baseline":
        return MethodSpec(text, None, None)
    head, _, rest = text.partition(":")
    if head in BOX_SOURCES:
        mode = AugmentMode.parse(rest) if rest else SOURCE_DEFAULT_MODES[head]
        return MethodSpec(text, head, mode)
    if head in {f"{s}-default" for s in BOX_SOURCES}:
        if rest:
            raise ValidationError(f"{head} takes no parameter, got {text!r}")
        source = head.split("-", 1)[0]
        return MethodSpec(text, source, SOURCE_DEFAULT_MODES[source])
    # Bare mode names run against ground-truth boxes.
    if head in AugmentMode.KINDS:
        return MethodSpec(text, "gt", AugmentMode.parse(text))
    raise ValidationError(
        f"cannot parse method {text!r}: expected 'baseline', a box source "
        f"{BOX_SOURCES}, '<source>-default', or an augmentation mode "
        f"{AugmentMode.KINDS}"
    )


@dataclass(frozen=True)
class RunnerConfig:
    methods: tuple[str, ...] = ("baseline", "gt-default")
    sweep: tuple[int, ...] = DEFAULT_SWEEP
    runs: int = 100
    base_seed: int = 0
    setting: str = "inductive"
    ways: int = 5
    n_test: int = 100
    query_budget: int = DEFAULT_QUERY_BUDGET
    probe: TrainConfig = field(default_factory=TrainConfig)
    soft_kmeans: SoftKMeansConfig = field(default_factory=SoftKMeansConfig)

    def __post_init__(self):
        if self.runs < 1:
            raise ValidationError(f"runs must be >= 1, got {self.runs}")
        if not self.methods:
            raise ValidationError("need at least one method")
        if not self.sweep:
            raise ValidationError("need at least one support size")
        for method in self.methods:
            parse_method(method)

    def n_query(self, n_support: int) -> int:
        if self.setting == "inductive":
            return 0
        n_query = self.query_budget - n_support
        if n_query <= 0:
            raise ValidationError(
                f"query budget {self.query_budget} leaves no query items at "
                f"n_support={n_support}"
            )
        return n_query

    def episode_config(self, n_support: int, seed: int) -> EpisodeConfig:
        return EpisodeConfig(
            ways=self.ways,
            n_support=n_support,
            n_query=self.n_query(n_support),
            n_test=self.n_test,
            seed=seed,
            setting=self.setting,
        )

    def to_metadata(self) -> dict:
        return {
            "methods": list(self.methods),
            "sweep": list(self.sweep),
            "runs": self.runs,
            "base_seed": self.base_seed,
            "setting": self.setting,
            "ways": self.ways,
            "n_test": self.n_test,
            "query_budget": self.query_budget,
            "probe": self.probe.to_metadata(),
            "soft_kmeans": self.soft_kmeans.to_metadata(),
            "backend": kernels.BACKEND,
        }


def _prep(x: np.ndarray, config: TrainConfig) -> np.ndarray:
    return normalize(x) if config.normalize_features else x


def support_plan(record: ImageRecord, spec: MethodSpec) -> AugmentPlan | None:
    """Crop plan for one support image, or None when only FULL is used.

    A missing box source degrades to the un-augmented image (warned);
    plan-crops offers the strict check up front.
    """
    if spec.is_baseline:
        return None
    box = record.box_for_source(spec.source)
    if box is None:
        logger.warning(
            "image %s has no %s box; using the full image only",
            record.image_id,
            spec.source,
        )
        return None
    return plan_augments(spec.mode, box, record.width, record.height)


def support_keys(record: ImageRecord, spec: MethodSpec) -> list[FeatureKey]:
    plan = support_plan(record, spec)
    keys = []
    if plan is None or plan.keep_original:
        keys.append(canonical_key(record.image_id, FULL))
    if plan is not None:
        for box in plan.crops:
            keys.append(key_for_crop(record.image_id, box, record.width, record.height))
    return keys


def episode_keys(manifest: DatasetManifest, episode: Episode, spec: MethodSpec) -> list[FeatureKey]:
    """Every store key one episode + method evaluation reads."""
    keys: list[FeatureKey] = []
    for image_id, _ in episode.support:
        keys.extend(support_keys(manifest.by_id(image_id), spec))
    for image_id in episode.query:
        keys.append(canonical_key(image_id, FULL))
    for image_id, _ in episode.test:
        keys.append(canonical_key(image_id, FULL))
    return keys


def check_features(store: FeatureStore, keys) -> None:
    unique: dict[FeatureKey, None] = dict.fromkeys(keys)
    missing = store.missing(unique)
    if missing:
        raise MissingFeaturesError([str(k) for k in missing])


def evaluate_episode(
    manifest: DatasetManifest,
    store: FeatureStore,
    episode: Episode,
    spec: MethodSpec,
    probe_config: TrainConfig,
    kmeans_config: SoftKMeansConfig,
) -> float:
    """Train per the method and return test accuracy."""
    features: list[np.ndarray] = []
    labels: list[int] = []
    for image_id, label in episode.support:
        idx = episode.class_index(label)
        for key in support_keys(manifest.by_id(image_id), spec):
            features.append(store.get(key))
            labels.append(idx)

    weights = [1.0] * len(features)
    if episode.config.setting == "transductive":
        query = np.stack([store.get(canonical_key(i, FULL)) for i in episode.query])
        support_matrix = np.stack(features)
        if probe_config.normalize_features:
            query = normalize(query)
            support_matrix = normalize(support_matrix)
        result = run_soft_kmeans(
            support_matrix,
            np.asarray(labels),
            query,
            n_classes=len(episode.classes),
            config=kmeans_config,
        )
        for image_id, pseudo in zip(episode.query, result.pseudolabels):
            features.append(store.get(canonical_key(image_id, FULL)))
            labels.append(int(pseudo))
            weights.append(1.0)

    trained = train_head(
        np.stack(features),
        np.asarray(labels),
        n_classes=len(episode.classes),
        weights=np.asarray(weights),
        config=probe_config,
    )

    correct = 0
    for image_id, label in episode.test:
        x = _prep(store.get(canonical_key(image_id, FULL)), probe_config)
        predicted, _ = predict(trained.head, x)
        correct += predicted == episode.class_index(label)
    return correct / len(episode.test)


def run_benchmark(
    manifest: DatasetManifest,
    store: FeatureStore,
    config: RunnerConfig,
) -> RunReport:
    """Evaluate every (method, support size, run) cell and aggregate.

    Rows are ordered by (method position, support size, run index); the
    report then carries one mean and one ci95 row per cell group.
    """
    specs = [parse_method(m) for m in config.methods]
    seeds = [derive_run_seed(config.base_seed, r) for r in range(config.runs)]

    episodes: dict[tuple[int, int], Episode] = {}
    for r, seed in enumerate(seeds):
        for n_support in config.sweep:
            episodes[(r, n_support)] = sample_episode(
                manifest, config.episode_config(n_support, seed)
            )

    required: list[FeatureKey] = []
    for episode in episodes.values():
        for spec in specs:
            required.extend(episode_keys(manifest, episode, spec))
    check_features(store, required)

    accuracy: dict[tuple[str, int, int], float] = {}
    for (r, n_support), episode in episodes.items():
        for spec in specs:
            accuracy[(spec.name, n_support, r)] = evaluate_episode(
                manifest, store, episode, spec, config.probe, config.soft_kmeans
            )

    report = RunReport(metadata={"report": "run", "dataset": manifest.name,
                                 **config.to_metadata()})
    for spec in specs:
        for n_support in config.sweep:
            for r, seed in enumerate(seeds):
                report.rows.append(
                    RunRow(
                        dataset=manifest.name,
                        setting=config.setting,
                        method=spec.name,
                        n_labeled=n_support,
                        seed=str(seed),
                        accuracy=accuracy[(spec.name, n_support, r)],
                    )
                )
    append_aggregates(report)
    return report


@dataclass(frozen=True)
class SignTest:
    wins: int
    losses: int
    ties: int
    p_value: float


def paired_sign_test(a, b) -> SignTest:
    """One-sided exact binomial test that per-run values in a exceed b.

    Ties are discarded; p = P[X >= wins] for X ~ Binomial(wins+losses, 1/2).
    """
    a = list(a)
    b = list(b)
    if len(a) != len(b):
        raise ValidationError(f"paired test needs equal lengths, got {len(a)} vs {len(b)}")
    wins = sum(1 for x, y in zip(a, b) if x > y)
    losses = sum(1 for x, y in zip(a, b) if x < y)
    ties = len(a) - wins - losses
    n = wins + losses
    if n == 0:
        return SignTest(0, 0, ties, 1.0)
    favorable = sum(math.comb(n, k) for k in range(wins, n + 1))
    return SignTest(wins, losses, ties, favorable / 2**n)


# -- inference-time fusion ----------------------------------------------


@dataclass(frozen=True)
class FusionRunConfig:
    runs: int = 100
    base_seed: int = 0
    ways: int = 5
    n_support: int = 25
    n_test: int = 100
    crop_source: str = "gt"
    probe: TrainConfig = field(default_factory=TrainConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)

    def __post_init__(self):
        if self.runs < 1:
            raise ValidationError(f"runs must be >= 1, got {self.runs}")
        if self.crop_source not in BOX_SOURCES:
            raise ValidationError(
                f"crop_source must be one of {BOX_SOURCES}, got {self.crop_source!r}"
            )

    def to_metadata(self) -> dict:
        return {
            "runs": self.runs,
            "base_seed": self.base_seed,
            "ways": self.ways,
            "n_support": self.n_support,
            "n_test": self.n_test,
            "crop_source": self.crop_source,
            "probe": self.probe.to_metadata(),
            "fusion": self.fusion.to_metadata(),
            "backend": kernels.BACKEND,
        }


def ladder_keys(record: ImageRecord, source: str, ladder) -> list[FeatureKey]:
    """Store keys of a test image's context-ladder crops, tightest first."""
    box = record.box_for_source(source)
    if box is None:
        return []
    keys = []
    for fraction in ladder:
        crop = interpolate_context(box, fraction, record.width, record.height)
        key = key_for_crop(record.image_id, crop, record.width, record.height)
        if key.crop is not None and key not in keys:
            keys.append(key)
    return keys


def run_fusion(
    manifest: DatasetManifest,
    store: FeatureStore,
    config: FusionRunConfig,
) -> tuple[RunReport, list[tuple]]:
    """Score full-image predictions against confidence-gated crop fusion.

    The head is trained on un-augmented support features, so any gap
    comes from inference-time crops alone. Returns the report and the
    per-sample audit rows (image_id, full_confidence, provenance,
    predicted label, correct).
    """
    seeds = [derive_run_seed(config.base_seed, r) for r in range(config.runs)]
    metadata = {"report": "fuse", "dataset": manifest.name, **config.to_metadata()}
    report = RunReport(metadata=metadata)
    audit: list[tuple] = []
    baseline_spec = MethodSpec("baseline", None, None)

    episodes = []
    required: list[FeatureKey] = []
    for seed in seeds:
        episode_config = EpisodeConfig(
            ways=config.ways,
            n_support=config.n_support,
            n_query=0,
            n_test=config.n_test,
            seed=seed,
            setting="inductive",
        )
        episode = sample_episode(manifest, episode_config)
        episodes.append(episode)
        required.extend(episode_keys(manifest, episode, baseline_spec))
        for image_id, _ in episode.test:
            required.extend(
                ladder_keys(
                    manifest.by_id(image_id), config.crop_source, config.fusion.crop_ladder
                )
            )
    check_features(store, required)

    rows_baseline: list[RunRow] = []
    rows_fused: list[RunRow] = []
    for seed, episode in zip(seeds, episodes):
        features = []
        labels = []
        for image_id, label in episode.support:
            features.append(store.get(canonical_key(image_id, FULL)))
            labels.append(episode.class_index(label))
        trained = train_head(
            np.stack(features),
            np.asarray(labels),
            n_classes=len(episode.classes),
            config=config.probe,
        )

        base_correct = 0
        fused_correct = 0
        for image_id, label in episode.test:
            record = manifest.by_id(image_id)
            truth = episode.class_index(label)
            full = _prep(store.get(canonical_key(image_id, FULL)), config.probe)
            crops = [
                _prep(store.get(k), config.probe)
                for k in ladder_keys(record, config.crop_source, config.fusion.crop_ladder)
            ]
            base_label, _ = predict(trained.head, full)
            fused = fused_predict(trained.head, full, crops, config.fusion)
            base_correct += base_label == truth
            fused_correct += fused.label == truth
            audit.append(
                (
                    image_id,
                    fused.full_confidence,
                    fused.provenance,
                    episode.classes[fused.label],
                    fused.label == truth,
                )
            )
        rows_baseline.append(
            RunRow(manifest.name, "inductive", "baseline", config.n_support,
                   str(seed), base_correct / len(episode.test))
        )
        rows_fused.append(
            RunRow(manifest.name, "inductive", "fused", config.n_support,
                   str(seed), fused_correct / len(episode.test))
        )
    report.rows.extend(rows_baseline)
    report.rows.extend(rows_fused)
    append_aggregates(report)
    return report, audit


# -- latent-space analysis ----------------------------------------------


@dataclass(frozen=True)
class AnalysisResult:
    fractions: tuple[float, ...]
    variances: tuple[float, ...]
    distances: tuple[float, ...]
    scatter: tuple[tuple[float, float, str, int], ...]


def _features_at_fraction(
    manifest: DatasetManifest, store: FeatureStore, fraction: float
) -> dict[str, np.ndarray]:
    by_class: dict[str, list[np.ndarray]] = {label: [] for label in manifest.classes}
    for record in manifest.images:
        if record.gt_box is None:
            raise MissingDataError(f"image {record.image_id} has no gt box for analysis")
        crop = interpolate_context(record.gt_box, fraction, record.width, record.height)
        key = key_for_crop(record.image_id, crop, record.width, record.height)
        by_class[record.class_label].append(store.get(key))
    return {label: np.stack(rows) for label, rows in by_class.items() if rows}


def run_analysis(
    manifest: DatasetManifest,
    store: FeatureStore,
    fractions=tuple(i / 10 for i in range(11)),
    scatter_fraction: float = 0.0,
) -> AnalysisResult:
    """Variance / centroid-shift curve over the context grid, plus a 2-D
    projection of full images and their tightest crops.

    The PCA basis and reference centroids come from uncropped features
    only; cropped features are projected into that fixed frame.
    """
    full = {
        label: np.stack([store.get(canonical_key(i, FULL)) for i in ids])
        for label, ids in manifest.ids_by_class().items()
    }
    reference = reference_centroids(full)

    variances = []
    distances = []
    for fraction in fractions:
        grouped = _features_at_fraction(manifest, store, fraction)
        variances.append(class_variance(grouped))
        distances.append(centroid_shift(grouped, reference))

    basis = pca_fit(np.concatenate([full[label] for label in manifest.classes]))
    scatter: list[tuple[float, float, str, int]] = []
    cropped = _features_at_fraction(manifest, store, scatter_fraction)
    for label in manifest.classes:
        for row in pca_project(basis, full[label]):
            scatter.append((float(row[0]), float(row[1]), label, 0))
    for label in manifest.classes:
        for row in pca_project(basis, cropped[label]):
            scatter.append((float(row[0]), float(row[1]), label, 1))
    return AnalysisResult(
        fractions=tuple(float(f) for f in fractions),
        variances=tuple(variances),
        distances=tuple(distances),
        scatter=tuple(scatter),
    )


# -- crop planning -------------------------------------------------------


def plan_crops(
    manifest: DatasetManifest,
    methods,
    include_fusion_ladder: bool = False,
    fusion_config: FusionConfig | None = None,
    strict: bool = True,
) -> list[CropRequest]:
    """Crop requests covering every image for the given methods, plus FULL.

    Deduplicated by (image_id, crop); with strict=True a method whose box
    source is missing anywhere fails up front listing the image ids.
    """
    specs = [parse_method(m) for m in methods]
    missing: dict[str, list[str]] = {}
    requests: dict[FeatureKey, CropRequest] = {}

    def add(request: CropRequest) -> None:
        requests.setdefault(request.key(), request)

    for record in manifest.images:
        add(CropRequest(record.image_id, FULL, "support"))
        for spec in specs:
            if spec.is_baseline:
                continue
            box = record.box_for_source(spec.source)
            if box is None:
                missing.setdefault(spec.source, []).append(record.image_id)
                continue
            plan = plan_augments(spec.mode, box, record.width, record.height)
            for crop in plan.crops:
                key = key_for_crop(record.image_id, crop, record.width, record.height)
                add(CropRequest(record.image_id, key.crop, "support"))
        if include_fusion_ladder:
            fusion = fusion_config or FusionConfig()
            sources = {s.source for s in specs if s.source} or {"gt"}
            for source in sorted(sources):
                for key in ladder_keys(record, source, fusion.crop_ladder):
                    add(CropRequest(record.image_id, key.crop, "test"))

    if missing and strict:
        detail = "; ".join(
            f"{source}: {', '.join(ids[:5])}{'...' if len(ids) > 5 else ''} "
            f"({len(ids)} images)"
            for source, ids in sorted(missing.items())
        )
        raise MissingDataError(f"missing box sources - {detail}")
    return list(requests.values())
