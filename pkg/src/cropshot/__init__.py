"""Few-shot image-classification evaluation on precomputed features,
with object-centric crop augmentation, transductive pseudolabeling,
confidence-gated multi-crop inference, and latent-space analysis.
"""

from cropshot.boxes import (
    AugmentMode,
    AugmentPlan,
    BoundingBox,
    full_image_box,
    interpolate_context,
    mask_to_box,
    pad_box,
    plan_augments,
)
from cropshot.episodes import Episode, EpisodeConfig, derive_run_seed, sample_episode
from cropshot.errors import (
    CodecError,
    CropshotError,
    EmptyMaskError,
    FeatureNotFoundError,
    MissingDataError,
    MissingFeaturesError,
    ValidationError,
)
from cropshot.featurestore import (
    FULL,
    CropRequest,
    FeatureKey,
    FeatureStore,
    canonical_key,
    key_for_crop,
    read_crop_manifest,
    read_store,
    write_crop_manifest,
    write_store,
)
from cropshot.fusion import FusedPrediction, FusionConfig, fused_predict
from cropshot.manifest import (
    DatasetManifest,
    ImageRecord,
    load_manifest,
    save_manifest,
)
from cropshot.probe import (
    LinearHead,
    TrainConfig,
    TrainResult,
    normalize,
    predict,
    predict_proba,
    train_head,
)
from cropshot.runner import (
    FusionRunConfig,
    MethodSpec,
    RunnerConfig,
    paired_sign_test,
    parse_method,
    plan_crops,
    run_analysis,
    run_benchmark,
    run_fusion,
)
from cropshot.synth import SynthConfig, SynthDataset, generate, make_dataset
from cropshot.transduction import (
    SoftKMeansConfig,
    SoftKMeansResult,
    init_centroids,
    run_soft_kmeans,
    soft_assign,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentMode",
    "AugmentPlan",
    "BoundingBox",
    "CodecError",
    "CropRequest",
    "CropshotError",
    "DatasetManifest",
    "EmptyMaskError",
    "Episode",
    "EpisodeConfig",
    "FULL",
    "FeatureKey",
    "FeatureNotFoundError",
    "FeatureStore",
    "FusedPrediction",
    "FusionConfig",
    "FusionRunConfig",
    "ImageRecord",
    "LinearHead",
    "MethodSpec",
    "MissingDataError",
    "MissingFeaturesError",
    "RunnerConfig",
    "SoftKMeansConfig",
    "SoftKMeansResult",
    "SynthConfig",
    "SynthDataset",
    "TrainConfig",
    "TrainResult",
    "ValidationError",
    "canonical_key",
    "derive_run_seed",
    "full_image_box",
    "fused_predict",
    "generate",
    "init_centroids",
    "interpolate_context",
    "key_for_crop",
    "load_manifest",
    "make_dataset",
    "mask_to_box",
    "normalize",
    "pad_box",
    "paired_sign_test",
    "parse_method",
    "plan_augments",
    "plan_crops",
    "predict",
    "predict_proba",
    "read_crop_manifest",
    "read_store",
    "run_analysis",
    "run_benchmark",
    "run_fusion",
    "run_soft_kmeans",
    "sample_episode",
    "save_manifest",
    "soft_assign",
    "train_head",
    "write_crop_manifest",
    "write_store",
]
