"""Post-processing, fusion, and evaluation toolkit for ensemble
mitotic-figure detection on histology slides.

The library is model-agnostic: it consumes detection boxes and class
probabilities that any detector or classifier produced and provides the
stages downstream of inference — sliding-window stitching, test-time
augmentation bookkeeping, weighted boxes fusion with consensus rescaling,
telophase double-detection merging, threshold selection, evaluation, stain
color augmentation, and a synthetic-data harness that makes all of it
testable end to end.
"""

from .errors import FileFormatError, MitoFuseError, ValidationError
from .geometry import (
    Axis,
    DetBox,
    ImageMeta,
    PointAnnotation,
    centroid_distance_um,
    flip_box,
    iou,
)
from .fusion import (
    FusedBox,
    FusionConfig,
    as_fused,
    consensus_rescale,
    cross_model_average,
    nms,
    wbf,
)
from .tta import Transform, TtaView, deaugment, tta_fuse
from .merge import MergeConfig, Reducer, merge_telophase
from .tiling import Tile, TileGrid, make_grid, stitch, to_slide_frame
from .metrics import (
    ClsEvalResult,
    ClsSample,
    DetEvalResult,
    MatchConfig,
    balanced_accuracy_at,
    ensemble_vote,
    match_detections,
    split_85_15,
    sweep_f1,
    sweep_f1_macro,
    sweep_f1_pooled,
    youden_candidates,
    youden_optimal,
)
from .stain import (
    ConcentrationMap,
    PerturbConfig,
    StainModel,
    augment_rgb,
    deconvolve,
    od_to_rgb,
    perturb,
    reconstruct,
    rgb_to_od,
)
from .synth import ScoreModel, SynthConfig, generate
from .pipeline import (
    ImageJob,
    ModelInput,
    PipelineConfig,
    PipelineResult,
    ViewInput,
    run_image,
    run_many,
)

__version__ = "0.1.0"

__all__ = [
    "Axis",
    "ClsEvalResult",
    "ClsSample",
    "ConcentrationMap",
    "DetBox",
    "DetEvalResult",
    "FileFormatError",
    "FusedBox",
    "FusionConfig",
    "ImageJob",
    "ImageMeta",
    "MatchConfig",
    "MergeConfig",
    "MitoFuseError",
    "ModelInput",
    "PerturbConfig",
    "PipelineConfig",
    "PipelineResult",
    "PointAnnotation",
    "Reducer",
    "ScoreModel",
    "StainModel",
    "SynthConfig",
    "Tile",
    "TileGrid",
    "Transform",
    "TtaView",
    "ValidationError",
    "ViewInput",
    "as_fused",
    "augment_rgb",
    "balanced_accuracy_at",
    "centroid_distance_um",
    "consensus_rescale",
    "cross_model_average",
    "deaugment",
    "deconvolve",
    "ensemble_vote",
    "flip_box",
    "generate",
    "iou",
    "make_grid",
    "match_detections",
    "merge_telophase",
    "nms",
    "od_to_rgb",
    "perturb",
    "reconstruct",
    "rgb_to_od",
    "run_image",
    "run_many",
    "split_85_15",
    "stitch",
    "sweep_f1",
    "sweep_f1_macro",
    "sweep_f1_pooled",
    "to_slide_frame",
    "tta_fuse",
    "wbf",
    "youden_candidates",
    "youden_optimal",
]
