"""End-to-end post-processing flow for one or more slides.

Stage order per image: stitch each view's tiles to slide coordinates, map
augmented views back and average them per model, fuse across models with
consensus rescaling, merge telophase doubles, then apply (or sweep) the
confidence threshold. Each stage is the corresponding library call; this
module only composes them and carries results between stages.

Multi-image runs may be threaded; results are keyed and emitted in input
order, so output never depends on scheduling.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ValidationError
from .fusion import FusedBox, FusionConfig, wbf
from .geometry import DetBox, FrameId, ImageMeta, PointAnnotation
from .merge import MergeConfig, Reducer, merge_telophase
from .metrics import DetEvalResult, MatchConfig, match_detections, sweep_f1
from .tiling import Tile, TileGrid, stitch
from .tta import Transform, TtaView, deaugment, tta_fuse


@dataclass(frozen=True)
class PipelineConfig:
    """Stage knobs for the reference flow.

    ``n_models`` of None means "use the number of model inputs actually
    provided". ``threshold`` of None sweeps for the F1-optimal threshold when
    ground truth is available and keeps everything otherwise.
    ``single_stage_tta`` skips the per-model view average and feeds every
    de-augmented view straight into the cross-model fusion.
    """

    iou_threshold: float = 0.5
    n_models: int | None = None
    rescale: bool = True
    merge_enabled: bool = True
    merge_radius_um: float = 10.0
    reducer: Reducer = Reducer.WEIGHTED_CENTROID
    match_dist_um: float = 7.5
    threshold: float | None = None
    single_stage_tta: bool = False

    def __post_init__(self):
        if self.n_models is not None and self.n_models < 1:
            raise ValidationError("invalid-config", f"n_models must be >= 1, got {self.n_models}")
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ValidationError(
                "invalid-config", f"threshold must be in [0, 1], got {self.threshold}"
            )


@dataclass
class ViewInput:
    """One model's predictions on one (possibly flipped) view of the slide.

    Detections live either directly in the view's frame (``detections``) or
    in per-tile frames (``per_tile``), in which case the job must carry the
    grid used to cut them.
    """

    transform: Transform = Transform.IDENTITY
    detections: list[DetBox] | None = None
    per_tile: list[tuple[Tile, list[DetBox]]] | None = None

    def __post_init__(self):
        if (self.detections is None) == (self.per_tile is None):
            raise ValidationError(
                "invalid-config", "exactly one of detections / per_tile must be set"
            )


@dataclass
class ModelInput:
    model_id: int | str
    views: list[ViewInput]


@dataclass
class ImageJob:
    image_id: FrameId
    meta: ImageMeta
    models: list[ModelInput]
    grid: TileGrid | None = None
    gt: list[PointAnnotation] | None = None


@dataclass
class PipelineResult:
    fused: list[FusedBox]             # post-merge, pre-threshold
    kept: list[FusedBox]              # at or above the applied threshold
    threshold: float
    report: DetEvalResult | None = None
    curve: list[DetEvalResult] = field(default_factory=list)


def _view_to_slide(view: ViewInput, job: ImageJob, cfg: PipelineConfig) -> list[DetBox]:
    """Resolve one view to detections in the (possibly flipped) slide frame."""
    if view.per_tile is not None:
        if job.grid is None:
            raise ValidationError("invalid-config", "per-tile detections given without a grid")
        fused = stitch(job.grid, view.per_tile, cfg.iou_threshold, job.image_id)
        return [f.box for f in fused]
    return list(view.detections or [])


def run_image(job: ImageJob, cfg: PipelineConfig) -> PipelineResult:
    """Run the full post-processing flow on one slide."""
    per_model_boxes: list[DetBox] = []
    for model in job.models:
        views = [
            TtaView(transform=v.transform, detections=_view_to_slide(v, job, cfg), meta=job.meta)
            for v in model.views
        ]
        if cfg.single_stage_tta:
            for v in views:
                per_model_boxes.extend(deaugment(v))
        else:
            averaged = tta_fuse(views, cfg.iou_threshold)
            per_model_boxes.extend(f.box for f in averaged)

    n_models = cfg.n_models if cfg.n_models is not None else max(1, len(job.models))
    fused = wbf(per_model_boxes, FusionConfig(
        iou_threshold=cfg.iou_threshold, n_models=n_models, rescale=cfg.rescale,
    ))
    if cfg.merge_enabled:
        fused = merge_telophase(
            fused, job.meta, MergeConfig(radius_um=cfg.merge_radius_um, reducer=cfg.reducer)
        )

    match_cfg = MatchConfig(match_dist_um=cfg.match_dist_um)
    curve: list[DetEvalResult] = []
    report: DetEvalResult | None = None
    if cfg.threshold is not None:
        threshold = cfg.threshold
        if job.gt is not None:
            report = match_detections(fused, job.gt, job.meta, match_cfg, threshold)
    elif job.gt is not None:
        threshold, curve = sweep_f1(fused, job.gt, job.meta, match_cfg)
        report = match_detections(fused, job.gt, job.meta, match_cfg, threshold)
    else:
        threshold = 0.0
    kept = [f for f in fused if f.c_final >= threshold]
    return PipelineResult(fused=fused, kept=kept, threshold=threshold,
                          report=report, curve=curve)


def run_many(
    jobs: Sequence[ImageJob], cfg: PipelineConfig, threads: int = 1
) -> list[tuple[FrameId, PipelineResult]]:
    """Run several slides, optionally in a thread pool.

    Results come back in job order whatever the thread count, so downstream
    serialization is byte-stable.
    """
    if threads < 1:
        raise ValidationError("invalid-config", f"threads must be >= 1, got {threads}")
    if threads == 1 or len(jobs) <= 1:
        results = [run_image(j, cfg) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda j: run_image(j, cfg), jobs))
    return [(j.image_id, r) for j, r in zip(jobs, results)]
