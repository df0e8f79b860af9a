"""Command-line entry points for the post-processing toolkit.

Subcommands map one-to-one onto library stages (`tile`, `stitch`, `tta`,
`fuse`, `merge-telophase`, `eval-det`, `sweep`, `eval-cls`, `youden`,
`stain-aug`, `synth`) plus `pipeline`, which composes
stitch -> TTA average -> cross-model fusion -> telophase merge -> threshold.

Results are JSON on stdout or `--out`. Exit codes: 0 success, 2 validation
error (structured error object on stderr), 64 usage error, 65 malformed
input file (with path/line/field diagnostics). `--config FILE` supplies
defaults from a JSON object; explicit flags win. Output bytes depend only on
inputs, flags, and `--seed`, never on `--threads`.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from . import fileio
from .errors import FileFormatError, MitoFuseError, ValidationError
from .fusion import FusedBox, FusionConfig, wbf
from .geometry import DetBox, ImageMeta
from .merge import MergeConfig, Reducer, merge_telophase
from .metrics import (
    ClsSample,
    MatchConfig,
    balanced_accuracy_at,
    ensemble_vote,
    match_detections,
    sweep_f1_macro,
    sweep_f1_pooled,
    youden_optimal,
)
from .pipeline import ImageJob, ModelInput, PipelineConfig, ViewInput, run_many
from .stain import PerturbConfig, StainModel, augment_rgb
from .synth import ScoreModel, SynthConfig, generate
from .tiling import make_grid, stitch
from .tta import Transform, TtaView, tta_fuse

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_USAGE = 64
EXIT_FORMAT = 65

THREADS_ENV = "MITOFUSE_THREADS"


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser
        self.message = message


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems instead of exiting."""

    def error(self, message):
        raise _UsageError(self, message)


def _opt(args: argparse.Namespace, key: str, default: Any) -> Any:
    """Resolve an option: explicit flag, then --config file, then default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    config = getattr(args, "config_values", None) or {}
    if key in config and config[key] is not None:
        return config[key]
    return default


def _require_opt(args: argparse.Namespace, key: str) -> Any:
    value = _opt(args, key, None)
    if value is None:
        flag = "--" + key.replace("_", "-")
        raise ValidationError("invalid-config", f"missing required option {flag}")
    return value


def _threads(args: argparse.Namespace) -> int:
    value = _opt(args, "threads", None)
    if value is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                value = int(env)
            except ValueError:
                raise ValidationError(
                    "invalid-config", f"{THREADS_ENV} must be an integer, got {env!r}"
                ) from None
        else:
            value = 1
    value = int(value)
    if value < 1:
        raise ValidationError("invalid-config", f"threads must be >= 1, got {value}")
    return value


def _emit(args: argparse.Namespace, obj: Any) -> None:
    text = fileio.dumps_stable(obj)
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _meta_from_args(args: argparse.Namespace) -> ImageMeta:
    return ImageMeta(
        width=int(_require_opt(args, "width")),
        height=int(_require_opt(args, "height")),
        mpp=float(_require_opt(args, "mpp")),
    )


def _as_boxes(records: Sequence[Any]) -> list[DetBox]:
    return [r.box if isinstance(r, FusedBox) else r for r in records]


def _as_fused_records(records: Sequence[Any]) -> list[FusedBox]:
    return [
        r if isinstance(r, FusedBox)
        else FusedBox(box=r, c_avg=r.score, t=1, c_final=r.score, member_ids=((r.model_id, i),))
        for i, r in enumerate(records)
    ]


def _same_image(files: Sequence[fileio.DetectionFile]) -> tuple[Any, ImageMeta]:
    first = files[0]
    for f in files[1:]:
        if f.image_id != first.image_id or f.meta != first.meta:
            raise ValidationError(
                "meta-mismatch",
                f"inputs describe different images: {first.image_id!r} vs {f.image_id!r}",
            )
    return first.image_id, first.meta


def _reducer(args: argparse.Namespace) -> Reducer:
    name = str(_opt(args, "reducer", "weighted-centroid")).replace("-", "_")
    try:
        return Reducer(name)
    except ValueError:
        raise ValidationError(
            "invalid-config",
            f"unknown reducer {name!r}; choose from "
            f"{[r.value.replace('_', '-') for r in Reducer]}",
        ) from None


def _report_obj(res) -> dict:
    return {
        "threshold": res.threshold, "tp": res.tp, "fp": res.fp, "fn": res.fn,
        "precision": res.precision, "recall": res.recall, "f1": res.f1,
    }


def _cls_obj(res) -> dict:
    return {
        "threshold": res.threshold,
        "sensitivity": res.sensitivity,
        "specificity": res.specificity,
        "j": res.j,
        "balanced_accuracy": res.balanced_accuracy,
    }


# ---------------------------------------------------------------- commands


def _cmd_tile(args) -> int:
    meta = _meta_from_args(args)
    grid = make_grid(
        meta,
        patch_size=int(_opt(args, "patch_size", 512)),
        overlap=int(_opt(args, "overlap", 64)),
    )
    gf = fileio.GridFile(image_id=_opt(args, "image_id", "image"), meta=meta, grid=grid)
    _emit(args, fileio.grid_to_obj(gf))
    return EXIT_OK


def _cmd_stitch(args) -> int:
    gf = fileio.load_grid(_require_opt(args, "grid"))
    by_id = {t.tile_id: t for t in gf.grid.tiles}
    per_tile = []
    for path in args.inputs:
        df = fileio.load_detections(path)
        if df.source is None or df.source.tile_id is None:
            raise ValidationError(
                "invalid-config", f"stitch input {path} must carry source.tile_id"
            )
        if df.source.tile_id not in by_id:
            raise ValidationError("unknown-tile", f"tile {df.source.tile_id} not in grid")
        per_tile.append((by_id[df.source.tile_id], _as_boxes(df.detections)))
    fused = stitch(gf.grid, per_tile, float(_opt(args, "iou", 0.5)), gf.image_id)
    out = fileio.DetectionFile(image_id=gf.image_id, meta=gf.meta, detections=list(fused))
    _emit(args, fileio.detections_to_obj(out))
    return EXIT_OK


def _cmd_tta(args) -> int:
    files = [fileio.load_detections(p) for p in args.inputs]
    image_id, meta = _same_image(files)
    views = []
    for path, df in zip(args.inputs, files):
        if df.source is None or df.source.tta_transform is None:
            raise ValidationError(
                "invalid-config", f"tta input {path} must carry source.tta_transform"
            )
        views.append(TtaView(
            transform=Transform(df.source.tta_transform),
            detections=_as_boxes(df.detections),
            meta=meta,
        ))
    fused = tta_fuse(views, float(_opt(args, "iou", 0.5)))
    model_id = fused[0].box.model_id if fused else None
    out = fileio.DetectionFile(
        image_id=image_id, meta=meta, detections=list(fused),
        source=fileio.SourceInfo(model_id=model_id),
    )
    _emit(args, fileio.detections_to_obj(out))
    return EXIT_OK


def _cmd_fuse(args) -> int:
    files = [fileio.load_detections(p) for p in args.inputs]
    image_id, meta = _same_image(files)
    boxes: list[DetBox] = []
    for df in files:
        boxes.extend(_as_boxes(df.detections))
    cfg = FusionConfig(
        iou_threshold=float(_opt(args, "iou", 0.5)),
        n_models=int(_opt(args, "n_models", len(files))),
        rescale=not bool(_opt(args, "no_rescale", False)),
    )
    fused = wbf(boxes, cfg)
    out = fileio.DetectionFile(image_id=image_id, meta=meta, detections=list(fused))
    _emit(args, fileio.detections_to_obj(out))
    return EXIT_OK


def _cmd_merge_telophase(args) -> int:
    df = fileio.load_detections(args.input)
    fused = _as_fused_records(df.detections)
    merged = merge_telophase(fused, df.meta, MergeConfig(
        radius_um=float(_opt(args, "merge_radius_um", 10.0)),
        reducer=_reducer(args),
    ))
    out = fileio.DetectionFile(image_id=df.image_id, meta=df.meta, detections=list(merged))
    _emit(args, fileio.detections_to_obj(out))
    return EXIT_OK


def _load_det_gt_pair(det_path: str, gt_path: str):
    df = fileio.load_detections(det_path)
    af = fileio.load_annotations(gt_path)
    if df.image_id != af.image_id or df.meta != af.meta:
        raise ValidationError(
            "meta-mismatch",
            f"detections are for image {df.image_id!r} but annotations for {af.image_id!r}",
        )
    return df, af


def _cmd_eval_det(args) -> int:
    df, af = _load_det_gt_pair(_require_opt(args, "det"), _require_opt(args, "gt"))
    res = match_detections(
        df.detections, af.points, df.meta,
        MatchConfig(match_dist_um=float(_opt(args, "match_dist_um", 7.5))),
        float(_opt(args, "threshold", 0.0)),
    )
    _emit(args, {"schema_version": fileio.SCHEMA_VERSION, **_report_obj(res)})
    return EXIT_OK


def _cmd_sweep(args) -> int:
    det_paths = args.det or []
    gt_paths = args.gt or []
    if not det_paths or len(det_paths) != len(gt_paths):
        raise ValidationError(
            "invalid-config",
            f"sweep needs matching --det/--gt pairs, got {len(det_paths)} and {len(gt_paths)}",
        )
    groups = []
    for dp, gp in zip(det_paths, gt_paths):
        df, af = _load_det_gt_pair(dp, gp)
        groups.append((df.detections, af.points, df.meta))
    cfg = MatchConfig(match_dist_um=float(_opt(args, "match_dist_um", 7.5)))
    if bool(_opt(args, "per_image", False)):
        best, rows = sweep_f1_macro(groups, cfg)
        curve = [{"threshold": t, "macro_f1": f} for t, f in rows]
        mode = "per-image"
    else:
        best, results = sweep_f1_pooled(groups, cfg)
        curve = [_report_obj(r) for r in results]
        mode = "pooled"
    _emit(args, {
        "schema_version": fileio.SCHEMA_VERSION,
        "mode": mode,
        "best_threshold": best,
        "curve": curve,
    })
    return EXIT_OK


def _combined_samples(records: Sequence[fileio.ClsRecord], vote: str) -> list[ClsSample]:
    n_models = len(records[0].probs)
    for r in records:
        if len(r.probs) != n_models:
            raise ValidationError(
                "length-mismatch",
                f"sample {r.sample_id!r} has {len(r.probs)} probabilities, expected {n_models}",
            )
    per_model = list(zip(*[r.probs for r in records]))
    combined = ensemble_vote(per_model, vote)
    return [
        ClsSample(id=r.sample_id, prob_atypical=p, truth=r.truth)
        for r, p in zip(records, combined)
    ]


def _cmd_eval_cls(args) -> int:
    records = fileio.load_cls_samples(_require_opt(args, "samples"))
    if not records:
        raise ValidationError("empty-eval", "no classification samples to evaluate")
    vote = str(_opt(args, "vote", "soft"))
    samples = _combined_samples(records, vote)
    threshold = _opt(args, "threshold", None)
    if threshold is None:
        res = youden_optimal(samples)
    else:
        res = balanced_accuracy_at(samples, float(threshold))
    _emit(args, {"schema_version": fileio.SCHEMA_VERSION, "vote": vote, **_cls_obj(res)})
    return EXIT_OK


def _cmd_youden(args) -> int:
    records = fileio.load_cls_samples(_require_opt(args, "samples"))
    for r in records:
        if len(r.probs) != 1:
            raise ValidationError(
                "invalid-config",
                f"youden expects one probability per sample, {r.sample_id!r} has "
                f"{len(r.probs)}; use eval-cls for ensembles",
            )
    samples = [ClsSample(id=r.sample_id, prob_atypical=r.probs[0], truth=r.truth)
               for r in records]
    res = youden_optimal(samples)
    _emit(args, {"schema_version": fileio.SCHEMA_VERSION, **_cls_obj(res)})
    return EXIT_OK


def _stain_model_from_config(config: dict) -> StainModel:
    background = float(config.get("background", 255.0))
    if "h_vector" in config or "e_vector" in config:
        if not ("h_vector" in config and "e_vector" in config):
            raise ValidationError(
                "invalid-config", "config must provide both h_vector and e_vector"
            )
        return StainModel.from_vectors(
            config["h_vector"], config["e_vector"], background=background
        )
    return StainModel.ruifrok_he(background=background)


def _cmd_stain_aug(args) -> int:
    config = getattr(args, "config_values", None) or {}
    model = _stain_model_from_config(config)
    pcfg = PerturbConfig(
        alpha_range=tuple(config.get("alpha_range", (0.95, 1.05))),
        beta_range=tuple(config.get("beta_range", (-0.05, 0.05))),
        seed=int(_opt(args, "seed", 0)),
    )
    raster = fileio.read_raster(_require_opt(args, "image"))
    out_path = _require_opt(args, "out")
    fileio.write_raster(out_path, augment_rgb(raster, pcfg, model))
    sys.stdout.write(fileio.dumps_stable({
        "schema_version": fileio.SCHEMA_VERSION,
        "image": str(getattr(args, "image")),
        "out": str(out_path),
        "seed": pcfg.seed,
    }))
    return EXIT_OK


def _synth_config(args, seed: int) -> SynthConfig:
    spacing = _opt(args, "pair_spacing_um", (4.0, 16.0))
    return SynthConfig(
        n_cells=int(_opt(args, "n_cells", 100)),
        telophase_fraction=float(_opt(args, "telophase_fraction", 0.0)),
        n_models=int(_opt(args, "n_models", 5)),
        dropout=float(_opt(args, "dropout", 0.0)),
        fp_rate=float(_opt(args, "fp_rate", 0.0)),
        loc_sigma_um=float(_opt(args, "loc_sigma_um", 0.0)),
        score_model=ScoreModel(),
        seed=seed,
        box_size_px=float(_opt(args, "box_size_px", 50.0)),
        pair_spacing_um=(float(spacing[0]), float(spacing[1])),
        min_separation_um=float(_opt(args, "min_separation_um", 0.0)),
    )


def _cmd_synth(args) -> int:
    meta = ImageMeta(
        width=int(_opt(args, "width", 4096)),
        height=int(_opt(args, "height", 4096)),
        mpp=float(_opt(args, "mpp", 0.25)),
    )
    image_id = _opt(args, "image_id", "image")
    cfg = _synth_config(args, int(_opt(args, "seed", 0)))
    gt, per_model = generate(meta, cfg, frame_id=image_id)

    out_dir = Path(_require_opt(args, "out_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    gt_path = out_dir / "gt.json"
    fileio.save_annotations(gt_path, fileio.AnnotationFile(
        image_id=image_id, meta=meta, points=list(gt),
    ))
    model_paths = []
    for m, dets in enumerate(per_model):
        path = out_dir / f"model-{m}.json"
        fileio.save_detections(path, fileio.DetectionFile(
            image_id=image_id, meta=meta, detections=list(dets),
            source=fileio.SourceInfo(model_id=m, tta_transform="identity"),
        ))
        model_paths.append(str(path))
    _emit(args, {
        "schema_version": fileio.SCHEMA_VERSION,
        "gt": str(gt_path),
        "models": model_paths,
    })
    return EXIT_OK


def _pipeline_config(args) -> PipelineConfig:
    threshold = _opt(args, "threshold", None)
    n_models = _opt(args, "n_models", None)
    return PipelineConfig(
        iou_threshold=float(_opt(args, "iou", 0.5)),
        n_models=int(n_models) if n_models is not None else None,
        rescale=not bool(_opt(args, "no_rescale", False)),
        merge_enabled=not bool(_opt(args, "no_merge", False)),
        merge_radius_um=float(_opt(args, "merge_radius_um", 10.0)),
        reducer=_reducer(args),
        match_dist_um=float(_opt(args, "match_dist_um", 7.5)),
        threshold=float(threshold) if threshold is not None else None,
        single_stage_tta=bool(_opt(args, "single_stage_tta", False)),
    )


def _synth_jobs(args) -> list[ImageJob]:
    meta = ImageMeta(
        width=int(_opt(args, "width", 4096)),
        height=int(_opt(args, "height", 4096)),
        mpp=float(_opt(args, "mpp", 0.25)),
    )
    base_seed = int(_opt(args, "seed", 0))
    jobs = []
    for i in range(int(_opt(args, "images", 4))):
        image_id = f"synth-{i}"
        cfg = _synth_config(args, base_seed + i)
        gt, per_model = generate(meta, cfg, frame_id=image_id)
        models = [
            ModelInput(model_id=m, views=[ViewInput(detections=dets)])
            for m, dets in enumerate(per_model)
        ]
        jobs.append(ImageJob(image_id=image_id, meta=meta, models=models, gt=list(gt)))
    return jobs


def _file_jobs(args) -> list[ImageJob]:
    grids: dict[Any, fileio.GridFile] = {}
    for path in args.grid or []:
        gf = fileio.load_grid(path)
        grids[gf.image_id] = gf
    annotations: dict[Any, fileio.AnnotationFile] = {}
    for path in args.gt or []:
        af = fileio.load_annotations(path)
        annotations[af.image_id] = af

    # image id -> model id -> transform -> detections, in first-seen order
    images: dict[Any, dict[Any, dict[str, list[DetBox]]]] = {}
    metas: dict[Any, ImageMeta] = {}
    for path in args.inputs:
        df = fileio.load_detections(path)
        if df.image_id in metas and metas[df.image_id] != df.meta:
            raise ValidationError(
                "meta-mismatch", f"conflicting image metadata for {df.image_id!r}"
            )
        metas[df.image_id] = df.meta
        if df.source is None or df.source.model_id is None:
            raise ValidationError(
                "invalid-config", f"pipeline input {path} must carry source.model_id"
            )
        transform = df.source.tta_transform or "identity"
        view_map = images.setdefault(df.image_id, {}).setdefault(df.source.model_id, {})
        view_map.setdefault(transform, []).extend(_as_boxes(df.detections))

    jobs = []
    for image_id, model_map in images.items():
        meta = metas[image_id]
        gf = grids.get(image_id)
        af = annotations.get(image_id)
        if af is not None and af.meta != meta:
            raise ValidationError(
                "meta-mismatch", f"annotation metadata for {image_id!r} disagrees"
            )
        models = []
        for model_id, view_map in model_map.items():
            views = []
            for transform, boxes in view_map.items():
                tile_framed = [b for b in boxes if b.frame_id != image_id]
                if tile_framed and len(tile_framed) != len(boxes):
                    raise ValidationError(
                        "frame-mismatch",
                        f"view {transform!r} of model {model_id!r} mixes slide-frame "
                        f"and tile-frame detections",
                    )
                if tile_framed:
                    if gf is None:
                        raise ValidationError(
                            "invalid-config",
                            f"tile-frame detections for {image_id!r} need --grid",
                        )
                    by_id = {t.tile_id: t for t in gf.grid.tiles}
                    groups: dict[int, list[DetBox]] = {}
                    for b in boxes:
                        if b.frame_id not in by_id:
                            raise ValidationError(
                                "unknown-tile", f"frame {b.frame_id!r} not in grid"
                            )
                        groups.setdefault(b.frame_id, []).append(b)
                    per_tile = [(by_id[tid], groups[tid]) for tid in sorted(groups)]
                    views.append(ViewInput(transform=Transform(transform), per_tile=per_tile))
                else:
                    views.append(ViewInput(transform=Transform(transform), detections=boxes))
            models.append(ModelInput(model_id=model_id, views=views))
        jobs.append(ImageJob(
            image_id=image_id, meta=meta, models=models,
            grid=gf.grid if gf is not None else None,
            gt=list(af.points) if af is not None else None,
        ))
    return jobs


def _cmd_pipeline(args) -> int:
    if bool(_opt(args, "synth", False)):
        jobs = _synth_jobs(args)
    else:
        if not args.inputs:
            raise ValidationError(
                "invalid-config", "pipeline needs detection files or --synth"
            )
        jobs = _file_jobs(args)
    cfg = _pipeline_config(args)
    results = run_many(jobs, cfg, _threads(args))
    images = []
    for (image_id, res), job in zip(results, jobs):
        images.append({
            "id": image_id,
            "width": job.meta.width,
            "height": job.meta.height,
            "mpp": job.meta.mpp,
            "threshold": res.threshold,
            "report": _report_obj(res.report) if res.report is not None else None,
            "detections": [fileio._det_record_to_obj(f) for f in res.kept],
        })
    _emit(args, {"schema_version": fileio.SCHEMA_VERSION, "images": images})
    return EXIT_OK


# ----------------------------------------------------------------- parser


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON file with default option values")
    sub.add_argument("--out", help="write the JSON result here instead of stdout")


def _add_meta_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--width", type=int)
    sub.add_argument("--height", type=int)
    sub.add_argument("--mpp", type=float)
    sub.add_argument("--image-id", dest="image_id")


def _add_synth_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--n-cells", dest="n_cells", type=int)
    sub.add_argument("--telophase-fraction", dest="telophase_fraction", type=float)
    sub.add_argument("--dropout", type=float)
    sub.add_argument("--fp-rate", dest="fp_rate", type=float)
    sub.add_argument("--loc-sigma-um", dest="loc_sigma_um", type=float)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--box-size-px", dest="box_size_px", type=float)
    sub.add_argument("--pair-spacing-um", dest="pair_spacing_um", type=float, nargs=2,
                     metavar=("LO", "HI"))
    sub.add_argument("--min-separation-um", dest="min_separation_um", type=float)


def build_parser() -> _Parser:
    parser = _Parser(prog="mitofuse", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("tile", help="emit a sliding-window grid manifest")
    _add_common(p)
    _add_meta_flags(p)
    p.add_argument("--patch-size", dest="patch_size", type=int)
    p.add_argument("--overlap", type=int)
    p.set_defaults(func=_cmd_tile)

    p = commands.add_parser("stitch", help="lift per-tile detections to slide frame")
    _add_common(p)
    p.add_argument("inputs", nargs="+", help="per-tile detection files")
    p.add_argument("--grid", help="grid manifest the tiles came from")
    p.add_argument("--iou", type=float)
    p.set_defaults(func=_cmd_stitch)

    p = commands.add_parser("tta", help="de-augment flipped views and average per model")
    _add_common(p)
    p.add_argument("inputs", nargs="+", help="per-view detection files")
    p.add_argument("--iou", type=float)
    p.set_defaults(func=_cmd_tta)

    p = commands.add_parser("fuse", help="cross-model weighted boxes fusion")
    _add_common(p)
    p.add_argument("inputs", nargs="+", help="per-model detection files")
    p.add_argument("--iou", type=float)
    p.add_argument("--n-models", dest="n_models", type=int)
    p.add_argument("--no-rescale", dest="no_rescale", action="store_const", const=True)
    p.set_defaults(func=_cmd_fuse)

    p = commands.add_parser("merge-telophase", help="merge nearby detections into one event")
    _add_common(p)
    p.add_argument("input", help="detection file")
    p.add_argument("--merge-radius-um", dest="merge_radius_um", type=float)
    p.add_argument("--reducer", choices=["weighted-centroid", "max-score", "envelope"])
    p.set_defaults(func=_cmd_merge_telophase)

    p = commands.add_parser("eval-det", help="precision/recall/F1 at one threshold")
    _add_common(p)
    p.add_argument("--det", help="detection file")
    p.add_argument("--gt", help="annotation file")
    p.add_argument("--threshold", type=float)
    p.add_argument("--match-dist-um", dest="match_dist_um", type=float)
    p.set_defaults(func=_cmd_eval_det)

    p = commands.add_parser("sweep", help="threshold sweep for the best F1")
    _add_common(p)
    p.add_argument("--det", action="append", help="detection file (repeatable)")
    p.add_argument("--gt", action="append", help="annotation file (repeatable)")
    p.add_argument("--match-dist-um", dest="match_dist_um", type=float)
    p.add_argument("--per-image", dest="per_image", action="store_const", const=True,
                   help="macro-average F1 per image instead of pooling counts")
    p.set_defaults(func=_cmd_sweep)

    p = commands.add_parser("eval-cls", help="ensemble vote plus balanced accuracy")
    _add_common(p)
    p.add_argument("--samples", help="classification samples file")
    p.add_argument("--vote", choices=["soft", "hard"])
    p.add_argument("--threshold", type=float,
                   help="fixed threshold; omit to optimize Youden's J")
    p.set_defaults(func=_cmd_eval_cls)

    p = commands.add_parser("youden", help="Youden's J optimal threshold")
    _add_common(p)
    p.add_argument("--samples", help="classification samples file")
    p.set_defaults(func=_cmd_youden)

    p = commands.add_parser("stain-aug", help="stain-space color augmentation")
    _add_common(p)
    p.add_argument("--image", help="input PNG/PPM raster")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_stain_aug)

    p = commands.add_parser("synth", help="generate synthetic GT and detections")
    _add_common(p)
    _add_meta_flags(p)
    _add_synth_flags(p)
    p.add_argument("--n-models", dest="n_models", type=int)
    p.add_argument("--out-dir", dest="out_dir", help="directory for gt.json and model-*.json")
    p.set_defaults(func=_cmd_synth)

    p = commands.add_parser(
        "pipeline",
        help="stitch -> TTA -> fuse -> merge -> threshold, end to end",
    )
    _add_common(p)
    p.add_argument("inputs", nargs="*", help="detection files (omit with --synth)")
    p.add_argument("--gt", action="append", help="annotation file (repeatable)")
    p.add_argument("--grid", action="append", help="grid manifest (repeatable)")
    p.add_argument("--iou", type=float)
    p.add_argument("--n-models", dest="n_models", type=int)
    p.add_argument("--no-rescale", dest="no_rescale", action="store_const", const=True)
    p.add_argument("--no-merge", dest="no_merge", action="store_const", const=True)
    p.add_argument("--merge-radius-um", dest="merge_radius_um", type=float)
    p.add_argument("--reducer", choices=["weighted-centroid", "max-score", "envelope"])
    p.add_argument("--match-dist-um", dest="match_dist_um", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--single-stage-tta", dest="single_stage_tta",
                   action="store_const", const=True,
                   help="feed every view into one fusion pass instead of per-model averages")
    p.add_argument("--threads", type=int)
    p.add_argument("--synth", action="store_const", const=True,
                   help="generate inputs instead of reading files")
    p.add_argument("--images", type=int, help="number of synthetic images")
    _add_meta_flags(p)
    _add_synth_flags(p)
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(exc.parser.format_usage())
        sys.stderr.write(f"{exc.parser.prog}: error: {exc.message}\n")
        return EXIT_USAGE
    try:
        args.config_values = _load_config(getattr(args, "config", None))
        return args.func(args)
    except FileFormatError as exc:
        sys.stderr.write(fileio.dumps_stable(exc.to_json_obj()))
        return EXIT_FORMAT
    except MitoFuseError as exc:
        sys.stderr.write(fileio.dumps_stable(exc.to_json_obj()))
        return EXIT_VALIDATION


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    doc = fileio._read_json(path)
    if not isinstance(doc, dict):
        raise FileFormatError("config must be a JSON object", path=str(path))
    return doc


def console_entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    console_entry()
