"""JSON interchange formats and raster I/O.

Four document kinds, all versioned with ``schema_version``: detection files
(per-model or fused box lists), annotation files (ground-truth points plus a
class vocabulary), classification sample files (per-case probabilities with
truth labels), and tile-grid manifests. Field order is fixed at save time so
identical content serializes to identical bytes, and ``load(save(x)) == x``.

Coordinates are stored in pixels; the microns-per-pixel scale rides along in
the image metadata and distances in microns are converted where they are
used. Rasters move through PNG or binary PPM via Pillow.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from PIL import Image

from .errors import FileFormatError, ValidationError
from .geometry import DetBox, FrameId, ImageMeta, PointAnnotation
from .fusion import FusedBox
from .tiling import Tile, TileGrid

SCHEMA_VERSION = "1"

DEFAULT_CLASS_VOCABULARY = ("mitotic", "atypical-mitotic")

_TRUTH_VALUES = ("typical", "atypical")
_TTA_NAMES = ("identity", "hflip", "vflip")


@dataclass(frozen=True)
class SourceInfo:
    """Provenance of a detection file: which model, TTA view, and tile."""

    model_id: int | str | None = None
    tta_transform: str | None = None
    tile_id: int | None = None

    def __post_init__(self):
        if self.tta_transform is not None and self.tta_transform not in _TTA_NAMES:
            raise ValidationError(
                "invalid-config",
                f"tta_transform must be one of {_TTA_NAMES}, got {self.tta_transform!r}",
            )


@dataclass
class DetectionFile:
    image_id: FrameId
    meta: ImageMeta
    detections: list[Any]  # DetBox or FusedBox
    source: SourceInfo | None = None


@dataclass
class AnnotationFile:
    image_id: FrameId
    meta: ImageMeta
    points: list[PointAnnotation] = field(default_factory=list)
    class_vocabulary: tuple[str, ...] = DEFAULT_CLASS_VOCABULARY


@dataclass(frozen=True)
class ClsRecord:
    """One classification case: per-model atypical probabilities plus truth."""

    sample_id: str
    probs: tuple[float, ...]
    truth: str

    def __post_init__(self):
        if self.truth not in _TRUTH_VALUES:
            raise ValidationError(
                "invalid-config", f"truth must be one of {_TRUTH_VALUES}, got {self.truth!r}"
            )
        if not self.probs:
            raise ValidationError("invalid-config", "probs must be non-empty")
        for p in self.probs:
            if not 0.0 <= p <= 1.0:
                raise ValidationError("invalid-config", f"probability {p} outside [0, 1]")


@dataclass
class GridFile:
    image_id: FrameId
    meta: ImageMeta
    grid: TileGrid


def dumps_stable(obj: Any) -> str:
    """Serialize with fixed 2-space indentation and a trailing newline.

    Key order is the insertion order of the dicts built by the ``*_to_obj``
    helpers, so equal content yields equal bytes.
    """
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _read_json(path: str | Path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(f"cannot read file: {exc}", path=str(path)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(
            f"invalid JSON: {exc.msg}", path=str(path), line=exc.lineno
        ) from exc


def _need(obj: dict, key: str, path: str, where: str) -> Any:
    if not isinstance(obj, dict):
        raise FileFormatError(f"expected object at {where}", path=path, field=where)
    if key not in obj:
        raise FileFormatError(f"missing field {key!r}", path=path, field=f"{where}.{key}" if where else key)
    return obj[key]


def _num(value: Any, path: str, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FileFormatError(f"expected number, got {value!r}", path=path, field=where)
    return value


def _int(value: Any, path: str, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise FileFormatError(f"expected integer, got {value!r}", path=path, field=where)
    return value


def _check_version(doc: Any, path: str) -> None:
    version = _need(doc, "schema_version", path, "")
    if version != SCHEMA_VERSION:
        raise FileFormatError(
            f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION!r})",
            path=path,
            field="schema_version",
            code="unsupported-schema",
        )


def _meta_to_obj(image_id: FrameId, meta: ImageMeta) -> dict:
    return {"id": image_id, "width": meta.width, "height": meta.height, "mpp": meta.mpp}


def _meta_from_obj(obj: Any, path: str) -> tuple[FrameId, ImageMeta]:
    image_id = _need(obj, "id", path, "image")
    if not isinstance(image_id, (str, int)) or isinstance(image_id, bool):
        raise FileFormatError("image id must be a string or integer", path=path, field="image.id")
    width = _int(_need(obj, "width", path, "image"), path, "image.width")
    height = _int(_need(obj, "height", path, "image"), path, "image.height")
    mpp = _num(_need(obj, "mpp", path, "image"), path, "image.mpp")
    try:
        return image_id, ImageMeta(width=width, height=height, mpp=mpp)
    except ValidationError as exc:
        raise FileFormatError(exc.message, path=path, field="image") from exc


def _box_to_obj(d: DetBox) -> dict:
    return {
        "x_min": d.x_min, "y_min": d.y_min, "x_max": d.x_max, "y_max": d.y_max,
        "score": d.score, "label": d.label, "model_id": d.model_id,
        "frame_id": d.frame_id,
    }


_FUSED_KEYS = ("c_avg", "t", "c_final", "member_ids")


def _det_record_to_obj(d: Any) -> dict:
    if isinstance(d, FusedBox):
        obj = _box_to_obj(d.box)
        obj["c_avg"] = d.c_avg
        obj["t"] = d.t
        obj["c_final"] = d.c_final
        obj["member_ids"] = [list(m) for m in d.member_ids]
        return obj
    return _box_to_obj(d)


def _det_record_from_obj(rec: Any, idx: int, path: str) -> Any:
    where = f"detections[{idx}]"
    coords = {k: _num(_need(rec, k, path, where), path, f"{where}.{k}")
              for k in ("x_min", "y_min", "x_max", "y_max", "score")}
    label = _int(rec.get("label", 0), path, f"{where}.label")
    model_id = rec.get("model_id", 0)
    if isinstance(model_id, bool) or not isinstance(model_id, (int, str)):
        raise FileFormatError("model_id must be int or string", path=path, field=f"{where}.model_id")
    frame_id = rec.get("frame_id", "image")
    if isinstance(frame_id, bool) or not isinstance(frame_id, (int, str)):
        raise FileFormatError("frame_id must be int or string", path=path, field=f"{where}.frame_id")
    try:
        box = DetBox(label=label, model_id=model_id, frame_id=frame_id, **coords)
    except ValidationError as exc:
        raise FileFormatError(exc.message, path=path, field=where) from exc

    present = [k for k in _FUSED_KEYS if k in rec]
    if not present:
        return box
    if len(present) != len(_FUSED_KEYS):
        missing = sorted(set(_FUSED_KEYS) - set(present))
        raise FileFormatError(
            f"fused record missing fields {missing}", path=path, field=where
        )
    raw_members = rec["member_ids"]
    if not isinstance(raw_members, list):
        raise FileFormatError("member_ids must be a list", path=path, field=f"{where}.member_ids")
    members = []
    for j, pair in enumerate(raw_members):
        if (not isinstance(pair, list)) or len(pair) != 2:
            raise FileFormatError(
                "member_ids entries must be [model_id, index] pairs",
                path=path, field=f"{where}.member_ids[{j}]",
            )
        members.append((pair[0], _int(pair[1], path, f"{where}.member_ids[{j}]")))
    try:
        return FusedBox(
            box=box,
            c_avg=_num(rec["c_avg"], path, f"{where}.c_avg"),
            t=_int(rec["t"], path, f"{where}.t"),
            c_final=_num(rec["c_final"], path, f"{where}.c_final"),
            member_ids=tuple(members),
        )
    except ValidationError as exc:
        raise FileFormatError(exc.message, path=path, field=where) from exc


def detections_to_obj(df: DetectionFile) -> dict:
    obj: dict = {
        "schema_version": SCHEMA_VERSION,
        "image": _meta_to_obj(df.image_id, df.meta),
    }
    if df.source is not None:
        obj["source"] = {
            "model_id": df.source.model_id,
            "tta_transform": df.source.tta_transform,
            "tile_id": df.source.tile_id,
        }
    obj["detections"] = [_det_record_to_obj(d) for d in df.detections]
    return obj


def detections_from_obj(doc: Any, path: str = "<memory>") -> DetectionFile:
    _check_version(doc, path)
    image_id, meta = _meta_from_obj(_need(doc, "image", path, ""), path)
    source = None
    if doc.get("source") is not None:
        src = doc["source"]
        try:
            source = SourceInfo(
                model_id=src.get("model_id"),
                tta_transform=src.get("tta_transform"),
                tile_id=src.get("tile_id"),
            )
        except (ValidationError, AttributeError) as exc:
            raise FileFormatError(str(exc), path=path, field="source") from exc
    raw = _need(doc, "detections", path, "")
    if not isinstance(raw, list):
        raise FileFormatError("detections must be a list", path=path, field="detections")
    dets = [_det_record_from_obj(rec, i, path) for i, rec in enumerate(raw)]
    return DetectionFile(image_id=image_id, meta=meta, detections=dets, source=source)


def save_detections(path: str | Path, df: DetectionFile) -> None:
    _write_text(path, dumps_stable(detections_to_obj(df)))


def load_detections(path: str | Path) -> DetectionFile:
    return detections_from_obj(_read_json(path), str(path))


def annotations_to_obj(af: AnnotationFile) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "image": _meta_to_obj(af.image_id, af.meta),
        "class_vocabulary": list(af.class_vocabulary),
        "points": [{"x": p.x, "y": p.y, "label": p.label} for p in af.points],
    }


def annotations_from_obj(doc: Any, path: str = "<memory>") -> AnnotationFile:
    _check_version(doc, path)
    image_id, meta = _meta_from_obj(_need(doc, "image", path, ""), path)
    vocab = _need(doc, "class_vocabulary", path, "")
    if not isinstance(vocab, list) or not vocab or not all(isinstance(v, str) for v in vocab):
        raise FileFormatError(
            "class_vocabulary must be a non-empty list of strings",
            path=path, field="class_vocabulary",
        )
    raw = _need(doc, "points", path, "")
    if not isinstance(raw, list):
        raise FileFormatError("points must be a list", path=path, field="points")
    points = []
    for i, rec in enumerate(raw):
        where = f"points[{i}]"
        x = _num(_need(rec, "x", path, where), path, f"{where}.x")
        y = _num(_need(rec, "y", path, where), path, f"{where}.y")
        label = _int(rec.get("label", 0), path, f"{where}.label")
        if not 0 <= label < len(vocab):
            raise FileFormatError(
                f"label {label} outside class vocabulary of size {len(vocab)}",
                path=path, field=f"{where}.label",
            )
        points.append(PointAnnotation(x=x, y=y, label=label))
    return AnnotationFile(
        image_id=image_id, meta=meta, points=points, class_vocabulary=tuple(vocab)
    )


def save_annotations(path: str | Path, af: AnnotationFile) -> None:
    _write_text(path, dumps_stable(annotations_to_obj(af)))


def load_annotations(path: str | Path) -> AnnotationFile:
    return annotations_from_obj(_read_json(path), str(path))


def cls_samples_to_obj(records: Sequence[ClsRecord]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "samples": [
            {"id": r.sample_id, "probs": list(r.probs), "truth": r.truth}
            for r in records
        ],
    }


def cls_samples_from_obj(doc: Any, path: str = "<memory>") -> list[ClsRecord]:
    _check_version(doc, path)
    raw = _need(doc, "samples", path, "")
    if not isinstance(raw, list):
        raise FileFormatError("samples must be a list", path=path, field="samples")
    out = []
    for i, rec in enumerate(raw):
        where = f"samples[{i}]"
        sid = _need(rec, "id", path, where)
        if not isinstance(sid, str):
            raise FileFormatError("sample id must be a string", path=path, field=f"{where}.id")
        probs = _need(rec, "probs", path, where)
        if not isinstance(probs, list) or not probs:
            raise FileFormatError(
                "probs must be a non-empty list", path=path, field=f"{where}.probs"
            )
        values = tuple(_num(p, path, f"{where}.probs[{j}]") for j, p in enumerate(probs))
        truth = _need(rec, "truth", path, where)
        try:
            out.append(ClsRecord(sample_id=sid, probs=values, truth=truth))
        except ValidationError as exc:
            raise FileFormatError(exc.message, path=path, field=where) from exc
    return out


def save_cls_samples(path: str | Path, records: Sequence[ClsRecord]) -> None:
    _write_text(path, dumps_stable(cls_samples_to_obj(records)))


def load_cls_samples(path: str | Path) -> list[ClsRecord]:
    return cls_samples_from_obj(_read_json(path), str(path))


def grid_to_obj(gf: GridFile) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "image": _meta_to_obj(gf.image_id, gf.meta),
        "patch_size": gf.grid.patch_size,
        "overlap": gf.grid.overlap,
        "tiles": [
            {"tile_id": t.tile_id, "x_offset": t.x_offset, "y_offset": t.y_offset}
            for t in gf.grid.tiles
        ],
    }


def grid_from_obj(doc: Any, path: str = "<memory>") -> GridFile:
    _check_version(doc, path)
    image_id, meta = _meta_from_obj(_need(doc, "image", path, ""), path)
    patch_size = _int(_need(doc, "patch_size", path, ""), path, "patch_size")
    overlap = _int(_need(doc, "overlap", path, ""), path, "overlap")
    if patch_size < 1 or not 0 <= overlap < patch_size:
        raise FileFormatError(
            f"invalid patch_size/overlap pair ({patch_size}, {overlap})",
            path=path, field="patch_size",
        )
    raw = _need(doc, "tiles", path, "")
    if not isinstance(raw, list):
        raise FileFormatError("tiles must be a list", path=path, field="tiles")
    tiles = []
    for i, rec in enumerate(raw):
        where = f"tiles[{i}]"
        tiles.append(Tile(
            tile_id=_int(_need(rec, "tile_id", path, where), path, f"{where}.tile_id"),
            x_offset=_int(_need(rec, "x_offset", path, where), path, f"{where}.x_offset"),
            y_offset=_int(_need(rec, "y_offset", path, where), path, f"{where}.y_offset"),
        ))
    grid = TileGrid(patch_size=patch_size, overlap=overlap, tiles=tuple(tiles))
    return GridFile(image_id=image_id, meta=meta, grid=grid)


def save_grid(path: str | Path, gf: GridFile) -> None:
    _write_text(path, dumps_stable(grid_to_obj(gf)))


def load_grid(path: str | Path) -> GridFile:
    return grid_from_obj(_read_json(path), str(path))


def read_raster(path: str | Path) -> np.ndarray:
    """Load a PNG or PPM image as an (H, W, 3) uint8 array."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except FileNotFoundError as exc:
        raise FileFormatError(f"cannot read file: {exc}", path=str(path)) from exc
    except Exception as exc:  # Pillow raises several unrelated types here
        raise FileFormatError(f"cannot decode raster: {exc}", path=str(path)) from exc


def write_raster(path: str | Path, raster: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 array as PNG or binary PPM, chosen by suffix."""
    arr = np.asarray(raster)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValidationError("invalid-image", f"expected (H, W, 3) uint8, got {arr.shape} {arr.dtype}")
    suffix = Path(path).suffix.lower()
    if suffix not in (".png", ".ppm"):
        raise ValidationError("invalid-config", f"unsupported raster suffix {suffix!r}")
    Image.fromarray(arr, mode="RGB").save(path)
