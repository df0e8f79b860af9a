"""Boxes, points, coordinate frames, and the primitives built on them.

Boxes are closed real-valued rectangles in a y-down pixel frame with the
origin at the top-left. Every box names its coordinate frame explicitly so
that mixing detections from different patches or slides is a detectable
error instead of silent corruption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Union

from .errors import ValidationError

FrameId = Union[str, int]


class Axis(Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


@dataclass(frozen=True)
class ImageMeta:
    """Pixel dimensions of an image plus its isotropic microns-per-pixel scale."""

    width: int
    height: int
    mpp: float

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError(
                "invalid-meta", f"image dimensions must be >= 1, got {self.width}x{self.height}"
            )
        if not self.mpp > 0:
            raise ValidationError("invalid-meta", f"mpp must be positive, got {self.mpp}")


@dataclass(frozen=True)
class DetBox:
    """One detection: axis-aligned box, confidence, class label, provenance.

    Coordinates are continuous pixels local to the frame named by
    ``frame_id`` (a patch id or a slide id). ``model_id`` identifies the
    ensemble member that produced the box.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    score: float
    label: int = 0
    model_id: int = 0
    frame_id: FrameId = "image"

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(
                "invalid-box",
                f"box must have positive extent, got "
                f"[{self.x_min}, {self.y_min}, {self.x_max}, {self.y_max}]",
            )
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError("invalid-box", f"score must be in [0, 1], got {self.score}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))


@dataclass(frozen=True)
class PointAnnotation:
    """Annotated ground-truth location (point plus class id)."""

    x: float
    y: float
    label: int = 0

    def validate_within(self, meta: ImageMeta) -> None:
        if not (0 <= self.x <= meta.width and 0 <= self.y <= meta.height):
            raise ValidationError(
                "invalid-point",
                f"point ({self.x}, {self.y}) outside image {meta.width}x{meta.height}",
            )


def require_single_frame(boxes: Iterable[DetBox]) -> FrameId | None:
    """Return the common frame of ``boxes``, or None when empty.

    Raises ``frame-mismatch`` when two different frames are present.
    """
    frame: FrameId | None = None
    for b in boxes:
        if frame is None:
            frame = b.frame_id
        elif b.frame_id != frame:
            raise ValidationError(
                "frame-mismatch", f"boxes span frames {frame!r} and {b.frame_id!r}"
            )
    return frame


def _check_same_frame(a: DetBox, b: DetBox) -> None:
    if a.frame_id != b.frame_id:
        raise ValidationError(
            "frame-mismatch", f"boxes live in frames {a.frame_id!r} and {b.frame_id!r}"
        )


def iou(a: DetBox, b: DetBox) -> float:
    """Intersection-over-union of two boxes in the same frame; 0 when disjoint."""
    _check_same_frame(a, b)
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def centroid_distance_um(a: DetBox, b: DetBox, meta: ImageMeta) -> float:
    """Euclidean distance between box centers, converted to microns via mpp."""
    _check_same_frame(a, b)
    ax, ay = a.center
    bx, by = b.center
    return math.hypot(ax - bx, ay - by) * meta.mpp


def flip_box(box: DetBox, axis: Axis, meta: ImageMeta) -> DetBox:
    """Reflect a box across the image's vertical or horizontal midline.

    ``Axis.HORIZONTAL`` mirrors x (the transform a horizontally flipped image
    applies); ``Axis.VERTICAL`` mirrors y. Score, label, model id, and frame
    are preserved. The box must lie inside [0, width] x [0, height].
    """
    if not (0 <= box.x_min and box.x_max <= meta.width and 0 <= box.y_min and box.y_max <= meta.height):
        raise ValidationError(
            "out-of-bounds",
            f"box [{box.x_min}, {box.y_min}, {box.x_max}, {box.y_max}] "
            f"exceeds image {meta.width}x{meta.height}",
        )
    if axis is Axis.HORIZONTAL:
        return replace(box, x_min=meta.width - box.x_max, x_max=meta.width - box.x_min)
    return replace(box, y_min=meta.height - box.y_max, y_max=meta.height - box.y_min)
