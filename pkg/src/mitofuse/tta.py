"""Test-time-augmentation bookkeeping: de-augment flipped predictions, then average.

A detector run on a flipped copy of an image reports boxes in the flipped
frame; ``deaugment`` reflects them back. ``tta_fuse`` then averages the up to
three views (original, horizontal flip, vertical flip) of one model into a
single prediction set with the consensus rescaling off.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import ValidationError
from .fusion import FusedBox, FusionConfig, cross_model_average
from .geometry import Axis, DetBox, ImageMeta, flip_box


class Transform(Enum):
    IDENTITY = "identity"
    HFLIP = "hflip"
    VFLIP = "vflip"


_VIEW_ORDER = {Transform.IDENTITY: 0, Transform.HFLIP: 1, Transform.VFLIP: 2}


@dataclass
class TtaView:
    """One TTA view: the transform applied to the image and the detections
    predicted on it, expressed in the transformed image's frame."""

    transform: Transform
    detections: list[DetBox]
    meta: ImageMeta


def deaugment(view: TtaView) -> list[DetBox]:
    """Map a view's detections back into the original image frame."""
    if view.transform is Transform.IDENTITY:
        axis = None
    elif view.transform is Transform.HFLIP:
        axis = Axis.HORIZONTAL
    else:
        axis = Axis.VERTICAL
    out: list[DetBox] = []
    for b in view.detections:
        if axis is None:
            # identity views still get the containment check flips perform
            if not (0 <= b.x_min and b.x_max <= view.meta.width
                    and 0 <= b.y_min and b.y_max <= view.meta.height):
                raise ValidationError(
                    "out-of-bounds",
                    f"box [{b.x_min}, {b.y_min}, {b.x_max}, {b.y_max}] outside "
                    f"image {view.meta.width}x{view.meta.height}",
                )
            out.append(b)
        else:
            out.append(flip_box(b, axis, view.meta))
    return out


def tta_fuse(views: Sequence[TtaView], iou_threshold: float = 0.5) -> list[FusedBox]:
    """De-augment every view and average them into one per-model prediction set.

    At most one view per transform; all views must share the same image meta.
    Views are processed in the fixed order identity, hflip, vflip so the
    result does not depend on how the caller listed them.
    """
    if not views:
        raise ValidationError("empty-input", "tta_fuse needs at least one view")
    if len(views) > 3:
        raise ValidationError("duplicate-view", f"{len(views)} views for 3 transforms")
    seen: set[Transform] = set()
    for v in views:
        if v.transform in seen:
            raise ValidationError("duplicate-view", f"transform {v.transform.value} given twice")
        seen.add(v.transform)
    meta = views[0].meta
    for v in views[1:]:
        if v.meta != meta:
            raise ValidationError(
                "meta-mismatch", f"views disagree on image meta: {v.meta} vs {meta}"
            )
    ordered = sorted(views, key=lambda v: _VIEW_ORDER[v.transform])
    sets = [deaugment(v) for v in ordered]
    return cross_model_average(sets, FusionConfig(iou_threshold=iou_threshold, rescale=False))
