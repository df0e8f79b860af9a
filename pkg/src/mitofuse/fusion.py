"""Weighted Boxes Fusion with consensus rescaling, plus a greedy NMS baseline.

WBF clusters overlapping same-label boxes and replaces each cluster with the
confidence-weighted mean box instead of discarding the non-maximal members.
The fused confidence is then rescaled by cluster support: with ``T`` boxes in
the cluster out of ``N`` ensemble models,

    c_final = c_avg * min(T, N) / N

so detections backed by few models are pushed down. Processing order is
canonical (descending score, lexicographic tie-break), which makes the greedy
clustering independent of input order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .geometry import DetBox, FrameId, require_single_frame


@dataclass(frozen=True)
class FusionConfig:
    """Knobs for a WBF pass.

    ``iou_threshold`` is the cluster-membership predicate, ``n_models`` the
    ensemble size N used for rescaling, ``skip_threshold`` drops input boxes
    below that score before clustering.
    """

    iou_threshold: float = 0.5
    n_models: int = 1
    rescale: bool = True
    skip_threshold: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValidationError(
                "invalid-config", f"iou_threshold must be in (0, 1], got {self.iou_threshold}"
            )
        if self.n_models < 1:
            raise ValidationError("invalid-config", f"n_models must be >= 1, got {self.n_models}")
        if not 0.0 <= self.skip_threshold <= 1.0:
            raise ValidationError(
                "invalid-config", f"skip_threshold must be in [0, 1], got {self.skip_threshold}"
            )


@dataclass(frozen=True)
class FusedBox:
    """One fused cluster: the averaged box plus its support statistics.

    ``member_ids`` records (model_id, input index) of every clustered input
    box for audit; ``t == len(member_ids)``. The embedded box carries
    ``c_final`` as its score so fused results can feed any stage that
    consumes plain detections.
    """

    box: DetBox
    c_avg: float
    t: int
    c_final: float
    member_ids: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.t < 1 or self.t != len(self.member_ids):
            raise ValidationError(
                "invalid-fused-box", f"t={self.t} does not match {len(self.member_ids)} members"
            )
        if not (0.0 <= self.c_avg <= 1.0 and 0.0 <= self.c_final <= 1.0):
            raise ValidationError(
                "invalid-fused-box", f"c_avg={self.c_avg}, c_final={self.c_final} outside [0, 1]"
            )


def consensus_rescale(c_avg: float, t: int, n: int) -> float:
    """Down-weight clusters supported by few of the ``n`` models.

    Returns ``c_avg * min(t, n) / n``, computed ratio-first so that full
    support (``t >= n``) returns ``c_avg`` bit-for-bit unchanged.
    """
    if t < 1:
        raise ValidationError("invalid-config", f"cluster size must be >= 1, got {t}")
    if n < 1:
        raise ValidationError("invalid-config", f"n_models must be >= 1, got {n}")
    if t >= n:
        return c_avg
    return c_avg * (t / n)


def det_sort_key(b: DetBox):
    """Canonical processing order: descending score, then ascending coords, model."""
    return (-b.score, b.x_min, b.y_min, b.x_max, b.y_max, b.model_id)


def fused_sort_key(f: FusedBox):
    """Canonical output order: descending c_final, then the box tie-break."""
    b = f.box
    return (-f.c_final, b.x_min, b.y_min, b.x_max, b.y_max, b.model_id)


def as_fused(boxes: Sequence[DetBox]) -> list[FusedBox]:
    """Wrap raw detections as singleton fused boxes (t=1, c_final=score)."""
    return [
        FusedBox(box=b, c_avg=b.score, t=1, c_final=b.score, member_ids=((b.model_id, i),))
        for i, b in enumerate(boxes)
    ]


def _iou_many(fused: np.ndarray, box: np.ndarray) -> np.ndarray:
    """IoU of one box against rows of an (n, 4) array."""
    iw = np.minimum(fused[:, 2], box[2]) - np.maximum(fused[:, 0], box[0])
    ih = np.minimum(fused[:, 3], box[3]) - np.maximum(fused[:, 1], box[1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_f = (fused[:, 2] - fused[:, 0]) * (fused[:, 3] - fused[:, 1])
    area_b = (box[2] - box[0]) * (box[3] - box[1])
    return inter / (area_f + area_b - inter)


class _Clusters:
    """Growable cluster arrays for one label group.

    ``fused`` holds each cluster's current confidence-weighted mean box,
    recomputed after every join; membership is tested against it.
    """

    def __init__(self):
        cap = 16
        self.fused = np.empty((cap, 4))
        self.sum_c = np.empty(cap)
        self.sum_cx = np.empty((cap, 4))
        self.members: list[list[tuple[int, int]]] = []
        self.n = 0

    def _grow(self):
        cap = 2 * self.fused.shape[0]
        self.fused = np.resize(self.fused, (cap, 4))
        self.sum_c = np.resize(self.sum_c, cap)
        self.sum_cx = np.resize(self.sum_cx, (cap, 4))

    def add(self, coords: np.ndarray, score: float, member: tuple[int, int], iou_thr: float):
        if self.n:
            hits = np.nonzero(_iou_many(self.fused[: self.n], coords) >= iou_thr)[0]
            if hits.size:
                j = int(hits[0])  # join the first (oldest) matching cluster
                self.sum_c[j] += score
                self.sum_cx[j] += score * coords
                self.fused[j] = self.sum_cx[j] / self.sum_c[j]
                self.members[j].append(member)
                return
        if self.n == self.fused.shape[0]:
            self._grow()
        j = self.n
        self.fused[j] = coords
        self.sum_c[j] = score
        self.sum_cx[j] = score * coords
        self.members.append([member])
        self.n += 1


def wbf(boxes: Sequence[DetBox], cfg: FusionConfig) -> list[FusedBox]:
    """Fuse detections by greedy sequential clustering and weighted averaging.

    Boxes are processed in canonical order; each joins the first existing
    same-label cluster whose current fused box overlaps it at
    ``cfg.iou_threshold`` or above, else it seeds a new cluster. Cluster
    coordinates are the running confidence-weighted mean
    ``sum(c_i * x_i) / sum(c_i)``; ``c_avg`` is the plain mean of member
    scores. Output is sorted by descending ``c_final``.
    """
    frame = require_single_frame(boxes)
    kept = [(i, b) for i, b in enumerate(boxes) if b.score >= cfg.skip_threshold]
    if not kept:
        return []
    kept.sort(key=lambda ib: det_sort_key(ib[1]))

    groups: dict[int, _Clusters] = {}
    for i, b in kept:
        coords = np.array([b.x_min, b.y_min, b.x_max, b.y_max])
        groups.setdefault(b.label, _Clusters()).add(coords, b.score, (b.model_id, i), cfg.iou_threshold)

    out: list[FusedBox] = []
    for label, cl in groups.items():
        for j in range(cl.n):
            members = tuple(cl.members[j])
            t = len(members)
            c_avg = float(cl.sum_c[j]) / t
            c_final = consensus_rescale(c_avg, t, cfg.n_models) if cfg.rescale else c_avg
            x0, y0, x1, y1 = (float(v) for v in cl.fused[j])
            box = DetBox(
                x_min=x0, y_min=y0, x_max=x1, y_max=y1,
                score=c_final, label=label, model_id=members[0][0],
                frame_id=frame if frame is not None else "image",
            )
            out.append(FusedBox(box=box, c_avg=c_avg, t=t, c_final=c_final, member_ids=members))
    out.sort(key=fused_sort_key)
    return out


def nms(boxes: Sequence[DetBox], iou_threshold: float) -> list[DetBox]:
    """Greedy non-maximum suppression baseline.

    Repeatedly keeps the highest-priority remaining box (canonical order) and
    discards same-label boxes overlapping it at ``iou_threshold`` or above.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValidationError(
            "invalid-config", f"iou_threshold must be in (0, 1], got {iou_threshold}"
        )
    require_single_frame(boxes)
    ordered = sorted(boxes, key=det_sort_key)
    kept: list[DetBox] = []
    by_label: dict[int, list[DetBox]] = {}
    for b in ordered:
        group = by_label.setdefault(b.label, [])
        coords = np.array([b.x_min, b.y_min, b.x_max, b.y_max])
        if group:
            arr = np.array([[k.x_min, k.y_min, k.x_max, k.y_max] for k in group])
            if bool(np.any(_iou_many(arr, coords) >= iou_threshold)):
                continue
        group.append(b)
        kept.append(b)
    kept.sort(key=det_sort_key)
    return kept


def cross_model_average(
    tta_sets: Sequence[Sequence[DetBox]], cfg: FusionConfig
) -> list[FusedBox]:
    """Average one model's de-augmented TTA views into a single prediction set.

    Equivalent to ``wbf`` over the concatenated views with rescaling off and
    ``n_models`` set to the number of views: a box seen in only one view keeps
    its confidence, the consensus penalty being reserved for the cross-model
    stage. All inputs must come from the same model.
    """
    all_boxes: list[DetBox] = []
    for views in tta_sets:
        all_boxes.extend(views)
    model_ids = {b.model_id for b in all_boxes}
    if len(model_ids) > 1:
        raise ValidationError(
            "mixed-model", f"views mix detections from models {sorted(model_ids)}"
        )
    inner = FusionConfig(
        iou_threshold=cfg.iou_threshold,
        n_models=max(1, len(tta_sets)),
        rescale=False,
        skip_threshold=cfg.skip_threshold,
    )
    return wbf(all_boxes, inner)
