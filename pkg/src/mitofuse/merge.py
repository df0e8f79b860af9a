"""Distance-based aggregation of telophase double detections.

A cell in telophase shows two separated daughter nuclei that detectors report
as two boxes even though pathologists annotate one division event. The boxes
barely overlap, so IoU-based suppression never sees them; instead, fused
detections whose centroids lie within a micron radius (default 10 um, about
an average cell diameter) are grouped by connected components and each
component collapses to a single detection.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .fusion import FusedBox, fused_sort_key
from .geometry import ImageMeta, require_single_frame


class Reducer(Enum):
    WEIGHTED_CENTROID = "weighted_centroid"
    MAX_SCORE = "max_score"
    ENVELOPE = "envelope"


@dataclass(frozen=True)
class MergeConfig:
    radius_um: float = 10.0
    reducer: Reducer = Reducer.WEIGHTED_CENTROID

    def __post_init__(self):
        if not self.radius_um > 0:
            raise ValidationError("invalid-config", f"radius_um must be > 0, got {self.radius_um}")


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:  # path compression
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def _reduce_component(members: list[FusedBox], reducer: Reducer) -> FusedBox:
    """Collapse one connected component to a single detection.

    The merged confidence is the max over members: a merge represents one
    true event detected twice, so the evidence is not diluted.
    """
    members = sorted(members, key=fused_sort_key)
    best = members[0]  # max c_final under the canonical tie-break
    if len(members) == 1 or reducer is Reducer.MAX_SCORE:
        return best

    member_ids = tuple(m for f in members for m in f.member_ids)
    if reducer is Reducer.WEIGHTED_CENTROID:
        total = sum(f.c_final for f in members)
        x0 = sum(f.c_final * f.box.x_min for f in members) / total
        y0 = sum(f.c_final * f.box.y_min for f in members) / total
        x1 = sum(f.c_final * f.box.x_max for f in members) / total
        y1 = sum(f.c_final * f.box.y_max for f in members) / total
    else:  # envelope
        x0 = min(f.box.x_min for f in members)
        y0 = min(f.box.y_min for f in members)
        x1 = max(f.box.x_max for f in members)
        y1 = max(f.box.y_max for f in members)
    box = replace(best.box, x_min=x0, y_min=y0, x_max=x1, y_max=y1)
    return FusedBox(
        box=box, c_avg=best.c_avg, t=len(member_ids),
        c_final=best.c_final, member_ids=member_ids,
    )


def merge_telophase(
    boxes: Sequence[FusedBox], meta: ImageMeta, cfg: MergeConfig
) -> list[FusedBox]:
    """Merge detections whose centroids are within ``cfg.radius_um`` microns.

    Builds the radius graph on the original centroids (same-label edges
    only), takes connected components with union-find, and reduces each
    component per ``cfg.reducer``. The closure runs exactly once: centroids
    of merged boxes are never re-tested, so weighted-centroid motion cannot
    create new adjacencies.
    """
    require_single_frame(b.box for b in boxes)
    n = len(boxes)
    if n <= 1:
        return sorted(boxes, key=fused_sort_key)

    ordered = sorted(boxes, key=fused_sort_key)
    centers = np.array([b.box.center for b in ordered])
    labels = np.array([b.box.label for b in ordered])

    uf = _UnionFind(n)
    for i in range(n - 1):
        d = centers[i + 1 :] - centers[i]
        dist_um = np.hypot(d[:, 0], d[:, 1]) * meta.mpp
        for off in np.nonzero((dist_um <= cfg.radius_um) & (labels[i + 1 :] == labels[i]))[0]:
            uf.union(i, i + 1 + int(off))

    components: dict[int, list[FusedBox]] = {}
    for i, b in enumerate(ordered):
        components.setdefault(uf.find(i), []).append(b)

    out = [_reduce_component(members, cfg.reducer) for members in components.values()]
    out.sort(key=fused_sort_key)
    return out
