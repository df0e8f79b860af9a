"""Sliding-window tile grids and patch-to-slide coordinate stitching.

Edge tiles are shifted inward rather than padded, so every tile has the full
patch extent, stays inside the slide, and detectors never see synthetic
borders. Detections from overlapping tiles are reconciled with a
rescaling-off WBF pass: the same model seeing the same cell twice is noise to
average, not independent evidence.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .errors import ValidationError
from .fusion import FusedBox, FusionConfig, wbf
from .geometry import DetBox, FrameId, ImageMeta


@dataclass(frozen=True)
class Tile:
    tile_id: int
    x_offset: int
    y_offset: int


@dataclass(frozen=True)
class TileGrid:
    patch_size: int
    overlap: int
    tiles: tuple[Tile, ...]

    @property
    def stride(self) -> int:
        return self.patch_size - self.overlap


def _axis_offsets(dim: int, patch: int, stride: int) -> list[int]:
    offsets = list(range(0, dim - patch + 1, stride))
    # clamp a final tile to the far edge unless the grid already reaches it
    if offsets[-1] != dim - patch and offsets[-1] + patch < dim:
        offsets.append(dim - patch)
    return offsets


def make_grid(meta: ImageMeta, patch_size: int = 512, overlap: int = 64) -> TileGrid:
    """Cover the slide with fixed-size tiles at stride ``patch_size - overlap``.

    Tile ids are assigned row-major (y-major). Every slide pixel is covered by
    at least one tile and no tile exits the slide bounds.
    """
    if patch_size < 1:
        raise ValidationError("invalid-config", f"patch_size must be >= 1, got {patch_size}")
    if not 0 <= overlap < patch_size:
        raise ValidationError(
            "invalid-config", f"overlap must be in [0, patch_size), got {overlap}"
        )
    if patch_size > min(meta.width, meta.height):
        raise ValidationError(
            "patch-too-large",
            f"patch {patch_size} exceeds slide {meta.width}x{meta.height}",
        )
    stride = patch_size - overlap
    xs = _axis_offsets(meta.width, patch_size, stride)
    ys = _axis_offsets(meta.height, patch_size, stride)
    tiles = tuple(
        Tile(tile_id=iy * len(xs) + ix, x_offset=x, y_offset=y)
        for iy, y in enumerate(ys)
        for ix, x in enumerate(xs)
    )
    return TileGrid(patch_size=patch_size, overlap=overlap, tiles=tiles)


def to_slide_frame(box: DetBox, tile: Tile, patch_size: int, slide_frame_id: FrameId) -> DetBox:
    """Translate a patch-local detection into slide coordinates."""
    if box.frame_id != tile.tile_id:
        raise ValidationError(
            "frame-mismatch", f"box frame {box.frame_id!r} is not tile {tile.tile_id}"
        )
    if not (0 <= box.x_min and box.x_max <= patch_size and 0 <= box.y_min and box.y_max <= patch_size):
        raise ValidationError(
            "out-of-bounds",
            f"box [{box.x_min}, {box.y_min}, {box.x_max}, {box.y_max}] "
            f"outside {patch_size}px patch",
        )
    return replace(
        box,
        x_min=box.x_min + tile.x_offset,
        y_min=box.y_min + tile.y_offset,
        x_max=box.x_max + tile.x_offset,
        y_max=box.y_max + tile.y_offset,
        frame_id=slide_frame_id,
    )


def stitch(
    grid: TileGrid,
    per_tile: Sequence[tuple[Tile, Sequence[DetBox]]],
    iou_threshold: float,
    slide_frame_id: FrameId,
) -> list[FusedBox]:
    """Lift per-tile detections to the slide frame and de-duplicate overlaps.

    Duplicates in overlap regions are averaged with rescaling off, so a box
    seen once keeps its confidence.  The result does not depend on the order
    of ``per_tile``: detections are enumerated in grid tile order before
    fusion, so fused ``member_ids`` index into that canonical enumeration.
    """
    known = {t.tile_id: t for t in grid.tiles}
    by_tile: dict[int, list[DetBox]] = {}
    for tile, dets in per_tile:
        if known.get(tile.tile_id) != tile:
            raise ValidationError("unknown-tile", f"tile {tile} is not part of the grid")
        by_tile.setdefault(tile.tile_id, []).extend(
            to_slide_frame(b, tile, grid.patch_size, slide_frame_id) for b in dets
        )
    lifted: list[DetBox] = []
    for tile in grid.tiles:
        lifted.extend(by_tile.get(tile.tile_id, ()))
    return wbf(lifted, FusionConfig(iou_threshold=iou_threshold, rescale=False))
