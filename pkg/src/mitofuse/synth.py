"""Synthetic ground truth and noisy detector outputs.

Generates a slide's worth of mitotic-figure ground truth plus per-model
detection lists with controllable miss rate, localization noise, and false
positives. Telophase cells are emitted as daughter-nuclei pairs: one ground
truth point at the pair midpoint, two candidate detections per model. This
is what makes double-counting (and the centroid merge that removes it)
reproducible without any trained model.

All randomness flows from a single ``numpy.random.default_rng(seed)`` in a
fixed draw order, so outputs are bit-stable across runs and platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geometry import DetBox, FrameId, ImageMeta, PointAnnotation

_MAX_PLACEMENT_TRIES = 1000


@dataclass(frozen=True)
class ScoreModel:
    """Clipped-normal score distributions for true and false detections."""

    tp_mean: float = 0.8
    tp_sigma: float = 0.1
    fp_mean: float = 0.3
    fp_sigma: float = 0.15

    def __post_init__(self):
        if self.tp_sigma < 0 or self.fp_sigma < 0:
            raise ValidationError("invalid-config", "score sigmas must be >= 0")


@dataclass(frozen=True)
class SynthConfig:
    n_cells: int = 100
    telophase_fraction: float = 0.0
    n_models: int = 5
    dropout: float = 0.0
    fp_rate: float = 0.0
    loc_sigma_um: float = 0.0
    score_model: ScoreModel = ScoreModel()
    seed: int = 0
    box_size_px: float = 50.0
    pair_spacing_um: tuple[float, float] = (4.0, 16.0)
    min_separation_um: float = 0.0

    def __post_init__(self):
        if self.n_cells < 0:
            raise ValidationError("invalid-config", f"n_cells must be >= 0, got {self.n_cells}")
        if self.n_models < 1:
            raise ValidationError("invalid-config", f"n_models must be >= 1, got {self.n_models}")
        for name in ("telophase_fraction", "dropout"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError("invalid-config", f"{name} must be in [0, 1], got {v}")
        if self.fp_rate < 0 or self.loc_sigma_um < 0 or self.min_separation_um < 0:
            raise ValidationError("invalid-config", "rates and sigmas must be >= 0")
        if self.box_size_px <= 0:
            raise ValidationError("invalid-config", f"box_size_px must be > 0, got {self.box_size_px}")
        lo, hi = self.pair_spacing_um
        if not (0 < lo <= hi):
            raise ValidationError("invalid-config", f"bad pair_spacing_um {self.pair_spacing_um}")


def _clipped_normal(rng: np.random.Generator, mean: float, sigma: float) -> float:
    return float(np.clip(rng.normal(mean, sigma), 0.0, 1.0))


def _box_at(cx: float, cy: float, half: float, meta: ImageMeta, score: float,
            model_id: int, frame_id: FrameId) -> DetBox:
    # Clamp the center so the nominal box stays in-frame; near borders this
    # trades a little localization error for valid coordinates.
    cx = min(max(cx, half), meta.width - half)
    cy = min(max(cy, half), meta.height - half)
    return DetBox(
        x_min=cx - half, y_min=cy - half, x_max=cx + half, y_max=cy + half,
        score=score, label=0, model_id=model_id, frame_id=frame_id,
    )


def generate(
    meta: ImageMeta,
    cfg: SynthConfig,
    frame_id: FrameId = "image",
) -> tuple[list[PointAnnotation], list[list[DetBox]]]:
    """Sample ground truth and per-model detections.

    Returns ``(gt, per_model)``. Ground truth points are uniform over the
    slide interior (inset so nominal boxes fit). The first
    ``round(telophase_fraction * n_cells)`` cells are daughter pairs: their
    GT point is the pair midpoint and each model sees two candidate
    detections, one per daughter. Each candidate independently survives with
    probability ``1 - dropout``, gets Gaussian jitter of ``loc_sigma_um``,
    and a clipped-normal score. Each model then gains ``Poisson(fp_rate)``
    uniform false positives.

    ``min_separation_um`` > 0 forces candidate points of distinct cells at
    least that far apart (rejection sampling), which keeps merge radii from
    bridging unrelated cells in controlled experiments.
    """
    rng = np.random.default_rng(cfg.seed)
    half = cfg.box_size_px / 2.0
    mpp = meta.mpp
    sigma_px = cfg.loc_sigma_um / mpp
    min_sep_px = cfg.min_separation_um / mpp
    n_pairs = int(round(cfg.telophase_fraction * cfg.n_cells))

    max_half_spacing_px = cfg.pair_spacing_um[1] / (2.0 * mpp)
    pair_inset = half + max_half_spacing_px
    if 2 * pair_inset >= min(meta.width, meta.height) and n_pairs > 0:
        raise ValidationError(
            "invalid-config",
            "image too small to place a daughter pair with the nominal box size",
        )
    if 2 * half >= min(meta.width, meta.height):
        raise ValidationError(
            "invalid-config", "image too small for the nominal box size"
        )

    gt: list[PointAnnotation] = []
    # Candidate detection points, one per daughter nucleus or single cell.
    candidates: list[tuple[float, float]] = []
    placed = np.empty((0, 2), dtype=float)

    def _far_enough(pts: list[tuple[float, float]]) -> bool:
        if min_sep_px <= 0 or placed.shape[0] == 0:
            return True
        arr = np.asarray(pts, dtype=float)
        d2 = ((placed[:, None, :] - arr[None, :, :]) ** 2).sum(axis=2)
        return bool(np.sqrt(d2.min()) >= min_sep_px)

    for cell in range(cfg.n_cells):
        is_pair = cell < n_pairs
        inset = pair_inset if is_pair else half
        for attempt in range(_MAX_PLACEMENT_TRIES):
            cx = rng.uniform(inset, meta.width - inset)
            cy = rng.uniform(inset, meta.height - inset)
            if is_pair:
                spacing_px = rng.uniform(*cfg.pair_spacing_um) / mpp
                angle = rng.uniform(0.0, 2.0 * math.pi)
                dx = 0.5 * spacing_px * math.cos(angle)
                dy = 0.5 * spacing_px * math.sin(angle)
                pts = [(cx - dx, cy - dy), (cx + dx, cy + dy)]
            else:
                pts = [(cx, cy)]
            if _far_enough(pts):
                break
        else:
            raise ValidationError(
                "synth-overcrowded",
                f"could not place cell {cell} with min_separation_um="
                f"{cfg.min_separation_um} after {_MAX_PLACEMENT_TRIES} tries",
            )
        gt.append(PointAnnotation(x=cx, y=cy, label=0))
        candidates.extend(pts)
        placed = np.concatenate([placed, np.asarray(pts, dtype=float)], axis=0)

    sm = cfg.score_model
    per_model: list[list[DetBox]] = []
    for m in range(cfg.n_models):
        dets: list[DetBox] = []
        for px, py in candidates:
            if rng.random() < cfg.dropout:
                continue
            jx = rng.normal(0.0, sigma_px) if sigma_px > 0 else 0.0
            jy = rng.normal(0.0, sigma_px) if sigma_px > 0 else 0.0
            score = _clipped_normal(rng, sm.tp_mean, sm.tp_sigma)
            dets.append(_box_at(px + jx, py + jy, half, meta, score, m, frame_id))
        n_fp = int(rng.poisson(cfg.fp_rate)) if cfg.fp_rate > 0 else 0
        for _ in range(n_fp):
            fx = rng.uniform(half, meta.width - half)
            fy = rng.uniform(half, meta.height - half)
            score = _clipped_normal(rng, sm.fp_mean, sm.fp_sigma)
            dets.append(_box_at(fx, fy, half, meta, score, m, frame_id))
        per_model.append(dets)
    return gt, per_model
