"""Detection and classification evaluation.

Detection: distance-matched precision/recall/F1 against point annotations
(greedy matching by descending confidence, centroid within a micron radius)
and an exact confidence-threshold sweep. The F1-vs-threshold curve is a step
function that changes only at observed scores, so sweeping the distinct
scores plus the 0/1 sentinels finds the true optimum without grid error.

Classification: soft ensemble voting, Youden's J optimal threshold, and
balanced accuracy. A score equal to the threshold counts as positive in both
tracks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .fusion import FusedBox, fused_sort_key
from .geometry import DetBox, ImageMeta, PointAnnotation, require_single_frame


@dataclass(frozen=True)
class MatchConfig:
    """Detection-to-ground-truth match criterion: centroid-to-point distance
    in microns, greedy by descending confidence."""

    match_dist_um: float = 7.5

    def __post_init__(self):
        if not self.match_dist_um > 0:
            raise ValidationError(
                "invalid-config", f"match_dist_um must be > 0, got {self.match_dist_um}"
            )


@dataclass(frozen=True)
class DetEvalResult:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    threshold: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, threshold: float) -> "DetEvalResult":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(tp=tp, fp=fp, fn=fn, precision=precision, recall=recall, f1=f1,
                   threshold=threshold)


@dataclass(frozen=True)
class ClsEvalResult:
    threshold: float
    sensitivity: float
    specificity: float
    j: float
    balanced_accuracy: float


@dataclass(frozen=True)
class ClsSample:
    """One classified mitotic figure: ensemble score and ground truth."""

    id: str
    prob_atypical: float
    truth: str  # "typical" | "atypical"

    def __post_init__(self):
        if not 0.0 <= self.prob_atypical <= 1.0:
            raise ValidationError(
                "invalid-probability", f"prob_atypical must be in [0, 1], got {self.prob_atypical}"
            )
        if self.truth not in ("typical", "atypical"):
            raise ValidationError("invalid-truth", f"unknown truth class {self.truth!r}")


def _coerce_fused(dets: Sequence[FusedBox | DetBox]) -> list[FusedBox]:
    return [
        FusedBox(box=d, c_avg=d.score, t=1, c_final=d.score, member_ids=((d.model_id, i),))
        if isinstance(d, DetBox)
        else d
        for i, d in enumerate(dets)
    ]


def _greedy_match(
    ordered: Sequence[FusedBox],
    gt: Sequence[PointAnnotation],
    meta: ImageMeta,
    cfg: MatchConfig,
) -> list[bool]:
    """Match canonically ordered detections to the nearest unmatched GT point.

    Returns one matched/unmatched flag per detection. Because each
    detection's outcome depends only on the detections before it, the flags
    for the full list are valid for every score-threshold prefix.
    """
    if not gt:
        return [False] * len(ordered)
    gx = np.array([p.x for p in gt], dtype=float)
    gy = np.array([p.y for p in gt], dtype=float)
    taken = np.zeros(len(gt), dtype=bool)
    flags: list[bool] = []
    for det in ordered:
        cx, cy = det.box.center
        dist_um = np.hypot(gx - cx, gy - cy) * meta.mpp
        dist_um[taken] = np.inf
        j = int(np.argmin(dist_um))
        if dist_um[j] <= cfg.match_dist_um:
            taken[j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def match_detections(
    dets: Sequence[FusedBox | DetBox],
    gt: Sequence[PointAnnotation],
    meta: ImageMeta,
    cfg: MatchConfig,
    threshold: float,
) -> DetEvalResult:
    """Confusion counts and P/R/F1 at one confidence threshold.

    Detections scoring at or above the threshold are matched greedily (by
    descending confidence) to the nearest unmatched ground-truth point within
    ``cfg.match_dist_um`` microns. Matched detections are TP, the rest FP,
    unmatched ground truth FN.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError("invalid-config", f"threshold must be in [0, 1], got {threshold}")
    fused = _coerce_fused(dets)
    require_single_frame(f.box for f in fused)
    kept = sorted((f for f in fused if f.c_final >= threshold), key=fused_sort_key)
    flags = _greedy_match(kept, gt, meta, cfg)
    tp = sum(flags)
    return DetEvalResult.from_counts(tp=tp, fp=len(kept) - tp, fn=len(gt) - tp,
                                     threshold=threshold)


def sweep_f1_pooled(
    groups: Sequence[tuple[Sequence[FusedBox | DetBox], Sequence[PointAnnotation], ImageMeta]],
    cfg: MatchConfig,
) -> tuple[float, list[DetEvalResult]]:
    """Threshold sweep over pooled confusion counts from one or more images.

    Evaluates every distinct detection confidence plus the 0 and 1 sentinels;
    ties in F1 break toward the lower threshold (favors recall).
    """
    scores: list[float] = []
    matched: list[bool] = []
    n_gt = 0
    for dets, gt, meta in groups:
        fused = _coerce_fused(dets)
        require_single_frame(f.box for f in fused)
        ordered = sorted(fused, key=fused_sort_key)
        scores.extend(f.c_final for f in ordered)
        matched.extend(_greedy_match(ordered, gt, meta, cfg))
        n_gt += len(gt)
    if not scores and n_gt == 0:
        raise ValidationError("empty-eval", "no detections and no ground truth to evaluate")

    score_arr = np.array(scores, dtype=float)
    matched_arr = np.array(matched, dtype=bool)
    order = np.argsort(-score_arr, kind="stable")
    desc = score_arr[order]
    cum_tp = np.cumsum(matched_arr[order])

    candidates = sorted(set(scores) | {0.0, 1.0})
    curve: list[DetEvalResult] = []
    best: DetEvalResult | None = None
    for t in candidates:
        k = int(np.searchsorted(-desc, -t, side="right"))  # detections with score >= t
        tp = int(cum_tp[k - 1]) if k else 0
        res = DetEvalResult.from_counts(tp=tp, fp=k - tp, fn=n_gt - tp, threshold=t)
        curve.append(res)
        if best is None or res.f1 > best.f1:
            best = res
    assert best is not None
    return best.threshold, curve


def sweep_f1(
    dets: Sequence[FusedBox | DetBox],
    gt: Sequence[PointAnnotation],
    meta: ImageMeta,
    cfg: MatchConfig,
) -> tuple[float, list[DetEvalResult]]:
    """Single-image threshold sweep; see ``sweep_f1_pooled``."""
    return sweep_f1_pooled([(dets, gt, meta)], cfg)


def sweep_f1_macro(
    groups: Sequence[tuple[Sequence[FusedBox | DetBox], Sequence[PointAnnotation], ImageMeta]],
    cfg: MatchConfig,
) -> tuple[float, list[tuple[float, float]]]:
    """Per-image macro-averaged F1 sweep (alternative to pooled counts).

    Every image is evaluated separately at each pooled candidate threshold
    and the F1 values are averaged without weighting. Returns the best
    threshold (ties toward the lower one) and (threshold, macro_f1) rows.
    """
    per_image: list[tuple[np.ndarray, np.ndarray, int]] = []
    candidates: set[float] = {0.0, 1.0}
    total = 0
    for dets, gt, meta in groups:
        fused = _coerce_fused(dets)
        require_single_frame(f.box for f in fused)
        ordered = sorted(fused, key=fused_sort_key)
        flags = _greedy_match(ordered, gt, meta, cfg)
        desc = np.array([f.c_final for f in ordered], dtype=float)
        cum_tp = np.cumsum(np.asarray(flags, dtype=int))
        per_image.append((desc, cum_tp, len(gt)))
        candidates.update(desc.tolist())
        total += len(ordered) + len(gt)
    if total == 0:
        raise ValidationError("empty-eval", "no detections and no ground truth to evaluate")

    rows: list[tuple[float, float]] = []
    best: tuple[float, float] | None = None
    for t in sorted(candidates):
        f1s = []
        for desc, cum_tp, n_gt in per_image:
            k = int(np.searchsorted(-desc, -t, side="right"))
            tp = int(cum_tp[k - 1]) if k else 0
            denom = 2 * tp + (k - tp) + (n_gt - tp)
            f1s.append(2 * tp / denom if denom else 0.0)
        macro = float(np.mean(f1s)) if f1s else 0.0
        rows.append((t, macro))
        if best is None or macro > best[1]:
            best = (t, macro)
    assert best is not None
    return best[0], rows


def ensemble_vote(per_model_probs: Sequence[Sequence[float]], mode: str = "soft") -> list[float]:
    """Combine per-model probabilities into one score per sample.

    ``soft`` (the default) is the element-wise mean. ``hard`` binarizes each
    model at 0.5 first and returns the positive-vote fraction.
    """
    if mode not in ("soft", "hard"):
        raise ValidationError("invalid-config", f"unknown voting mode {mode!r}")
    if not per_model_probs:
        raise ValidationError("empty-input", "need at least one model's probabilities")
    n = len(per_model_probs[0])
    for probs in per_model_probs:
        if len(probs) != n:
            raise ValidationError(
                "length-mismatch",
                f"models disagree on sample count: {len(probs)} vs {n}",
            )
    arr = np.asarray(per_model_probs, dtype=float)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValidationError("invalid-probability", "probabilities must be in [0, 1]")
    if mode == "hard":
        arr = (arr >= 0.5).astype(float)
    return [float(v) for v in arr.mean(axis=0)]


def _split_classes(samples: Sequence[ClsSample]) -> tuple[np.ndarray, np.ndarray]:
    pos = np.array([s.prob_atypical for s in samples if s.truth == "atypical"], dtype=float)
    neg = np.array([s.prob_atypical for s in samples if s.truth == "typical"], dtype=float)
    if len(pos) == 0 or len(neg) == 0:
        raise ValidationError(
            "degenerate-classes", "need at least one typical and one atypical sample"
        )
    return pos, neg


def _cls_result(pos: np.ndarray, neg: np.ndarray, threshold: float) -> ClsEvalResult:
    sensitivity = float(np.count_nonzero(pos >= threshold)) / len(pos)
    specificity = float(np.count_nonzero(neg < threshold)) / len(neg)
    j = sensitivity + specificity - 1.0
    return ClsEvalResult(
        threshold=threshold,
        sensitivity=sensitivity,
        specificity=specificity,
        j=j,
        balanced_accuracy=(j + 1.0) / 2.0,
    )


def balanced_accuracy_at(samples: Sequence[ClsSample], threshold: float) -> ClsEvalResult:
    """Sensitivity, specificity, J, and balanced accuracy at a fixed threshold.

    A sample scoring exactly the threshold is classified atypical.
    """
    pos, neg = _split_classes(samples)
    return _cls_result(pos, neg, threshold)


def youden_candidates(samples: Sequence[ClsSample]) -> list[float]:
    """Candidate thresholds: midpoints between adjacent distinct scores plus
    an everything-positive and an everything-negative sentinel."""
    uniq = sorted({s.prob_atypical for s in samples})
    cands = [uniq[0]]  # every score >= min: all classified atypical
    cands.extend((a + b) / 2.0 for a, b in zip(uniq, uniq[1:]))
    cands.append(math.nextafter(uniq[-1], math.inf))  # all classified typical
    return cands


def youden_optimal(samples: Sequence[ClsSample]) -> ClsEvalResult:
    """Threshold maximizing Youden's J (equivalently balanced accuracy).

    Ties break toward the lower threshold.
    """
    pos, neg = _split_classes(samples)
    best: ClsEvalResult | None = None
    for t in youden_candidates(samples):
        res = _cls_result(pos, neg, t)
        if best is None or res.j > best.j:
            best = res
    assert best is not None
    return best


def split_85_15(ids: Sequence[str], seed: int) -> tuple[list[str], list[str]]:
    """Deterministic seeded 85:15 split; train gets ceil(0.85 * n) ids."""
    if not ids:
        raise ValidationError("empty-input", "cannot split an empty id list")
    rng = np.random.default_rng(seed)
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    n_train = (17 * len(ids) + 19) // 20  # ceil(0.85 n) in exact integer arithmetic
    return shuffled[:n_train], shuffled[n_train:]
