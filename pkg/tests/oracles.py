"""Independently written reference implementations used as test oracles.

Everything here is deliberately plain: Python lists, dicts, explicit loops,
and math.fsum instead of the library's vectorized running-sum updates, so a
shared bug between library and oracle is unlikely.
"""

from __future__ import annotations

import math

from mitofuse.geometry import DetBox


def _key(b: DetBox):
    return (-b.score, b.x_min, b.y_min, b.x_max, b.y_max, b.model_id)


def _iou_tuples(a, b) -> float:
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def _weighted_mean(members):
    total = math.fsum(b.score for _, b in members)
    return tuple(
        math.fsum(b.score * getattr(b, f) for _, b in members) / total
        for f in ("x_min", "y_min", "x_max", "y_max")
    )


def brute_wbf(boxes, iou_threshold, n_models, rescale=True, skip_threshold=0.0):
    """Reference fuser. Returns a list of dicts sorted like the library output:

    {"members": ((model_id, input_index), ...), "coords": (x0, y0, x1, y1),
     "c_avg": float, "c_final": float, "label": int}
    """
    items = [(i, b) for i, b in enumerate(boxes) if b.score >= skip_threshold]
    items.sort(key=lambda ib: _key(ib[1]))
    clusters: list[dict] = []
    for i, b in items:
        coords = (b.x_min, b.y_min, b.x_max, b.y_max)
        target = None
        for cl in clusters:
            if cl["label"] != b.label:
                continue
            if _iou_tuples(cl["coords"], coords) >= iou_threshold:
                target = cl
                break
        if target is None:
            clusters.append({"label": b.label, "items": [(i, b)], "coords": coords})
        else:
            target["items"].append((i, b))
            target["coords"] = _weighted_mean(target["items"])
    out = []
    for cl in clusters:
        t = len(cl["items"])
        c_avg = math.fsum(b.score for _, b in cl["items"]) / t
        if rescale and t < n_models:
            c_final = c_avg * (t / n_models)
        else:
            c_final = c_avg
        out.append({
            "members": tuple((b.model_id, i) for i, b in cl["items"]),
            "coords": cl["coords"],
            "c_avg": c_avg,
            "c_final": c_final,
            "label": cl["label"],
        })
    out.sort(key=lambda r: (-r["c_final"], r["coords"], r["members"][0][0]))
    return out


def brute_components(centers, labels, radius_um, mpp):
    """All-pairs adjacency plus BFS; returns a sorted partition of indices."""
    n = len(centers)
    adj = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if labels[i] != labels[j]:
                continue
            d = math.hypot(centers[i][0] - centers[j][0], centers[i][1] - centers[j][1]) * mpp
            if d <= radius_um:
                adj[i].append(j)
                adj[j].append(i)
    seen = [False] * n
    parts = []
    for start in range(n):
        if seen[start]:
            continue
        queue = [start]
        seen[start] = True
        comp = []
        while queue:
            u = queue.pop()
            comp.append(u)
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        parts.append(tuple(sorted(comp)))
    return sorted(parts)


def brute_youden(samples):
    """Exhaustive scan over the candidate thresholds, plain loops only.

    Returns (threshold, j, sensitivity, specificity).
    """
    scores = sorted({s.prob_atypical for s in samples})
    cands = [scores[0]]
    cands += [0.5 * (a + b) for a, b in zip(scores, scores[1:])]
    cands.append(math.nextafter(scores[-1], math.inf))
    pos = [s.prob_atypical for s in samples if s.truth == "atypical"]
    neg = [s.prob_atypical for s in samples if s.truth == "typical"]
    best = None
    for t in cands:
        sens = sum(1 for p in pos if p >= t) / len(pos)
        spec = sum(1 for p in neg if p < t) / len(neg)
        j = sens + spec - 1.0
        if best is None or j > best[1]:
            best = (t, j, sens, spec)
    return best
