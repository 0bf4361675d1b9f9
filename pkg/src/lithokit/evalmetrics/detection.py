"""Detection metrics: greedy matching, operating-point summary, and AP.

Two regimes, mirroring how the numbers are reported:

* ``match_detections`` / ``detection_summary`` work at a fixed operating
  point — confidence strictly above ``conf_thr`` (default 0.6), IoU
  strictly above ``iou_thr`` (default 0.5) — and yield TP/FP/recall/
  precision/F1/#FA.
* ``average_precision`` ignores the confidence floor and sweeps the full
  ranked list, integrating the precision envelope over recall.

All boxes are compared as ``(x0, y0, x1, y1)`` in a shared coordinate
space; half-open integer pixel boxes and continuous boxes both work
because the overlap arithmetic is identical.  Detector outputs in
normalized center form are converted with :func:`to_pixel_boxes`.
Callers are expected to drop no-hotspot placeholder predictions before
scoring (``to_pixel_boxes`` does this by default).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

from ..corpus.types import ViolationClass
from ..errors import InputError


def _klass_key(klass) -> str:
    """Grouping key for a class label.

    Labels arrive either as plain strings or as str-mixin enum members;
    ``str()`` on the latter renders ``ClassName.MEMBER`` and would never
    match the member's value, so group by the underlying value instead.
    """
    return getattr(klass, "value", str(klass))


@dataclass(frozen=True)
class ScoredBox:
    """A detection reduced to what the metrics need."""

    klass: str
    bbox: Tuple[float, float, float, float]  # (x0, y0, x1, y1)
    confidence: float


@dataclass(frozen=True)
class DetectionSummary:
    tp: int
    fp: int
    fa: int  # false alarms; identical to fp by definition
    recall: float
    precision: float
    f1: float
    ap50: float


def to_pixel_boxes(detections: Iterable, raster_size: int,
                   drop_no_hotspot: bool = True) -> List[ScoredBox]:
    """Convert normalized (cx, cy, w, h) detections to pixel-space corner
    boxes, optionally discarding the no-hotspot placeholder class."""
    out = []
    for det in detections:
        if drop_no_hotspot and det.klass == ViolationClass.NO_HOTSPOT:
            continue
        cx, cy, w, h = det.bbox
        box = (
            (cx - w / 2.0) * raster_size,
            (cy - h / 2.0) * raster_size,
            (cx + w / 2.0) * raster_size,
            (cy + h / 2.0) * raster_size,
        )
        out.append(ScoredBox(klass=det.klass, bbox=box, confidence=float(det.confidence)))
    return out


def box_iou_xyxy(a: Sequence[float], b: Sequence[float]) -> float:
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def _greedy_match(ranked: Sequence, gts: Sequence, iou_thr: float,
                  class_aware: bool) -> List[int]:
    """For each detection (already ranked), index of the matched gt or -1.

    Matching is one-to-one and greedy in rank order: each detection
    claims the unmatched ground-truth box of its class with the highest
    overlap, provided the IoU strictly exceeds ``iou_thr``.
    """
    taken = [False] * len(gts)
    assigned = []
    for det in ranked:
        best_j, best_iou = -1, iou_thr
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            if class_aware and det.klass != gt.klass:
                continue
            iou = box_iou_xyxy(det.bbox, gt.bbox)
            if iou > best_iou:
                best_j, best_iou = j, iou
        if best_j >= 0:
            taken[best_j] = True
        assigned.append(best_j)
    return assigned


def match_detections(dets: Sequence, gts: Sequence, iou_thr: float = 0.5,
                     conf_thr: float = 0.6,
                     class_aware: bool = True) -> Tuple[int, int, Tuple[int, ...]]:
    """Score one image at the fixed operating point.

    Returns ``(tp, fp, matched_gt)`` where ``matched_gt`` holds the
    indices of ground-truth boxes that were claimed.  Detections at or
    below the confidence floor are ignored entirely (neither TP nor FP).
    Ties in confidence are broken by original detection order, so the
    result is deterministic.
    """
    kept = [(d, i) for i, d in enumerate(dets) if d.confidence > conf_thr]
    kept.sort(key=lambda pair: (-pair[0].confidence, pair[1]))
    ranked = [d for d, _ in kept]
    assigned = _greedy_match(ranked, gts, iou_thr, class_aware)
    matched = tuple(sorted(j for j in assigned if j >= 0))
    tp = len(matched)
    return tp, len(ranked) - tp, matched


def match_flags(dets: Sequence, gts: Sequence, iou_thr: float = 0.5,
                conf_thr: float = 0.6, class_aware: bool = True):
    """Per-box outcome at the operating point, for reports and overlays.

    Returns ``(kept, det_matched, gt_matched)``: the confidence-filtered
    detections in rank order, a parallel list of booleans (True = true
    positive), and one boolean per ground-truth box (True = found).
    Counting ``det_matched`` reproduces ``match_detections`` exactly.
    """
    kept = [(d, i) for i, d in enumerate(dets) if d.confidence > conf_thr]
    kept.sort(key=lambda pair: (-pair[0].confidence, pair[1]))
    ranked = [d for d, _ in kept]
    assigned = _greedy_match(ranked, gts, iou_thr, class_aware)
    gt_matched = [False] * len(gts)
    for j in assigned:
        if j >= 0:
            gt_matched[j] = True
    return ranked, [j >= 0 for j in assigned], gt_matched


def detection_summary(dets_per_image: Sequence[Sequence],
                      gts_per_image: Sequence[Sequence],
                      iou_thr: float = 0.5, conf_thr: float = 0.6,
                      class_aware: bool = True) -> DetectionSummary:
    """Aggregate operating-point counts over a dataset.

    Recall is TP over the total number of ground-truth boxes; precision
    is TP over emitted detections and is defined as 0 when nothing was
    detected.  ``ap50`` is computed from the same inputs with the full
    confidence sweep (no floor).
    """
    if len(dets_per_image) != len(gts_per_image):
        raise InputError(
            f"got {len(dets_per_image)} detection lists for {len(gts_per_image)} images")
    tp = fp = total_gt = 0
    for dets, gts in zip(dets_per_image, gts_per_image):
        itp, ifp, _ = match_detections(dets, gts, iou_thr, conf_thr, class_aware)
        tp += itp
        fp += ifp
        total_gt += len(gts)
    recall = tp / total_gt if total_gt else 0.0
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    ap = average_precision(dets_per_image, gts_per_image, iou_thr, class_aware)
    return DetectionSummary(tp=tp, fp=fp, fa=fp, recall=recall,
                            precision=precision, f1=f1, ap50=ap)


def _class_ap(entries: Sequence[Tuple[float, int, int, object]],
              gts_per_image: Sequence[Sequence], klass,
              iou_thr: float, class_aware: bool) -> float:
    """AP for one class.  ``entries`` hold (confidence, image index,
    detection index, detection) for every detection of that class,
    with no confidence filtering."""
    total_gt = sum(
        1 for gts in gts_per_image for g in gts
        if not class_aware or _klass_key(g.klass) == klass)
    if total_gt == 0:
        return 0.0
    ranked = sorted(entries, key=lambda e: (-e[0], e[1], e[2]))
    taken = {}  # image index -> [claimed flags]
    hits = []
    for _, img, _, det in ranked:
        gts = gts_per_image[img]
        flags = taken.setdefault(img, [False] * len(gts))
        best_j, best_iou = -1, iou_thr
        for j, gt in enumerate(gts):
            if flags[j] or (class_aware and _klass_key(gt.klass) != klass):
                continue
            iou = box_iou_xyxy(det.bbox, gt.bbox)
            if iou > best_iou:
                best_j, best_iou = j, iou
        if best_j >= 0:
            flags[best_j] = True
        hits.append(best_j >= 0)

    # Cumulative precision/recall down the ranking, then the standard
    # all-point interpolation: integrate the running max of precision
    # (taken from the right) over recall.
    tp = 0
    points = []
    for rank, hit in enumerate(hits, start=1):
        tp += int(hit)
        points.append((tp / total_gt, tp / rank))
    envelope = [0.0] * len(points)
    running = 0.0
    for i in range(len(points) - 1, -1, -1):
        running = max(running, points[i][1])
        envelope[i] = running
    ap = 0.0
    prev_recall = 0.0
    for (recall, _), prec_env in zip(points, envelope):
        ap += (recall - prev_recall) * prec_env
        prev_recall = recall
    return ap


def average_precision(dets_per_image: Sequence[Sequence],
                      gts_per_image: Sequence[Sequence],
                      iou_thr: float = 0.5,
                      class_aware: bool = True) -> float:
    """Area under the precision-recall curve at one IoU threshold.

    Every detection participates regardless of confidence.  With
    ``class_aware`` (default) the AP is computed per ground-truth class
    and averaged over the classes that actually appear; class-agnostic
    mode pools everything into one curve.
    """
    if len(dets_per_image) != len(gts_per_image):
        raise InputError(
            f"got {len(dets_per_image)} detection lists for {len(gts_per_image)} images")
    if class_aware:
        classes = sorted({_klass_key(g.klass) for gts in gts_per_image for g in gts})
        if not classes:
            return 0.0
        aps = []
        for klass in classes:
            entries = [
                (float(d.confidence), img, i, d)
                for img, dets in enumerate(dets_per_image)
                for i, d in enumerate(dets) if _klass_key(d.klass) == klass
            ]
            aps.append(_class_ap(entries, gts_per_image, klass, iou_thr, True))
        return float(sum(aps) / len(aps))
    entries = [
        (float(d.confidence), img, i, d)
        for img, dets in enumerate(dets_per_image)
        for i, d in enumerate(dets)
    ]
    if not any(gts_per_image):
        return 0.0
    return _class_ap(entries, gts_per_image, None, iou_thr, False)
