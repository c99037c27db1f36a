"""Object matching and VOC/COCO-style average precision.

Matching is greedy: predictions are visited in confidence-descending order
(ties broken by larger pixel count, then input index) and each takes the
unmatched ground-truth object of maximal IoU (ties by lower GT index). A
match is a true positive iff that IoU reaches the threshold.

AP uses all-points interpolation: the exact area under the interpolated
precision-recall step curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .raster import ObjectMask, mask_overlap

IOU_THRESHOLDS: tuple[float, ...] = tuple(round(0.5 + 0.05 * k, 2) for k in range(10))


@dataclass(frozen=True)
class MatchEntry:
    confidence: float
    gt_index: Optional[int]
    iou: float
    is_tp: bool


@dataclass(frozen=True)
class RankedMatches:
    """Predictions in ranking order with their match outcome at one threshold."""

    entries: tuple[MatchEntry, ...]
    total_gt: int


@dataclass(frozen=True)
class APResult:
    ap_at: dict[float, float]
    map_range: float


def _ranking_order(preds: Sequence[ObjectMask]) -> list[int]:
    """Confidence descending; ties by larger pixel_count, then input index."""
    def conf(m: ObjectMask) -> float:
        return m.confidence if m.confidence is not None else 1.0

    return sorted(range(len(preds)), key=lambda i: (-conf(preds[i]), -preds[i].pixel_count, i))


def iou_table(preds: Sequence[ObjectMask], gts: Sequence[ObjectMask]) -> np.ndarray:
    table = np.zeros((len(preds), len(gts)), dtype=np.float64)
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            table[i, j] = mask_overlap(p, g)[2]
    return table


def match_objects(
    preds: Sequence[ObjectMask],
    gts: Sequence[ObjectMask],
    threshold: float,
    ious: Optional[np.ndarray] = None,
) -> RankedMatches:
    if ious is None:
        ious = iou_table(preds, gts)
    order = _ranking_order(preds)
    taken = np.zeros(len(gts), dtype=bool)
    entries = []
    for idx in order:
        conf = preds[idx].confidence if preds[idx].confidence is not None else 1.0
        best_j, best_iou = None, 0.0
        for j in range(len(gts)):
            if taken[j]:
                continue
            if ious[idx, j] > best_iou:
                best_j, best_iou = j, ious[idx, j]
        if best_j is not None and best_iou >= threshold:
            taken[best_j] = True
            entries.append(MatchEntry(conf, best_j, best_iou, True))
        else:
            entries.append(MatchEntry(conf, None, best_iou, False))
    return RankedMatches(entries=tuple(entries), total_gt=len(gts))


def interpolated_precisions(precisions: Sequence[float]) -> list[float]:
    """Pointwise maximum over suffixes: p_interp(r) = max precision at recall >= r."""
    out = list(precisions)
    for i in range(len(out) - 2, -1, -1):
        out[i] = max(out[i], out[i + 1])
    return out


def average_precision(rm: RankedMatches) -> float:
    """Exact area under the interpolated precision-recall step curve."""
    if rm.total_gt == 0:
        return 1.0 if len(rm.entries) == 0 else 0.0
    if not rm.entries:
        return 0.0
    tps = np.cumsum([e.is_tp for e in rm.entries])
    ranks = np.arange(1, len(rm.entries) + 1)
    precisions = tps / ranks
    recalls = tps / rm.total_gt
    p_interp = interpolated_precisions(precisions.tolist())
    ap = 0.0
    prev_r = 0.0
    for r, p in zip(recalls.tolist(), p_interp):
        if r > prev_r:
            ap += (r - prev_r) * p
            prev_r = r
    return ap


def map_over_thresholds(
    preds: Sequence[ObjectMask],
    gts: Sequence[ObjectMask],
    thresholds: Sequence[float] = IOU_THRESHOLDS,
) -> APResult:
    """AP per IoU threshold with fresh matching each time, plus the mean."""
    ious = iou_table(preds, gts)
    ap_at = {
        t: average_precision(match_objects(preds, gts, t, ious=ious))
        for t in thresholds
    }
    return APResult(ap_at=ap_at, map_range=float(np.mean(list(ap_at.values()))))


def map_multiclass(per_class_map: dict[int, float]) -> float:
    """Arithmetic mean of per-class mAP@[.5,.95]; identity for one class."""
    if not per_class_map:
        return 1.0
    return float(np.mean(list(per_class_map.values())))


@dataclass
class PooledDetections:
    """Dataset-level accumulator: predictions of one class pooled across
    images into a single ranking (standard VOC pooling)."""

    total_gt: int = 0
    # (confidence, pixel_count, image_order, input_index, best-iou-per-gt row)
    _rows: list[tuple[float, int, int, int, np.ndarray, int]] = field(default_factory=list)
    _gt_offset: int = 0

    def add_image(self, preds: Sequence[ObjectMask], gts: Sequence[ObjectMask]) -> None:
        image_order = getattr(self, "_image_counter", 0)
        self._image_counter = image_order + 1
        ious = iou_table(preds, gts)
        for i, p in enumerate(preds):
            conf = p.confidence if p.confidence is not None else 1.0
            self._rows.append((conf, p.pixel_count, image_order, i, ious[i], self._gt_offset))
        self.total_gt += len(gts)
        self._gt_offset += len(gts)

    def ap_at(self, thresholds: Sequence[float] = IOU_THRESHOLDS) -> APResult:
        order = sorted(
            range(len(self._rows)),
            key=lambda k: (-self._rows[k][0], -self._rows[k][1], self._rows[k][2], self._rows[k][3]),
        )
        ap_at = {}
        for t in thresholds:
            taken = np.zeros(self._gt_offset, dtype=bool)
            entries = []
            for k in order:
                conf, _, _, _, iou_row, offset = self._rows[k]
                best_j, best_iou = None, 0.0
                for j in range(len(iou_row)):
                    if taken[offset + j]:
                        continue
                    if iou_row[j] > best_iou:
                        best_j, best_iou = j, iou_row[j]
                if best_j is not None and best_iou >= t:
                    taken[offset + best_j] = True
                    entries.append(MatchEntry(conf, offset + best_j, best_iou, True))
                else:
                    entries.append(MatchEntry(conf, None, best_iou, False))
            ap_at[t] = average_precision(RankedMatches(tuple(entries), self.total_gt))
        return APResult(ap_at=ap_at, map_range=float(np.mean(list(ap_at.values()))))


def image_map(
    preds: Sequence[ObjectMask],
    gts: Sequence[ObjectMask],
    thresholds: Sequence[float] = IOU_THRESHOLDS,
) -> float:
    """Per-image multi-class mAP@[.5,.95]: mean over classes present in
    either side; both sides empty scores 1.0."""
    classes = sorted({m.class_id for m in preds} | {m.class_id for m in gts})
    if not classes:
        return 1.0
    per_class = {
        c: map_over_thresholds(
            [m for m in preds if m.class_id == c],
            [m for m in gts if m.class_id == c],
            thresholds,
        ).map_range
        for c in classes
    }
    return map_multiclass(per_class)
