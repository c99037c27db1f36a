"""Pixel-level confusion counting and IoU / precision / recall / F1.

Zero-denominator conventions: a class absent from both masks scores 1.0 on
every metric (agreement on absence); TP=0 with FP>0 gives precision 0; TP=0
with FN>0 gives recall 0. Background (class 0) is excluded from macro
averages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import LabelMask
from .errors import ValidationError


@dataclass(frozen=True)
class ClassCounts:
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class ConfusionCounts:
    """Per-class pixel counts, indexed by class_id (0 = background)."""

    per_class: tuple[ClassCounts, ...]

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        if len(self.per_class) != len(other.per_class):
            raise ValidationError("cannot sum counts with different class vocabularies")
        return ConfusionCounts(
            per_class=tuple(
                ClassCounts(a.tp + b.tp, a.fp + b.fp, a.fn + b.fn)
                for a, b in zip(self.per_class, other.per_class)
            )
        )


@dataclass(frozen=True)
class ClassMetrics:
    iou: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class PixelMetrics:
    per_class: tuple[ClassMetrics, ...]
    macro_iou: float
    macro_precision: float
    macro_recall: float
    macro_f1: float


def pixel_confusion(pred: LabelMask, gt: LabelMask, num_classes: int) -> ConfusionCounts:
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise ValidationError(
            f"mask dimensions differ: {pred.width}x{pred.height} vs {gt.width}x{gt.height}"
        )
    p = pred.classes.ravel().astype(np.int64)
    g = gt.classes.ravel().astype(np.int64)
    joint = np.bincount(p * num_classes + g, minlength=num_classes * num_classes)
    joint = joint.reshape(num_classes, num_classes)  # [pred, gt]
    pred_totals = joint.sum(axis=1)
    gt_totals = joint.sum(axis=0)
    counts = []
    for c in range(num_classes):
        tp = int(joint[c, c])
        counts.append(ClassCounts(tp=tp, fp=int(pred_totals[c]) - tp, fn=int(gt_totals[c]) - tp))
    return ConfusionCounts(per_class=tuple(counts))


def _class_metrics(c: ClassCounts) -> ClassMetrics:
    if c.tp == 0 and c.fp == 0 and c.fn == 0:
        return ClassMetrics(iou=1.0, precision=1.0, recall=1.0, f1=1.0)
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) > 0 else 1.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else 1.0
    iou = c.tp / (c.tp + c.fp + c.fn)
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return ClassMetrics(iou=iou, precision=precision, recall=recall, f1=f1)


def pixel_metrics(cc: ConfusionCounts) -> PixelMetrics:
    """Per-class metrics plus macro means over non-background classes that
    appear in either mask (classes absent from both are skipped)."""
    per_class = tuple(_class_metrics(c) for c in cc.per_class)
    present = [
        m
        for c, m in zip(cc.per_class[1:], per_class[1:])
        if c.tp + c.fp + c.fn > 0
    ]
    if not present:
        macro = (1.0, 1.0, 1.0, 1.0)
    else:
        macro = (
            float(np.mean([m.iou for m in present])),
            float(np.mean([m.precision for m in present])),
            float(np.mean([m.recall for m in present])),
            float(np.mean([m.f1 for m in present])),
        )
    return PixelMetrics(
        per_class=per_class,
        macro_iou=macro[0],
        macro_precision=macro[1],
        macro_recall=macro[2],
        macro_f1=macro[3],
    )
