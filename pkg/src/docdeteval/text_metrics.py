"""Recognition-oriented evaluation: CER/WER, page-level CER over texts
concatenated in reading order, and line-level CER with IoU matching.

Line-level rules, per IoU threshold t:
  * matched pairs with IoU >= t contribute their edit distance;
  * matched pairs below t and never-matched GT lines contribute the full GT
    text length (deletions);
  * never-matched predictions contribute their full text length (insertions);
  * denominator = total GT text length.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .object_metrics import IOU_THRESHOLDS, iou_table
from .raster import ObjectMask


@dataclass(frozen=True)
class TextEvalResult:
    cer_at: dict[float, float]
    cer_range: float
    matched_char_fraction_at: dict[float, float]


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit costs over Unicode scalar values."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(b) > len(a):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ch in enumerate(a, start=1):
        cur = [i]
        for j, other in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ch != other)))
        prev = cur
    return prev[-1]


def cer(hyp: str, ref: str) -> float:
    """Character error rate; distance over max(len(ref), 1)."""
    if not hyp and not ref:
        return 0.0
    return edit_distance(hyp, ref) / max(len(ref), 1)


def wer(hyp: str, ref: str) -> float:
    """Word error rate over whitespace-split tokens."""
    hyp_tokens = hyp.split()
    ref_tokens = ref.split()
    if not hyp_tokens and not ref_tokens:
        return 0.0
    distance = _token_edit_distance(hyp_tokens, ref_tokens)
    return distance / max(len(ref_tokens), 1)


def _token_edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    prev = list(range(len(b) + 1))
    for i, tok in enumerate(a, start=1):
        cur = [i]
        for j, other in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (tok != other)))
        prev = cur
    return prev[-1]


def reading_order(lines: Sequence[tuple[ObjectMask, str]]) -> list[int]:
    """Top-to-bottom, left-to-right by bounding-box center."""
    def key(idx: int) -> tuple[float, float, int]:
        cx, cy = lines[idx][0].centroid()
        return (cy, cx, idx)

    return sorted(range(len(lines)), key=key)


def cer_page(pred_lines: Sequence[tuple[ObjectMask, str]], gt_text: str) -> float:
    """CER of predicted line texts joined by single spaces in reading order."""
    order = reading_order(pred_lines)
    hypothesis = " ".join(pred_lines[i][1] for i in order)
    return cer(hypothesis, gt_text)


def wer_page(pred_lines: Sequence[tuple[ObjectMask, str]], gt_text: str) -> float:
    order = reading_order(pred_lines)
    hypothesis = " ".join(pred_lines[i][1] for i in order)
    return wer(hypothesis, gt_text)


def match_lines(
    preds: Sequence[ObjectMask], gts: Sequence[ObjectMask]
) -> list[tuple[int, int, float]]:
    """One-to-one line matching: pairs greedily taken by IoU descending
    (ties by lower pred, then GT index); zero-IoU pairs never match."""
    ious = iou_table(preds, gts)
    candidates = [
        (float(ious[i, j]), i, j)
        for i in range(len(preds))
        for j in range(len(gts))
        if ious[i, j] > 0.0
    ]
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    used_pred = set()
    used_gt = set()
    pairs = []
    for iou, i, j in candidates:
        if i in used_pred or j in used_gt:
            continue
        used_pred.add(i)
        used_gt.add(j)
        pairs.append((i, j, iou))
    return pairs


def cer_line(
    preds: Sequence[tuple[ObjectMask, str]],
    gts: Sequence[tuple[ObjectMask, str]],
    thresholds: Sequence[float] = IOU_THRESHOLDS,
) -> TextEvalResult:
    pairs = match_lines([m for m, _ in preds], [m for m, _ in gts])
    matched_preds = {i for i, _, _ in pairs}
    matched_gts = {j for _, j, _ in pairs}
    total_gt_chars = sum(len(text) for _, text in gts)
    denominator = max(total_gt_chars, 1)
    unmatched_pred_chars = sum(
        len(text) for i, (_, text) in enumerate(preds) if i not in matched_preds
    )
    unmatched_gt_chars = sum(
        len(text) for j, (_, text) in enumerate(gts) if j not in matched_gts
    )
    pair_distances = [
        (iou, edit_distance(preds[i][1], gts[j][1]), len(gts[j][1]))
        for i, j, iou in pairs
    ]
    cer_at = {}
    fraction_at = {}
    for t in thresholds:
        errors = unmatched_pred_chars + unmatched_gt_chars
        matched_chars = 0
        for iou, dist, gt_len in pair_distances:
            if iou >= t:
                errors += dist
                matched_chars += gt_len
            else:
                errors += gt_len
        cer_at[t] = errors / denominator
        fraction_at[t] = matched_chars / denominator if total_gt_chars else 0.0
    return TextEvalResult(
        cer_at=cer_at,
        cer_range=float(np.mean(list(cer_at.values()))),
        matched_char_fraction_at=fraction_at,
    )
