"""Per-image confidence estimators for detection predictions.

Four estimators:
  * posterior-probability score: mean over objects of the mean class
    probability over each object's pixels;
  * ensemble average precision: mean pairwise mAP@[.5,.95] over N stochastic
    predictions of the same image (higher = more agreement);
  * ensemble object-count variance: sample variance of the per-prediction
    object counts (lower = more agreement);
  * forest regressor over histogrammed object-shape statistics, trained to
    predict per-image mAP.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .data_model import ProbabilityMap
from .errors import ValidationError
from .forest import ForestParams, RegressionForest, train_forest
from .object_metrics import IOU_THRESHOLDS, image_map
from .raster import ObjectMask

DEFAULT_ENSEMBLE_SIZE = 10
DEFAULT_FEATURE_BINS = 10
# aspect ratio (feature 3) is unbounded; all other features are fractions
_ASPECT_FEATURE = 2
_ASPECT_RANGE = 4.0
_NUM_FEATURES = 8


@dataclass(frozen=True)
class ConfidenceScore:
    value: float
    higher_is_better: bool = True
    no_detections: bool = False


@dataclass(frozen=True)
class PredictionEnsemble:
    """N stochastic predictions of one image, all on the same grid."""

    image_id: str
    predictions: tuple[tuple[ObjectMask, ...], ...]

    def __post_init__(self) -> None:
        if len(self.predictions) < 2:
            raise ValidationError("ensemble needs at least 2 predictions")


def object_mean_probability(mask: ObjectMask, pm: ProbabilityMap) -> float:
    """Mean of the object's class-probability over its member pixels."""
    if mask.x1 >= pm.width or mask.y1 >= pm.height:
        raise ValidationError("object references pixels outside the probability map")
    plane = pm.planes[mask.class_id]
    region = plane[mask.y0 : mask.y1 + 1, mask.x0 : mask.x1 + 1]
    return float(region[mask.pixels].mean())


def pce(
    objects: Sequence[ObjectMask], pm: Optional[ProbabilityMap] = None
) -> ConfidenceScore:
    """Unweighted mean over objects of their mean pixel probability.

    Stored object confidences are used when no probability map is given.
    """
    if not objects:
        return ConfidenceScore(value=0.0, higher_is_better=True, no_detections=True)
    means = []
    for obj in objects:
        if pm is not None:
            means.append(object_mean_probability(obj, pm))
        elif obj.confidence is not None:
            means.append(obj.confidence)
        else:
            raise ValidationError(
                "object has no stored confidence and no probability map was given"
            )
    return ConfidenceScore(value=float(np.mean(means)), higher_is_better=True)


def dap(
    ensemble: PredictionEnsemble, thresholds: Sequence[float] = IOU_THRESHOLDS
) -> ConfidenceScore:
    """Mean per-image mAP over all ordered pairs of ensemble members."""
    n = len(ensemble.predictions)
    total = 0.0
    for i, j in combinations(range(n), 2):
        # image_map is not symmetric; both orders contribute
        total += image_map(ensemble.predictions[i], ensemble.predictions[j], thresholds)
        total += image_map(ensemble.predictions[j], ensemble.predictions[i], thresholds)
    return ConfidenceScore(value=total / (n * n - n), higher_is_better=True)


def dov(ensemble: PredictionEnsemble) -> ConfidenceScore:
    """Sample variance (denominator N-1) of the per-prediction object counts."""
    counts = np.array([len(p) for p in ensemble.predictions], dtype=np.float64)
    return ConfidenceScore(
        value=float(counts.var(ddof=1)), higher_is_better=False
    )


def _histogram(values: Sequence[float], bins: int, upper: float) -> np.ndarray:
    hist = np.zeros(bins, dtype=np.float64)
    if not values:
        return hist
    for v in values:
        idx = min(int(v / upper * bins), bins - 1)  # overflow clipped to last bin
        hist[max(idx, 0)] += 1.0
    return hist / hist.sum()


def object_features(
    objects: Sequence[ObjectMask],
    width: int,
    height: int,
    bins: int = DEFAULT_FEATURE_BINS,
) -> np.ndarray:
    """Concatenated per-feature histograms describing object shapes.

    Six per-object ratios (box height / image height, box width / image
    width, box aspect, pixel area / image area, pixel area / box area, box
    area / image area) plus pairwise centroid distances in y and x,
    normalized by the image dimensions.
    """
    if bins < 1:
        raise ValidationError("bins must be >= 1")
    img_area = width * height
    samples: list[list[float]] = [[] for _ in range(_NUM_FEATURES)]
    for m in objects:
        if m.is_empty:
            continue
        box_area = m.box_width * m.box_height
        samples[0].append(m.box_height / height)
        samples[1].append(m.box_width / width)
        samples[2].append(m.box_height / m.box_width)
        samples[3].append(m.pixel_count / img_area)
        samples[4].append(m.pixel_count / box_area)
        samples[5].append(box_area / img_area)
    centroids = [m.centroid() for m in objects if not m.is_empty]
    for (ax, ay), (bx, by) in combinations(centroids, 2):
        samples[6].append(abs(ay - by) / height)
        samples[7].append(abs(ax - bx) / width)
    parts = []
    for f in range(_NUM_FEATURES):
        upper = _ASPECT_RANGE if f == _ASPECT_FEATURE else 1.0
        parts.append(_histogram(samples[f], bins, upper))
    return np.concatenate(parts)


def train_rfr(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams | None = None,
    seed: int = 0,
) -> RegressionForest:
    """Train the mAP regressor on feature vectors and per-image mAP targets."""
    return train_forest(X, y, params=params, seed=seed)


def predict_rfr(forest: RegressionForest, x: np.ndarray) -> ConfidenceScore:
    return ConfidenceScore(value=forest.predict(x), higher_is_better=True)
