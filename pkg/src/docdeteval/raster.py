"""Rasterization, connected components, morphology and pixel-set algebra.

A pixel (x, y) belongs to a polygon iff its center (x + 0.5, y + 0.5) is
inside under the even-odd rule, with points exactly on the boundary counted
as inside. This convention is deterministic and cheap to verify against a
scalar point-in-polygon reference.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .data_model import LabelMask, Polygon, ProbabilityMap
from .errors import ConfigError, ValidationError

# 3x3 structuring elements used for connectivity and adjacency tests
_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class ObjectMask:
    """Rasterized pixel set of one object, stored relative to a tight box.

    Box coordinates are inclusive. An empty mask has pixel_count 0 and the
    canonical box (0, 0, -1, -1).
    """

    x0: int
    y0: int
    x1: int
    y1: int
    pixels: np.ndarray  # bool, shape (y1-y0+1, x1-x0+1)
    pixel_count: int
    class_id: int = 1
    confidence: Optional[float] = None
    image_width: int = 0
    image_height: int = 0

    @property
    def box_width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def box_height(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def is_empty(self) -> bool:
        return self.pixel_count == 0

    def centroid(self) -> tuple[float, float]:
        """Center (x, y) of the bounding box."""
        return (self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0

    def to_full_grid(self) -> np.ndarray:
        """Bool grid at full image resolution."""
        grid = np.zeros((self.image_height, self.image_width), dtype=bool)
        if not self.is_empty:
            grid[self.y0 : self.y1 + 1, self.x0 : self.x1 + 1] = self.pixels
        return grid


@dataclass(frozen=True)
class ExtractConfig:
    """Post-processing of probability maps: threshold + small-component filter.

    Defaults follow the detector post-processing this toolkit targets:
    probability threshold 0.7 and minimum component size 50 pixels.
    """

    threshold: float = 0.7
    min_cc: int = 50
    connectivity: int = 8

    def __post_init__(self) -> None:
        if not (0.0 <= self.threshold <= 1.0):
            raise ConfigError(f"threshold {self.threshold} outside [0, 1]")
        if self.min_cc < 0:
            raise ConfigError("min_cc must be >= 0")
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity must be 4 or 8, got {self.connectivity}")


def _empty_mask(class_id: int = 1, confidence: Optional[float] = None,
                width: int = 0, height: int = 0) -> ObjectMask:
    return ObjectMask(
        x0=0, y0=0, x1=-1, y1=-1,
        pixels=np.zeros((0, 0), dtype=bool),
        pixel_count=0, class_id=class_id, confidence=confidence,
        image_width=width, image_height=height,
    )


def mask_from_grid(grid: np.ndarray, class_id: int = 1,
                   confidence: Optional[float] = None) -> ObjectMask:
    """Tight-box ObjectMask from a full-resolution bool grid."""
    height, width = grid.shape
    ys, xs = np.nonzero(grid)
    if len(ys) == 0:
        return _empty_mask(class_id, confidence, width, height)
    y0, y1 = int(ys.min()), int(ys.max())
    x0, x1 = int(xs.min()), int(xs.max())
    pixels = grid[y0 : y1 + 1, x0 : x1 + 1].copy()
    return ObjectMask(
        x0=x0, y0=y0, x1=x1, y1=y1,
        pixels=pixels, pixel_count=int(pixels.sum()),
        class_id=class_id, confidence=confidence,
        image_width=width, image_height=height,
    )


def rasterize_polygon(poly: Polygon, width: int, height: int,
                      class_id: int = 1,
                      confidence: Optional[float] = None) -> ObjectMask:
    """Rasterize under the center-sampling even-odd rule, boundary inclusive."""
    if width <= 0 or height <= 0:
        raise ValidationError("image dimensions must be positive")
    min_x, min_y, max_x, max_y = poly.bounds()
    # candidate pixel range: centers within [min-0.5, max+0.5)
    cx0 = max(int(np.floor(min_x - 0.5)), 0)
    cx1 = min(int(np.ceil(max_x)), width - 1)
    cy0 = max(int(np.floor(min_y - 0.5)), 0)
    cy1 = min(int(np.ceil(max_y)), height - 1)
    if cx1 < cx0 or cy1 < cy0:
        return _empty_mask(class_id, confidence, width, height)

    px = np.arange(cx0, cx1 + 1, dtype=np.float64) + 0.5
    py = np.arange(cy0, cy1 + 1, dtype=np.float64) + 0.5
    gx, gy = np.meshgrid(px, py)

    inside = np.zeros(gx.shape, dtype=bool)
    on_edge = np.zeros(gx.shape, dtype=bool)
    pts = poly.points
    n = len(pts)
    for i in range(n):
        x1v, y1v = pts[i]
        x2v, y2v = pts[(i + 1) % n]
        crosses = (y1v > gy) != (y2v > gy)
        if np.any(crosses):
            xint = (x2v - x1v) * (gy - y1v) / (y2v - y1v) + x1v
            inside ^= crosses & (gx < xint)
        # exact on-segment test (cross product 0 and within the segment box)
        cross = (x2v - x1v) * (gy - y1v) - (y2v - y1v) * (gx - x1v)
        in_box = (
            (gx >= min(x1v, x2v)) & (gx <= max(x1v, x2v))
            & (gy >= min(y1v, y2v)) & (gy <= max(y1v, y2v))
        )
        on_edge |= (cross == 0.0) & in_box

    member = inside | on_edge
    grid = np.zeros((height, width), dtype=bool)
    grid[cy0 : cy1 + 1, cx0 : cx1 + 1] = member
    mask = mask_from_grid(grid, class_id=class_id, confidence=confidence)
    if mask.is_empty:
        warnings.warn("polygon rasterized to an empty mask", stacklevel=2)
    return mask


def connected_components(grid: np.ndarray | LabelMask,
                         cfg: ExtractConfig | None = None) -> list[ObjectMask]:
    """Maximal connected regions of each non-zero class, min_cc filtered.

    Output sorted by (y0, x0, pixel_count desc) for determinism.
    """
    cfg = cfg or ExtractConfig(min_cc=0)
    classes = grid.classes if isinstance(grid, LabelMask) else np.asarray(grid)
    structure = _STRUCT_8 if cfg.connectivity == 8 else _STRUCT_4
    out: list[ObjectMask] = []
    for class_id in sorted(int(c) for c in np.unique(classes) if c != 0):
        binary = classes == class_id
        labeled, count = ndimage.label(binary, structure=structure)
        slices = ndimage.find_objects(labeled)
        for comp_idx, sl in enumerate(slices, start=1):
            if sl is None:
                continue
            pixels = labeled[sl] == comp_idx
            n = int(pixels.sum())
            if n < cfg.min_cc:
                continue
            out.append(
                ObjectMask(
                    x0=sl[1].start, y0=sl[0].start,
                    x1=sl[1].stop - 1, y1=sl[0].stop - 1,
                    pixels=pixels, pixel_count=n, class_id=class_id,
                    image_width=classes.shape[1], image_height=classes.shape[0],
                )
            )
    out.sort(key=lambda m: (m.y0, m.x0, -m.pixel_count))
    return out


def extract_objects(pm: ProbabilityMap, cfg: ExtractConfig) -> list[ObjectMask]:
    """Threshold a probability map and split it into connected objects.

    Per pixel: argmax over non-background classes if that probability exceeds
    the threshold, else background. Each object's confidence is the mean of
    its class probability over member pixels.
    """
    if pm.num_classes < 2:
        raise ConfigError("probability map must have at least 2 classes")
    fg = pm.planes[1:]  # (C-1, H, W)
    best = np.argmax(fg, axis=0)
    best_prob = np.take_along_axis(fg, best[None], axis=0)[0]
    labels = np.where(best_prob > cfg.threshold, best + 1, 0).astype(np.int32)
    masks = connected_components(labels, cfg)
    out = []
    for m in masks:
        plane = pm.planes[m.class_id]
        region = plane[m.y0 : m.y1 + 1, m.x0 : m.x1 + 1]
        conf = float(region[m.pixels].mean())
        out.append(
            ObjectMask(
                x0=m.x0, y0=m.y0, x1=m.x1, y1=m.y1,
                pixels=m.pixels, pixel_count=m.pixel_count,
                class_id=m.class_id, confidence=conf,
                image_width=m.image_width, image_height=m.image_height,
            )
        )
    return out


def erode(mask: ObjectMask, radius: int) -> ObjectMask:
    """Morphological erosion with a (2r+1)x(2r+1) square structuring element.

    Pixels outside the image count as background, so blobs shrink at the
    image border too.
    """
    if radius < 0:
        raise ConfigError("erosion radius must be >= 0")
    if radius == 0 or mask.is_empty:
        return mask
    structure = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    padded = np.pad(mask.pixels, radius, mode="constant", constant_values=False)
    eroded = ndimage.binary_erosion(padded, structure=structure, border_value=0)
    ys, xs = np.nonzero(eroded)
    if len(ys) == 0:
        return _empty_mask(mask.class_id, mask.confidence,
                           mask.image_width, mask.image_height)
    y0, y1 = int(ys.min()), int(ys.max())
    x0, x1 = int(xs.min()), int(xs.max())
    pixels = eroded[y0 : y1 + 1, x0 : x1 + 1].copy()
    return ObjectMask(
        x0=mask.x0 - radius + x0, y0=mask.y0 - radius + y0,
        x1=mask.x0 - radius + x1, y1=mask.y0 - radius + y1,
        pixels=pixels, pixel_count=int(pixels.sum()),
        class_id=mask.class_id, confidence=mask.confidence,
        image_width=mask.image_width, image_height=mask.image_height,
    )


def _box_intersection(a: ObjectMask, b: ObjectMask) -> Optional[tuple[int, int, int, int]]:
    x0 = max(a.x0, b.x0)
    y0 = max(a.y0, b.y0)
    x1 = min(a.x1, b.x1)
    y1 = min(a.y1, b.y1)
    if x1 < x0 or y1 < y0:
        return None
    return x0, y0, x1, y1


def intersection_count(a: ObjectMask, b: ObjectMask) -> int:
    """Exact count of shared pixels, bbox-pruned."""
    box = _box_intersection(a, b)
    if box is None:
        return 0
    x0, y0, x1, y1 = box
    pa = a.pixels[y0 - a.y0 : y1 - a.y0 + 1, x0 - a.x0 : x1 - a.x0 + 1]
    pb = b.pixels[y0 - b.y0 : y1 - b.y0 + 1, x0 - b.x0 : x1 - b.x0 + 1]
    return int(np.count_nonzero(pa & pb))


def mask_overlap(a: ObjectMask, b: ObjectMask) -> tuple[int, int, float]:
    """(intersection, union, iou). Two empty masks have IoU 1.0 by convention."""
    if (a.image_width, a.image_height) != (b.image_width, b.image_height):
        raise ValidationError(
            f"mask grids differ: {a.image_width}x{a.image_height} vs "
            f"{b.image_width}x{b.image_height}"
        )
    inter = intersection_count(a, b)
    union = a.pixel_count + b.pixel_count - inter
    if union == 0:
        return 0, 0, 1.0
    return inter, union, inter / union


def masks_touch(a: ObjectMask, b: ObjectMask, connectivity: int = 8) -> bool:
    """True when the two disjoint masks have adjacent pixel pairs."""
    if a.is_empty or b.is_empty:
        return False
    # quick reject: boxes further than 1 px apart cannot touch
    if a.x0 > b.x1 + 1 or b.x0 > a.x1 + 1 or a.y0 > b.y1 + 1 or b.y0 > a.y1 + 1:
        return False
    structure = _STRUCT_8 if connectivity == 8 else _STRUCT_4
    x0 = max(a.x0, b.x0) - 1
    y0 = max(a.y0, b.y0) - 1
    x1 = min(a.x1, b.x1) + 1
    y1 = min(a.y1, b.y1) + 1

    def crop(m: ObjectMask) -> np.ndarray:
        out = np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=bool)
        ix0, iy0 = max(m.x0, x0), max(m.y0, y0)
        ix1, iy1 = min(m.x1, x1), min(m.y1, y1)
        if ix1 >= ix0 and iy1 >= iy0:
            out[iy0 - y0 : iy1 - y0 + 1, ix0 - x0 : ix1 - x0 + 1] = m.pixels[
                iy0 - m.y0 : iy1 - m.y0 + 1, ix0 - m.x0 : ix1 - m.x0 + 1
            ]
        return out

    ca, cb = crop(a), crop(b)
    dilated = ndimage.binary_dilation(ca, structure=structure)
    return bool(np.any(dilated & cb))


def subtract_pixels(a: ObjectMask, b: ObjectMask) -> ObjectMask:
    """Pixels of a not in b, re-boxed tightly."""
    if a.is_empty:
        return a
    grid = a.to_full_grid()
    if not b.is_empty:
        grid[b.y0 : b.y1 + 1, b.x0 : b.x1 + 1] &= ~b.pixels
    return mask_from_grid(grid, class_id=a.class_id, confidence=a.confidence)


def draw_masks(masks: Sequence[ObjectMask], width: int, height: int) -> LabelMask:
    """Combined label image; later masks overwrite earlier on conflicts."""
    classes = np.zeros((height, width), dtype=np.uint8)
    for m in masks:
        if m.is_empty:
            continue
        region = classes[m.y0 : m.y1 + 1, m.x0 : m.x1 + 1]
        region[m.pixels] = m.class_id
    return LabelMask(width=width, height=height, classes=classes)
