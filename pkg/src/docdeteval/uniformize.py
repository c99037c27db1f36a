"""Annotation uniformization: rescale pages to the working resolution, then
separate touching objects, split small overlaps and keep large ones.

Pair handling, for every pair of rasterized objects in (i, j) index order:
  * touching (no shared pixels but 8-adjacent ones) -> erode both;
  * overlapping with at least one inter/area ratio below the threshold ->
    the object with the smaller ratio loses the intersection pixels;
  * overlapping with both ratios at or above the threshold -> keep both.
Modifications apply immediately, so later pairs see current masks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

from .data_model import LabelMask, PageRecord, Polygon
from .errors import ConfigError
from .raster import (
    ObjectMask,
    draw_masks,
    erode,
    intersection_count,
    masks_touch,
    rasterize_polygon,
    subtract_pixels,
)


@dataclass(frozen=True)
class UniformizeConfig:
    target_long_side: int = 768
    overlap_ratio_threshold: float = 0.20
    erosion_radius: int = 1

    def __post_init__(self) -> None:
        if self.target_long_side <= 0:
            raise ConfigError("target_long_side must be positive")
        if not (0.0 < self.overlap_ratio_threshold < 1.0):
            raise ConfigError("overlap_ratio_threshold must be in (0, 1)")
        if self.erosion_radius <= 0:
            raise ConfigError("erosion_radius must be positive")


def scale_page(page: PageRecord, target_long_side: int) -> PageRecord:
    """Uniformly scale a page so its long side equals the target.

    Dimensions round to nearest integer (minimum 1); vertices stay fractional.
    """
    scale = target_long_side / max(page.width, page.height)
    if scale == 1.0:
        return page
    new_w = max(1, round(page.width * scale))
    new_h = max(1, round(page.height * scale))
    objects = tuple(
        replace(
            obj,
            polygon=Polygon(tuple((x * scale, y * scale) for x, y in obj.polygon.points)),
        )
        for obj in page.objects
    )
    return replace(page, width=new_w, height=new_h, objects=objects)


def normalize_page(
    page: PageRecord, cfg: UniformizeConfig | None = None
) -> tuple[list[ObjectMask], LabelMask]:
    """Adjust object masks per the touching/overlap rules and draw the labels.

    The page must already be at the working resolution (call scale_page
    first). Objects erased to empty are kept as empty masks with a warning.
    """
    cfg = cfg or UniformizeConfig()
    masks = [
        rasterize_polygon(obj.polygon, page.width, page.height, class_id=obj.class_id)
        for obj in page.objects
    ]
    n = len(masks)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = masks[i], masks[j]
            if a.is_empty or b.is_empty:
                continue
            inter = intersection_count(a, b)
            if inter == 0:
                if masks_touch(a, b):
                    masks[i] = erode(a, cfg.erosion_radius)
                    masks[j] = erode(b, cfg.erosion_radius)
                continue
            ratio_a = inter / a.pixel_count
            ratio_b = inter / b.pixel_count
            if min(ratio_a, ratio_b) < cfg.overlap_ratio_threshold:
                # smaller ratio loses the intersection; ties: the later object
                if ratio_a < ratio_b:
                    masks[i] = subtract_pixels(a, b)
                else:
                    masks[j] = subtract_pixels(b, a)
            # both ratios >= threshold: keep the pair as-is
    for idx, m in enumerate(masks):
        if m.is_empty and not page.objects[idx].polygon.points == ():
            warnings.warn(
                f"page {page.image_id}: object {idx} erased to empty during "
                "uniformization",
                stacklevel=2,
            )
    label = draw_masks(masks, page.width, page.height)
    return masks, label
