"""Synthetic dataset generator: ground-truth pages of non-overlapping text
boxes with random texts, corrupted predictions, matching probability maps
and optional dropout-style ensembles.

The generator records the true per-image mAP it induces, so estimator
quality is checkable against a known target without real detector output.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data_model import (
    DatasetManifest,
    ManifestEntry,
    ObjectInstance,
    PageRecord,
    Polygon,
    ProbabilityMap,
    save_manifest,
    save_page,
    save_probmap,
)
from .errors import ConfigError
from .object_metrics import image_map
from .raster import ObjectMask, rasterize_polygon

_ALPHABET = string.ascii_lowercase + "     "


@dataclass(frozen=True)
class SynthConfig:
    pages: int = 10
    width: int = 256
    height: int = 256
    min_objects: int = 1
    max_objects: int = 6
    jitter_px: int = 0
    drop_probability: float = 0.0
    spurious_rate: float = 0.0
    text_mutation_rate: float = 0.0
    ensemble_size: int = 0
    ensemble_jitter_px: int = 1
    inside_probability: float = 0.95
    seed: int = 0

    def __post_init__(self) -> None:
        for p in (self.drop_probability, self.spurious_rate, self.text_mutation_rate):
            if not (0.0 <= p <= 1.0):
                raise ConfigError(f"probability {p} outside [0, 1]")
        if self.pages < 0 or self.max_objects < self.min_objects:
            raise ConfigError("bad page/object counts")


def _random_text(rng: np.random.Generator, length: int) -> str:
    chars = rng.choice(list(_ALPHABET), size=length)
    return "".join(chars).strip() or "x"


def _mutate_text(rng: np.random.Generator, text: str, rate: float) -> str:
    # substitution-only mutation keeps the hypothesis the same length as the
    # reference, so edit distance never exceeds the reference length
    out = []
    for ch in text:
        if rng.random() < rate:
            out.append(str(rng.choice(list(string.ascii_lowercase))))
        else:
            out.append(ch)
    return "".join(out)


def _random_gt_boxes(
    rng: np.random.Generator, cfg: SynthConfig
) -> list[tuple[int, int, int, int]]:
    """Non-overlapping, non-touching axis-aligned boxes."""
    count = int(rng.integers(cfg.min_objects, cfg.max_objects + 1))
    boxes: list[tuple[int, int, int, int]] = []
    for _ in range(count * 10):
        if len(boxes) == count:
            break
        w = int(rng.integers(max(8, cfg.width // 8), max(10, cfg.width // 3)))
        h = int(rng.integers(max(6, cfg.height // 16), max(8, cfg.height // 6)))
        x = int(rng.integers(0, max(1, cfg.width - w)))
        y = int(rng.integers(0, max(1, cfg.height - h)))
        candidate = (x, y, x + w, y + h)
        # keep a 2 px margin so boxes never touch
        if all(
            candidate[0] > b[2] + 2 or b[0] > candidate[2] + 2
            or candidate[1] > b[3] + 2 or b[1] > candidate[3] + 2
            for b in boxes
        ):
            boxes.append(candidate)
    return boxes


def _box_polygon(box: tuple[int, int, int, int]) -> Polygon:
    x0, y0, x1, y1 = box
    return Polygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


def _jitter_box(
    rng: np.random.Generator, box: tuple[int, int, int, int], jitter: int,
    width: int, height: int
) -> tuple[int, int, int, int]:
    if jitter == 0:
        return box
    dx = int(rng.integers(-jitter, jitter + 1))
    dy = int(rng.integers(-jitter, jitter + 1))
    x0 = min(max(box[0] + dx, 0), width - 2)
    y0 = min(max(box[1] + dy, 0), height - 2)
    x1 = min(max(box[2] + dx, x0 + 1), width - 1)
    y1 = min(max(box[3] + dy, y0 + 1), height - 1)
    return x0, y0, x1, y1


@dataclass
class SynthPage:
    gt: PageRecord
    pred: PageRecord
    probmap: ProbabilityMap
    ensemble: list[PageRecord]
    true_map: float


def _page_objects_to_masks(page: PageRecord) -> list[ObjectMask]:
    return [
        rasterize_polygon(o.polygon, page.width, page.height,
                          class_id=o.class_id, confidence=o.confidence)
        for o in page.objects
    ]


def generate_page(cfg: SynthConfig, index: int, rng: np.random.Generator) -> SynthPage:
    image_id = f"synth_{index:05d}"
    boxes = _random_gt_boxes(rng, cfg)
    gt_objects = []
    texts = []
    ordered = sorted(boxes, key=lambda b: ((b[1] + b[3]) / 2, (b[0] + b[2]) / 2))
    for box in ordered:
        text = _random_text(rng, int(rng.integers(6, 24)))
        texts.append(text)
        gt_objects.append(ObjectInstance(class_id=1, polygon=_box_polygon(box), text=text))
    gt = PageRecord(
        image_id=image_id, width=cfg.width, height=cfg.height,
        objects=tuple(gt_objects), page_text=" ".join(texts),
    )

    def corrupt(jitter: int) -> tuple[ObjectInstance, ...]:
        preds = []
        for obj, box in zip(gt_objects, ordered):
            if rng.random() < cfg.drop_probability:
                continue
            jbox = _jitter_box(rng, box, jitter, cfg.width, cfg.height)
            text = _mutate_text(rng, obj.text or "", cfg.text_mutation_rate)
            conf = float(np.clip(rng.uniform(0.6, 1.0), 0.0, 1.0))
            preds.append(
                ObjectInstance(class_id=1, polygon=_box_polygon(jbox),
                               confidence=conf, text=text)
            )
        if rng.random() < cfg.spurious_rate:
            w = int(rng.integers(6, max(8, cfg.width // 6)))
            h = int(rng.integers(4, max(6, cfg.height // 8)))
            x = int(rng.integers(0, max(1, cfg.width - w)))
            y = int(rng.integers(0, max(1, cfg.height - h)))
            preds.append(
                ObjectInstance(
                    class_id=1, polygon=_box_polygon((x, y, x + w, y + h)),
                    confidence=float(rng.uniform(0.3, 0.7)),
                    text=_random_text(rng, int(rng.integers(2, 8))),
                )
            )
        return tuple(preds)

    pred = PageRecord(
        image_id=image_id, width=cfg.width, height=cfg.height,
        objects=corrupt(cfg.jitter_px), page_text=None,
    )

    # probability map: high class-1 probability inside predicted objects
    planes = np.zeros((2, cfg.height, cfg.width), dtype=np.float32)
    planes[0] = 1.0
    for obj in pred.objects:
        m = rasterize_polygon(obj.polygon, cfg.width, cfg.height)
        if m.is_empty:
            continue
        region = planes[1][m.y0 : m.y1 + 1, m.x0 : m.x1 + 1]
        region[m.pixels] = cfg.inside_probability
        planes[0][m.y0 : m.y1 + 1, m.x0 : m.x1 + 1][m.pixels] = 1.0 - cfg.inside_probability
    probmap = ProbabilityMap(width=cfg.width, height=cfg.height, num_classes=2, planes=planes)

    ensemble = [
        PageRecord(
            image_id=image_id, width=cfg.width, height=cfg.height,
            objects=corrupt(cfg.ensemble_jitter_px), page_text=None,
        )
        for _ in range(cfg.ensemble_size)
    ]

    true_map = image_map(_page_objects_to_masks(pred), _page_objects_to_masks(gt))
    return SynthPage(gt=gt, pred=pred, probmap=probmap, ensemble=ensemble, true_map=true_map)


def generate_dataset(cfg: SynthConfig, out_dir: str | Path) -> Path:
    """Write GT/pred/probmap/ensemble files plus the manifest and the
    recorded true per-image mAP; returns the manifest path."""
    out = Path(out_dir)
    (out / "gt").mkdir(parents=True, exist_ok=True)
    (out / "pred").mkdir(exist_ok=True)
    (out / "probmap").mkdir(exist_ok=True)
    if cfg.ensemble_size:
        (out / "ensemble").mkdir(exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    entries = []
    truth = {}
    for i in range(cfg.pages):
        page = generate_page(cfg, i, rng)
        gt_rel = f"gt/{page.gt.image_id}.json"
        pred_rel = f"pred/{page.gt.image_id}.json"
        pm_rel = f"probmap/{page.gt.image_id}.pmap"
        save_page(page.gt, out / gt_rel)
        save_page(page.pred, out / pred_rel)
        save_probmap(page.probmap, out / pm_rel)
        ens_rel = []
        for k, member in enumerate(page.ensemble):
            rel = f"ensemble/{page.gt.image_id}_{k:02d}.json"
            save_page(member, out / rel)
            ens_rel.append(rel)
        entries.append(
            ManifestEntry(
                image_id=page.gt.image_id, gt_path=gt_rel, pred_path=pred_rel,
                probmap_path=pm_rel, ensemble_paths=tuple(ens_rel),
            )
        )
        truth[page.gt.image_id] = page.true_map
    manifest_path = out / "manifest.jsonl"
    save_manifest(DatasetManifest(entries=tuple(entries), num_classes=2), manifest_path)
    (out / "true_map.json").write_text(json.dumps(truth, sort_keys=True), encoding="utf-8")
    return manifest_path
