"""Canonical data types for pages, objects and probability maps, plus readers
and writers for the on-disk formats.

Formats:
  * page records: UTF-8 JSON, object order significant;
  * probability maps: "PMAP" binary (little-endian header + float32 planes);
  * label masks: 8-bit single-channel PNG;
  * dataset manifests: JSON-lines, one entry per image.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .errors import FormatError, ValidationError

PMAP_MAGIC = b"PMAP"
PMAP_VERSION = 1


@dataclass(frozen=True)
class Polygon:
    """Closed polygon in image coordinates, vertices ordered, sub-pixel allowed."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.points) < 3:
            raise ValidationError(
                f"polygon needs at least 3 vertices, got {len(self.points)}"
            )
        for x, y in self.points:
            if not (np.isfinite(x) and np.isfinite(y)):
                raise ValidationError(f"non-finite polygon vertex ({x}, {y})")

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.points]
        ys = [p[1] for p in self.points]
        return min(xs), min(ys), max(xs), max(ys)


@dataclass(frozen=True)
class ObjectInstance:
    """One annotated or predicted object on a page."""

    class_id: int
    polygon: Polygon
    confidence: Optional[float] = None
    text: Optional[str] = None

    def __post_init__(self) -> None:
        if self.class_id < 1:
            raise ValidationError(f"class_id must be >= 1, got {self.class_id}")
        if self.confidence is not None and not (0.0 <= self.confidence <= 1.0):
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class PageRecord:
    """One image's set of objects, with optional full-page transcription."""

    image_id: str
    width: int
    height: int
    objects: tuple[ObjectInstance, ...] = ()
    page_text: Optional[str] = None

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(
                f"page dimensions must be positive, got {self.width}x{self.height}"
            )


@dataclass(frozen=True)
class ProbabilityMap:
    """Per-pixel, per-class posterior probabilities; planes[c][y][x]."""

    width: int
    height: int
    num_classes: int
    planes: np.ndarray  # float32, shape (C, H, W)

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise ValidationError("probability map needs >= 2 classes")
        if self.planes.shape != (self.num_classes, self.height, self.width):
            raise ValidationError(
                f"plane shape {self.planes.shape} inconsistent with header "
                f"({self.num_classes}, {self.height}, {self.width})"
            )
        if np.any(self.planes < 0) or np.any(self.planes > 1):
            raise ValidationError("probability values outside [0, 1]")

    def validate_normalization(self, tol: float = 1e-4) -> bool:
        """True when per-pixel class probabilities sum to 1 within tol."""
        sums = self.planes.sum(axis=0)
        return bool(np.all(np.abs(sums - 1.0) <= tol))


@dataclass(frozen=True)
class LabelMask:
    """Per-pixel class ids, 0 = background."""

    width: int
    height: int
    classes: np.ndarray  # uint8/int array, shape (H, W)

    def __post_init__(self) -> None:
        if self.classes.shape != (self.height, self.width):
            raise ValidationError(
                f"label grid shape {self.classes.shape} inconsistent with "
                f"{self.width}x{self.height}"
            )


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    gt_path: Optional[str] = None
    pred_path: Optional[str] = None
    probmap_path: Optional[str] = None
    ensemble_paths: tuple[str, ...] = ()


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...] = ()
    num_classes: int = 2

    def __post_init__(self) -> None:
        ids = [e.image_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate image_id in manifest")


def _clamp_page(page: PageRecord) -> PageRecord:
    """Clamp out-of-bounds vertices to [-0.5, dim + 0.5], warning once per page."""
    lo_x, hi_x = -0.5, page.width + 0.5
    lo_y, hi_y = -0.5, page.height + 0.5
    clamped_objects = []
    clamped_any = False
    for obj in page.objects:
        pts = []
        for x, y in obj.polygon.points:
            cx = min(max(x, lo_x), hi_x)
            cy = min(max(y, lo_y), hi_y)
            clamped_any = clamped_any or cx != x or cy != y
            pts.append((cx, cy))
        clamped_objects.append(replace(obj, polygon=Polygon(tuple(pts))))
    if clamped_any:
        warnings.warn(
            f"page {page.image_id}: vertices outside the image were clamped",
            stacklevel=3,
        )
        return replace(page, objects=tuple(clamped_objects))
    return page


def page_from_dict(doc: dict) -> PageRecord:
    """Build a validated PageRecord from a parsed JSON document."""
    try:
        image_id = doc["image_id"]
        width = int(doc["width"])
        height = int(doc["height"])
        raw_objects = doc.get("objects", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad page record: {exc}") from exc
    objects = []
    for idx, raw in enumerate(raw_objects):
        try:
            poly_pts = tuple((float(x), float(y)) for x, y in raw["polygon"])
            polygon = Polygon(poly_pts)
            objects.append(
                ObjectInstance(
                    class_id=int(raw["class"]),
                    polygon=polygon,
                    confidence=raw.get("confidence"),
                    text=raw.get("text"),
                )
            )
        except ValidationError as exc:
            raise ValidationError(f"object {idx}: {exc}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"object {idx}: malformed entry: {exc}") from exc
    page = PageRecord(
        image_id=image_id,
        width=width,
        height=height,
        objects=tuple(objects),
        page_text=doc.get("page_text"),
    )
    return _clamp_page(page)


def page_to_dict(page: PageRecord) -> dict:
    return {
        "image_id": page.image_id,
        "width": page.width,
        "height": page.height,
        "page_text": page.page_text,
        "objects": [
            {
                "class": obj.class_id,
                "polygon": [[x, y] for x, y in obj.polygon.points],
                "confidence": obj.confidence,
                "text": obj.text,
            }
            for obj in page.objects
        ],
    }


def load_page(path: str | Path) -> PageRecord:
    raw = Path(path).read_bytes()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON at byte {exc.pos}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: page record must be a JSON object")
    return page_from_dict(doc)


def save_page(page: PageRecord, path: str | Path) -> None:
    text = json.dumps(page_to_dict(page), ensure_ascii=False, sort_keys=True)
    Path(path).write_text(text, encoding="utf-8")


def load_probmap(path: str | Path) -> ProbabilityMap:
    raw = Path(path).read_bytes()
    if len(raw) < 20:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != PMAP_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {PMAP_MAGIC!r}")
    version, height, width, num_classes = struct.unpack_from("<4I", raw, 4)
    if version != PMAP_VERSION:
        raise FormatError(f"{path}: unsupported PMAP version {version}")
    expected = 20 + 4 * num_classes * height * width
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload length mismatch, expected {expected} bytes, got {len(raw)}"
        )
    planes = np.frombuffer(raw, dtype="<f4", offset=20).reshape(
        num_classes, height, width
    )
    return ProbabilityMap(
        width=width, height=height, num_classes=num_classes, planes=planes
    )


def save_probmap(pm: ProbabilityMap, path: str | Path) -> None:
    header = PMAP_MAGIC + struct.pack(
        "<4I", PMAP_VERSION, pm.height, pm.width, pm.num_classes
    )
    payload = np.ascontiguousarray(pm.planes, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def load_label_mask(path: str | Path) -> LabelMask:
    with Image.open(path) as img:
        if img.mode != "L":
            raise FormatError(f"{path}: expected 8-bit grayscale PNG, got mode {img.mode}")
        arr = np.asarray(img, dtype=np.uint8)
    return LabelMask(width=arr.shape[1], height=arr.shape[0], classes=arr)


def save_label_mask(mask: LabelMask, path: str | Path) -> None:
    if np.any(mask.classes > 255) or np.any(mask.classes < 0):
        raise ValidationError("label mask class_ids must fit in 8 bits")
    img = Image.fromarray(mask.classes.astype(np.uint8), mode="L")
    img.save(path, format="PNG")


def load_manifest(path: str | Path, check_files: bool = True) -> DatasetManifest:
    entries = []
    num_classes = 2
    base = Path(path).parent
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: malformed JSON: {exc.msg}") from exc
        if "num_classes" in doc and "image_id" not in doc:
            num_classes = int(doc["num_classes"])
            continue
        entry = ManifestEntry(
            image_id=doc["image_id"],
            gt_path=doc.get("gt_path"),
            pred_path=doc.get("pred_path"),
            probmap_path=doc.get("probmap_path"),
            ensemble_paths=tuple(doc.get("ensemble_paths") or ()),
        )
        if check_files:
            for p in (entry.gt_path, entry.pred_path, entry.probmap_path, *entry.ensemble_paths):
                if p is not None and not (base / p).exists() and not Path(p).exists():
                    raise ValidationError(f"{path}:{lineno}: missing file {p}")
        entries.append(entry)
    return DatasetManifest(entries=tuple(entries), num_classes=num_classes)


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    lines = [json.dumps({"num_classes": manifest.num_classes}, sort_keys=True)]
    for e in manifest.entries:
        doc = {"image_id": e.image_id}
        if e.gt_path is not None:
            doc["gt_path"] = e.gt_path
        if e.pred_path is not None:
            doc["pred_path"] = e.pred_path
        if e.probmap_path is not None:
            doc["probmap_path"] = e.probmap_path
        if e.ensemble_paths:
            doc["ensemble_paths"] = list(e.ensemble_paths)
        lines.append(json.dumps(doc, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def resolve_path(manifest_path: str | Path, rel: str) -> Path:
    """Manifest-relative path resolution; absolute paths pass through."""
    p = Path(rel)
    if p.is_absolute():
        return p
    candidate = Path(manifest_path).parent / rel
    return candidate if candidate.exists() else p
