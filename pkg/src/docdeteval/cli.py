"""Command-line entry point: one executable exposing every pipeline stage.

Machine-readable JSON goes to stdout (or --out); a short human summary goes
to stderr. Exit codes: 0 success, 1 data error, 2 usage error. Reports are
byte-deterministic given identical inputs, flags and seeds.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, TypeVar

import click
import numpy as np

from . import __version__
from .confidence import (
    DEFAULT_ENSEMBLE_SIZE,
    dap,
    dov,
    object_features,
    pce,
    PredictionEnsemble,
    predict_rfr,
    train_rfr,
)
from .data_model import (
    DatasetManifest,
    LabelMask,
    ManifestEntry,
    PageRecord,
    load_manifest,
    load_page,
    load_probmap,
    resolve_path,
    save_label_mask,
)
from .errors import DocdetError
from .forest import load_forest, save_forest
from .object_metrics import IOU_THRESHOLDS, PooledDetections, image_map
from .pixel_metrics import ConfusionCounts, pixel_confusion, pixel_metrics
from .raster import ExtractConfig, ObjectMask, draw_masks, extract_objects, rasterize_polygon
from .selection import (
    ALConfig,
    al_run,
    bootstrap_bands,
    rejection_curve,
    select_images,
)
from .synth import SynthConfig, generate_dataset
from .text_metrics import cer_line, edit_distance, reading_order
from .uniformize import UniformizeConfig, normalize_page, scale_page

T = TypeVar("T")
U = TypeVar("U")


def _jobs_default() -> int:
    return int(os.environ.get("DOCDET_EVAL_JOBS", "1"))


def _parallel_map(fn: Callable[[T], U], items: Sequence[T], jobs: int) -> list[U]:
    """Map in parallel but reduce in input order, so output is deterministic."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _manifest_digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _emit(report: dict, out: Optional[str], summary: str) -> None:
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    click.echo(summary, err=True)


def _page_masks(page: PageRecord) -> list[ObjectMask]:
    return [
        rasterize_polygon(o.polygon, page.width, page.height,
                          class_id=o.class_id, confidence=o.confidence)
        for o in page.objects
    ]


def _load_entry_pages(
    manifest_path: str, entry: ManifestEntry
) -> tuple[Optional[PageRecord], Optional[PageRecord]]:
    gt = load_page(resolve_path(manifest_path, entry.gt_path)) if entry.gt_path else None
    pred = load_page(resolve_path(manifest_path, entry.pred_path)) if entry.pred_path else None
    return gt, pred


def _parse_thresholds(spec: str) -> list[float]:
    """Parse "start:stop:step" (inclusive, step may be negative) or a comma list."""
    if ":" in spec:
        start, stop, step = (float(tok) for tok in spec.split(":"))
        if step == 0:
            raise click.UsageError("threshold step must be non-zero")
        count = int(round((stop - start) / step)) + 1
        return [round(start + k * step, 10) for k in range(max(count, 0))]
    return [float(tok) for tok in spec.split(",") if tok.strip()]


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Document-layout detection evaluation and confidence toolkit."""


def _run_guarded(fn: Callable[[], None]) -> None:
    try:
        fn()
    except DocdetError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


# ------------------------------------------------------------------ synth


@main.command()
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--pages", default=10, show_default=True)
@click.option("--size", default=256, show_default=True, help="Square image side in px.")
@click.option("--min-objects", default=1, show_default=True)
@click.option("--max-objects", default=6, show_default=True)
@click.option("--jitter", default=0, show_default=True, help="Box jitter in px.")
@click.option("--drop-probability", default=0.0, show_default=True)
@click.option("--spurious-rate", default=0.0, show_default=True)
@click.option("--text-mutation-rate", default=0.0, show_default=True)
@click.option("--ensemble-size", default=0, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synth(out_dir, pages, size, min_objects, max_objects, jitter, drop_probability,
          spurious_rate, text_mutation_rate, ensemble_size, seed) -> None:
    """Generate a synthetic dataset with known per-image mAP."""

    def run() -> None:
        cfg = SynthConfig(
            pages=pages, width=size, height=size,
            min_objects=min_objects, max_objects=max_objects,
            jitter_px=jitter, drop_probability=drop_probability,
            spurious_rate=spurious_rate, text_mutation_rate=text_mutation_rate,
            ensemble_size=ensemble_size, seed=seed,
        )
        manifest = generate_dataset(cfg, out_dir)
        click.echo(f"wrote {pages} pages under {out_dir}", err=True)
        sys.stdout.write(json.dumps({"manifest": str(manifest)}, sort_keys=True) + "\n")

    _run_guarded(run)


# -------------------------------------------------------------- normalize


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--long-side", default=768, show_default=True)
@click.option("--overlap-threshold", default=0.2, show_default=True)
@click.option("--erosion-radius", default=1, show_default=True)
@click.option("--jobs", type=int, default=_jobs_default, show_default="DOCDET_EVAL_JOBS or 1")
def normalize(manifest_path, out_dir, long_side, overlap_threshold, erosion_radius, jobs) -> None:
    """Uniformize annotations and write per-page label masks."""

    def run() -> None:
        manifest = load_manifest(manifest_path)
        cfg = UniformizeConfig(
            target_long_side=long_side,
            overlap_ratio_threshold=overlap_threshold,
            erosion_radius=erosion_radius,
        )
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

        def one(entry: ManifestEntry) -> dict:
            gt, _ = _load_entry_pages(manifest_path, entry)
            scaled = scale_page(gt, cfg.target_long_side)
            masks, label = normalize_page(scaled, cfg)
            save_label_mask(label, out / f"{entry.image_id}.png")
            return {
                "image_id": entry.image_id,
                "width": scaled.width,
                "height": scaled.height,
                "object_pixel_counts": [m.pixel_count for m in masks],
            }

        sidecar = _parallel_map(one, manifest.entries, jobs)
        report = {
            "tool_version": __version__,
            "manifest_digest": _manifest_digest(manifest_path),
            "config": {
                "long_side": long_side,
                "overlap_threshold": overlap_threshold,
                "erosion_radius": erosion_radius,
            },
            "pages": sidecar,
        }
        (out / "normalize.json").write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        _emit(report, None, f"normalized {len(sidecar)} pages into {out_dir}")

    _run_guarded(run)


# ---------------------------------------------------------------- extract


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--threshold", default=0.7, show_default=True)
@click.option("--min-cc", default=50, show_default=True)
@click.option("--connectivity", default=8, show_default=True)
@click.option("--jobs", type=int, default=_jobs_default, show_default="DOCDET_EVAL_JOBS or 1")
def extract(manifest_path, out_path, threshold, min_cc, connectivity, jobs) -> None:
    """Convert probability maps into detected objects."""

    def run() -> None:
        manifest = load_manifest(manifest_path)
        cfg = ExtractConfig(threshold=threshold, min_cc=min_cc, connectivity=connectivity)

        def one(entry: ManifestEntry) -> dict:
            pm = load_probmap(resolve_path(manifest_path, entry.probmap_path))
            objs = extract_objects(pm, cfg)
            return {
                "image_id": entry.image_id,
                "objects": [
                    {
                        "class": m.class_id,
                        "bbox": [m.x0, m.y0, m.x1, m.y1],
                        "pixel_count": m.pixel_count,
                        "confidence": m.confidence,
                    }
                    for m in objs
                ],
            }

        results = _parallel_map(one, manifest.entries, jobs)
        report = {
            "tool_version": __version__,
            "manifest_digest": _manifest_digest(manifest_path),
            "config": {"threshold": threshold, "min_cc": min_cc, "connectivity": connectivity},
            "pages": results,
        }
        total = sum(len(r["objects"]) for r in results)
        _emit(report, out_path, f"extracted {total} objects from {len(results)} maps")

    _run_guarded(run)


# ------------------------------------------------------------------- eval


@main.group(name="eval")
def eval_group() -> None:
    """Pixel-, object- and text-level evaluation."""


@eval_group.command(name="pixel")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--jobs", type=int, default=_jobs_default, show_default="DOCDET_EVAL_JOBS or 1")
def eval_pixel(manifest_path, out_path, jobs) -> None:
    """Pixel IoU / precision / recall / F1, micro and per-page macro."""

    def run() -> None:
        manifest = load_manifest(manifest_path)
        num_classes = manifest.num_classes

        def one(entry: ManifestEntry) -> tuple[str, ConfusionCounts]:
            gt, pred = _load_entry_pages(manifest_path, entry)
            gt_label = draw_masks(_page_masks(gt), gt.width, gt.height)
            pred_label = draw_masks(_page_masks(pred), pred.width, pred.height)
            return entry.image_id, pixel_confusion(pred_label, gt_label, num_classes)

        results = _parallel_map(one, manifest.entries, jobs)
        micro = results[0][1]
        for _, cc in results[1:]:
            micro = micro + cc
        micro_metrics = pixel_metrics(micro)
        per_page = {image_id: pixel_metrics(cc) for image_id, cc in results}
        report = {
            "tool_version": __version__,
            "manifest_digest": _manifest_digest(manifest_path),
            "config": {"num_classes": num_classes},
            "micro": {
                "iou": micro_metrics.macro_iou,
                "precision": micro_metrics.macro_precision,
                "recall": micro_metrics.macro_recall,
                "f1": micro_metrics.macro_f1,
            },
            "per_page_macro_mean": {
                "iou": float(np.mean([m.macro_iou for m in per_page.values()])),
                "f1": float(np.mean([m.macro_f1 for m in per_page.values()])),
            },
            "per_page": {
                image_id: {"iou": m.macro_iou, "f1": m.macro_f1}
                for image_id, m in per_page.items()
            },
        }
        _emit(report, out_path, f"pixel IoU (micro) = {micro_metrics.macro_iou:.4f}")

    _run_guarded(run)


@eval_group.command(name="object")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--thresholds", default="0.5:0.95:0.05", show_default=True)
@click.option("--jobs", type=int, default=_jobs_default, show_default="DOCDET_EVAL_JOBS or 1")
def eval_object(manifest_path, out_path, thresholds, jobs) -> None:
    """Pooled AP@t / mAP@[.5,.95] per class plus a per-image mAP table."""

    def run() -> None:
        manifest = load_manifest(manifest_path)
        ths = _parse_thresholds(thresholds)

        def one(entry: ManifestEntry):
            gt, pred = _load_entry_pages(manifest_path, entry)
            return entry.image_id, _page_masks(pred), _page_masks(gt)

        loaded = _parallel_map(one, manifest.entries, jobs)
        classes = sorted(
            {m.class_id for _, preds, gts in loaded for m in (*preds, *gts)}
        ) or [1]
        pooled = {c: PooledDetections() for c in classes}
        per_image = {}
        for image_id, preds, gts in loaded:
            for c in classes:
                pooled[c].add_image(
                    [m for m in preds if m.class_id == c],
                    [m for m in gts if m.class_id == c],
                )
            per_image[image_id] = image_map(preds, gts, ths)
        per_class = {c: pooled[c].ap_at(ths) for c in classes}
        overall = float(np.mean([r.map_range for r in per_class.values()]))
        report = {
            "tool_version": __version__,
            "manifest_digest": _manifest_digest(manifest_path),
            "config": {"thresholds": ths},
            "per_class": {
                str(c): {
                    "ap_at": {f"{t:.2f}": v for t, v in r.ap_at.items()},
                    "map_range": r.map_range,
                }
                for c, r in per_class.items()
            },
            "map": overall,
            "per_image_map": per_image,
        }
        _emit(report, out_path, f"mAP@[.5,.95] = {overall:.4f}")

    _run_guarded(run)


@eval_group.command(name="text")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--mode", type=click.Choice(["page", "line"]), default="page", show_default=True)
@click.option("--thresholds", default="0.5:0.95:0.05", show_default=True)
@click.option("--jobs", type=int, default=_jobs_default, show_default="DOCDET_EVAL_JOBS or 1")
def eval_text(manifest_path, out_path, mode, thresholds, jobs) -> None:
    """CER at page level (reading-order concatenation) or line level."""

    def run() -> None:
        manifest = load_manifest(manifest_path)
        ths = _parse_thresholds(thresholds)

        if mode == "page":

            def one(entry: ManifestEntry) -> tuple[str, int, int]:
                gt, pred = _load_entry_pages(manifest_path, entry)
                lines = [
                    (m, o.text or "")
                    for m, o in zip(_page_masks(pred), pred.objects)
                ]
                order = reading_order(lines)
                hyp = " ".join(lines[i][1] for i in order)
                ref = gt.page_text or ""
                return entry.image_id, edit_distance(hyp, ref), len(ref)

            results = _parallel_map(one, manifest.entries, jobs)
            total_dist = sum(d for _, d, _ in results)
            total_ref = sum(n for _, _, n in results)
            report = {
                "tool_version": __version__,
                "manifest_digest": _manifest_digest(manifest_path),
                "config": {"mode": mode},
                "cer": total_dist / max(total_ref, 1),
                "per_page": {
                    image_id: d / max(n, 1) for image_id, d, n in results
                },
            }
            _emit(report, out_path, f"CER@page = {report['cer']:.4f}")
        else:

            def one_line(entry: ManifestEntry):
                gt, pred = _load_entry_pages(manifest_path, entry)
                pred_lines = [
                    (m, o.text or "") for m, o in zip(_page_masks(pred), pred.objects)
                ]
                gt_lines = [
                    (m, o.text or "") for m, o in zip(_page_masks(gt), gt.objects)
                ]
                result = cer_line(pred_lines, gt_lines, ths)
                weight = max(sum(len(t) for _, t in gt_lines), 1)
                return entry.image_id, result, weight

            results = _parallel_map(one_line, manifest.entries, jobs)
            total_w = sum(w for _, _, w in results)
            cer_at = {
                f"{t:.2f}": sum(r.cer_at[t] * w for _, r, w in results) / total_w
                for t in ths
            }
            fraction_at = {
                f"{t:.2f}": sum(r.matched_char_fraction_at[t] * w for _, r, w in results)
                / total_w
                for t in ths
            }
            report = {
                "tool_version": __version__,
                "manifest_digest": _manifest_digest(manifest_path),
                "config": {"mode": mode, "thresholds": ths},
                "cer_at": cer_at,
                "cer_range": float(np.mean(list(cer_at.values()))),
                "matched_char_fraction_at": fraction_at,
            }
            _emit(report, out_path, f"CER@[.5,.95] = {report['cer_range']:.4f}")

    _run_guarded(run)


# -------------------------------------------------------------- confidence


def _load_ensemble(manifest_path: str, entry: ManifestEntry, size: int) -> PredictionEnsemble:
    paths = entry.ensemble_paths[:size] if size else entry.ensemble_paths
    members = []
    for p in paths:
        page = load_page(resolve_path(manifest_path, p))
        members.append(tuple(_page_masks(page)))
    return PredictionEnsemble(image_id=entry.image_id, predictions=tuple(members))


def _emit_scores(rows: list[dict], out_path: Optional[str], label: str) -> None:
    text = "\n".join(json.dumps(r, sort_keys=True) for r in rows) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    click.echo(f"{label}: scored {len(rows)} images", err=True)


@main.group(name="confidence")
def confidence_group() -> None:
    """Per-image confidence estimation."""


@confidence_group.command(name="pce")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--threshold", default=0.7, show_default=True)
@click.option("--min-cc", default=50, show_default=True)
@click.option("--jobs", type=int, default=_jobs_default, show_default="DOCDET_EVAL_JOBS or 1")
def confidence_pce(manifest_path, out_path, threshold, min_cc, jobs) -> None:
    """Posterior-probability confidence from the probability maps."""

    def run() -> None:
        manifest = load_manifest(manifest_path)
        cfg = ExtractConfig(threshold=threshold, min_cc=min_cc)

        def one(entry: ManifestEntry) -> dict:
            if entry.probmap_path:
                pm = load_probmap(resolve_path(manifest_path, entry.probmap_path))
                objs = extract_objects(pm, cfg)
                score = pce(objs, pm)
            else:
                _, pred = _load_entry_pages(manifest_path, entry)
                score = pce(_page_masks(pred))
            return {
                "image_id": entry.image_id,
                "estimator": "pce",
                "value": score.value,
                "orientation": "higher",
                "no_detections": score.no_detections,
            }

        _emit_scores(_parallel_map(one, manifest.entries, jobs), out_path, "pce")

    _run_guarded(run)


@confidence_group.command(name="dap")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--ensemble-size", default=DEFAULT_ENSEMBLE_SIZE, show_default=True)
@click.option("--jobs", type=int, default=_jobs_default, show_default="DOCDET_EVAL_JOBS or 1")
def confidence_dap(manifest_path, out_path, ensemble_size, jobs) -> None:
    """Mean pairwise mAP across the dropout ensemble."""

    def run() -> None:
        manifest = load_manifest(manifest_path)

        def one(entry: ManifestEntry) -> dict:
            score = dap(_load_ensemble(manifest_path, entry, ensemble_size))
            return {
                "image_id": entry.image_id,
                "estimator": "dap",
                "value": score.value,
                "orientation": "higher",
            }

        _emit_scores(_parallel_map(one, manifest.entries, jobs), out_path, "dap")

    _run_guarded(run)


@confidence_group.command(name="dov")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--ensemble-size", default=DEFAULT_ENSEMBLE_SIZE, show_default=True)
@click.option("--jobs", type=int, default=_jobs_default, show_default="DOCDET_EVAL_JOBS or 1")
def confidence_dov(manifest_path, out_path, ensemble_size, jobs) -> None:
    """Variance of the object count across the dropout ensemble."""

    def run() -> None:
        manifest = load_manifest(manifest_path)

        def one(entry: ManifestEntry) -> dict:
            score = dov(_load_ensemble(manifest_path, entry, ensemble_size))
            return {
                "image_id": entry.image_id,
                "estimator": "dov",
                "value": score.value,
                "orientation": "lower",
            }

        _emit_scores(_parallel_map(one, manifest.entries, jobs), out_path, "dov")

    _run_guarded(run)


@confidence_group.command(name="rfr-train")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--bins", default=10, show_default=True)
@click.option("--trees", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--jobs", type=int, default=_jobs_default, show_default="DOCDET_EVAL_JOBS or 1")
def confidence_rfr_train(manifest_path, model_path, bins, trees, seed, jobs) -> None:
    """Train the mAP regressor on object statistics vs true per-image mAP."""

    def run() -> None:
        manifest = load_manifest(manifest_path)

        def one(entry: ManifestEntry):
            gt, pred = _load_entry_pages(manifest_path, entry)
            preds = _page_masks(pred)
            features = object_features(preds, pred.width, pred.height, bins)
            target = image_map(preds, _page_masks(gt))
            return features, target

        rows = _parallel_map(one, manifest.entries, jobs)
        X = np.stack([f for f, _ in rows])
        y = np.array([t for _, t in rows])
        from .forest import ForestParams

        forest = train_rfr(X, y, params=ForestParams(n_trees=trees), seed=seed)
        save_forest(forest, model_path)
        click.echo(f"trained {trees} trees on {len(y)} pages -> {model_path}", err=True)
        sys.stdout.write(json.dumps({"model": model_path, "pages": len(y)}, sort_keys=True) + "\n")

    _run_guarded(run)


@confidence_group.command(name="rfr-predict")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--bins", default=10, show_default=True)
@click.option("--jobs", type=int, default=_jobs_default, show_default="DOCDET_EVAL_JOBS or 1")
def confidence_rfr_predict(manifest_path, model_path, out_path, bins, jobs) -> None:
    """Score images with a trained mAP regressor."""

    def run() -> None:
        manifest = load_manifest(manifest_path)
        forest = load_forest(model_path)

        def one(entry: ManifestEntry) -> dict:
            _, pred = _load_entry_pages(manifest_path, entry)
            features = object_features(_page_masks(pred), pred.width, pred.height, bins)
            score = predict_rfr(forest, features)
            return {
                "image_id": entry.image_id,
                "estimator": "map-rfr",
                "value": score.value,
                "orientation": "higher",
            }

        _emit_scores(_parallel_map(one, manifest.entries, jobs), out_path, "map-rfr")

    _run_guarded(run)


# ------------------------------------------------------------ reject-curve


def _load_scores_file(path: str) -> tuple[dict[str, float], bool]:
    """Scores as JSON-lines {image_id, value, orientation} or a plain dict."""
    text = Path(path).read_text(encoding="utf-8")
    higher = True
    try:
        doc = json.loads(text)
        if isinstance(doc, dict):
            return {k: float(v) for k, v in doc.items()}, True
    except json.JSONDecodeError:
        pass
    scores = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        scores[row["image_id"]] = float(row["value"])
        higher = row.get("orientation", "higher") == "higher"
    return scores, higher


@main.command(name="reject-curve")
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True))
@click.option("--metrics", "metrics_path", required=True, type=click.Path(exists=True))
@click.option("--thresholds", default=None, help="start:stop:step or comma list.")
@click.option("--bootstrap", "resamples", default=0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path())
def reject_curve_cmd(scores_path, metrics_path, thresholds, resamples, seed, out_path) -> None:
    """Rejection curve of the per-image metric, optionally with bootstrap bands."""

    def run() -> None:
        scores, higher = _load_scores_file(scores_path)
        metrics = json.loads(Path(metrics_path).read_text(encoding="utf-8"))
        metrics = {k: float(v) for k, v in metrics.items() if k in scores}
        if thresholds is not None:
            ths = _parse_thresholds(thresholds)
        elif higher:
            ths = [round(0.05 * k, 2) for k in range(21)]  # 0 to 1 step 0.05
        else:
            ths = [float(k) for k in range(10, -1, -1)]  # 10 down to 0
        curve = rejection_curve(scores, metrics, ths, higher_is_better=higher)
        report = {
            "tool_version": __version__,
            "orientation": "higher" if higher else "lower",
            "points": [
                {"threshold": p.threshold, "rejection_rate": p.rejection_rate,
                 "metric": p.metric_value}
                for p in curve.points
            ],
        }
        if resamples:
            bands = bootstrap_bands(scores, metrics, ths, resamples=resamples,
                                    seed=seed, higher_is_better=higher)
            report["bands"] = {
                "thresholds": list(bands.thresholds),
                "median": list(bands.median),
                "p10": list(bands.lower),
                "p90": list(bands.upper),
                "resamples": bands.resamples,
                "seed": bands.seed,
            }
        _emit(report, out_path, f"curve with {len(curve.points)} points")

    _run_guarded(run)


# ----------------------------------------------------------------- select


@main.command()
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True))
@click.option("--strategy", type=click.Choice(["lowest", "highest", "random"]), required=True)
@click.option("--threshold", default=None, type=float)
@click.option("--budget", default=None, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path())
def select(scores_path, strategy, threshold, budget, seed, out_path) -> None:
    """One-shot image selection from confidence scores."""

    def run() -> None:
        scores, higher = _load_scores_file(scores_path)
        outcome = select_images(
            scores, strategy=strategy, threshold=threshold, budget=budget,
            seed=seed, higher_is_better=higher,
        )
        report = {
            "strategy": outcome.strategy,
            "selected": list(outcome.selected),
            "threshold": outcome.threshold,
            "budget": outcome.budget,
            "annotation_mode": outcome.annotation_mode,
        }
        _emit(report, out_path, f"selected {len(outcome.selected)} images")

    _run_guarded(run)


# ------------------------------------------------------------------ al-run


@main.command(name="al-run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def al_run_cmd(config_path) -> None:
    """Active-learning loop driven by a JSON config.

    The config names the pool, a scores file (re-read each iteration, so an
    external trainer can refresh it), the strategy and the stop conditions.
    """

    def run() -> None:
        doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        scores_path = doc["scores_path"]

        def scorer(pool: Sequence[str]) -> dict[str, float]:
            scores, _ = _load_scores_file(scores_path)
            return {k: scores[k] for k in pool}

        cfg = ALConfig(
            pool=tuple(doc["pool"]),
            strategy=doc.get("strategy", "lowest"),
            budget_per_iteration=doc.get("budget_per_iteration"),
            threshold=doc.get("threshold"),
            quantile=doc.get("quantile"),
            max_iterations=doc.get("max_iterations", 0),
            total_budget=doc.get("total_budget"),
            seed=doc.get("seed", 0),
            trainer_cmd=doc.get("trainer_cmd"),
            out_dir=doc.get("out_dir", "."),
            higher_is_better=doc.get("orientation", "higher") == "higher",
        )
        ledger = al_run(cfg, scorer)
        sys.stdout.write(json.dumps({"iterations": len(ledger)}, sort_keys=True) + "\n")
        click.echo(f"completed {len(ledger)} iterations", err=True)

    _run_guarded(run)


if __name__ == "__main__":
    main()
