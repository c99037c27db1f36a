"""Rejection-curve analysis with bootstrap bands, and active-learning
selection with a replayable iteration ledger.

A rejection-curve point drops the images on the low-confidence side of a
threshold and reports the macro mean of the per-image metric over the
remaining ones. Selection respects score orientation: for a lower-is-better
score (e.g. object-count variance), "lowest confidence" means the highest
values.
"""

from __future__ import annotations

import json
import subprocess
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .confidence import ConfidenceScore
from .errors import ConfigError, ValidationError

DEFAULT_BOOTSTRAP_RESAMPLES = 100
BAND_PERCENTILES = (10.0, 90.0)


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    rejection_rate: float
    metric_value: float


@dataclass(frozen=True)
class RejectionCurve:
    points: tuple[CurvePoint, ...]
    higher_is_better: bool


@dataclass(frozen=True)
class BootstrapBands:
    thresholds: tuple[float, ...]
    median: tuple[float, ...]
    lower: tuple[float, ...]   # 10th percentile
    upper: tuple[float, ...]   # 90th percentile
    resamples: int
    seed: int


@dataclass(frozen=True)
class SelectionOutcome:
    iteration: int
    selected: tuple[str, ...]
    strategy: str
    threshold: Optional[float]
    budget: Optional[int]
    annotation_mode: str  # "manual" | "auto-label"


def _retained(
    scores: dict[str, float], higher_is_better: bool, threshold: float
) -> list[str]:
    if higher_is_better:
        return [k for k, v in scores.items() if v >= threshold]
    return [k for k, v in scores.items() if v <= threshold]


def rejection_curve(
    scores: dict[str, ConfidenceScore] | dict[str, float],
    per_image_metric: dict[str, float],
    thresholds: Sequence[float],
    higher_is_better: Optional[bool] = None,
) -> RejectionCurve:
    """Sweep thresholds, dropping the low-confidence side at each one.

    Thresholds retaining zero images are omitted, so the curve never reaches
    a 100% rejection rate.
    """
    if not scores:
        raise ValidationError("empty image set")
    if set(scores) != set(per_image_metric):
        raise ValidationError("scores and metrics must cover the same image set")
    values: dict[str, float] = {}
    orientation = higher_is_better
    for k, v in scores.items():
        if isinstance(v, ConfidenceScore):
            values[k] = v.value
            if orientation is None:
                orientation = v.higher_is_better
        else:
            values[k] = float(v)
    if orientation is None:
        orientation = True
    total = len(values)
    points = []
    for t in thresholds:
        kept = _retained(values, orientation, t)
        if not kept:
            continue
        metric = float(np.mean([per_image_metric[k] for k in sorted(kept)]))
        points.append(CurvePoint(float(t), (total - len(kept)) / total, metric))
    return RejectionCurve(points=tuple(points), higher_is_better=orientation)


def bootstrap_bands(
    scores: dict[str, ConfidenceScore] | dict[str, float],
    per_image_metric: dict[str, float],
    thresholds: Sequence[float],
    resamples: int = DEFAULT_BOOTSTRAP_RESAMPLES,
    seed: int = 0,
    higher_is_better: Optional[bool] = None,
) -> BootstrapBands:
    """Percentile bands from resampling the image set with replacement."""
    if resamples < 2:
        raise ConfigError("need at least 2 resamples")
    ids = sorted(scores)
    rng = np.random.default_rng(seed)
    per_threshold: dict[float, list[float]] = {float(t): [] for t in thresholds}
    for _ in range(resamples):
        pick = rng.integers(0, len(ids), size=len(ids))
        sample_scores = {f"{i}#{ids[j]}": scores[ids[j]] for i, j in enumerate(pick)}
        sample_metric = {f"{i}#{ids[j]}": per_image_metric[ids[j]] for i, j in enumerate(pick)}
        curve = rejection_curve(sample_scores, sample_metric, thresholds, higher_is_better)
        for p in curve.points:
            per_threshold[p.threshold].append(p.metric_value)
    present = [t for t in per_threshold if per_threshold[t]]
    present.sort()
    return BootstrapBands(
        thresholds=tuple(present),
        median=tuple(float(np.percentile(per_threshold[t], 50.0)) for t in present),
        lower=tuple(float(np.percentile(per_threshold[t], BAND_PERCENTILES[0])) for t in present),
        upper=tuple(float(np.percentile(per_threshold[t], BAND_PERCENTILES[1])) for t in present),
        resamples=resamples,
        seed=seed,
    )


def select_images(
    scores: dict[str, ConfidenceScore] | dict[str, float],
    strategy: str,
    threshold: Optional[float] = None,
    budget: Optional[int] = None,
    seed: int = 0,
    iteration: int = 0,
    higher_is_better: bool = True,
) -> SelectionOutcome:
    """Pick images from the pool by confidence.

    "lowest" queues the least-confident images for manual annotation;
    "highest" auto-labels the most-confident ones with their current
    predictions; "random" samples uniformly without replacement.
    """
    if not scores:
        raise ValidationError("empty pool")
    if strategy not in ("lowest", "highest", "random"):
        raise ConfigError(f"unknown strategy {strategy!r}")
    if (threshold is None) == (budget is None) and strategy != "random":
        raise ConfigError("give exactly one of threshold or budget")
    values: dict[str, float] = {}
    for k, v in scores.items():
        if isinstance(v, ConfidenceScore):
            values[k] = v.value
            higher_is_better = v.higher_is_better
        else:
            values[k] = float(v)
    ids = sorted(values)
    if budget is not None and budget > len(ids):
        warnings.warn(
            f"budget {budget} exceeds pool size {len(ids)}; selecting all",
            stacklevel=2,
        )
        budget = len(ids)

    if strategy == "random":
        if budget is None:
            raise ConfigError("random selection needs a budget")
        rng = np.random.default_rng(seed)
        pick = rng.choice(len(ids), size=budget, replace=False)
        selected = tuple(ids[i] for i in sorted(pick))
        mode = "manual"
    else:
        # confidence ascending: least confident first (orientation-aware)
        sign = 1.0 if higher_is_better else -1.0
        by_conf = sorted(ids, key=lambda k: (sign * values[k], k))
        if strategy == "lowest":
            if threshold is not None:
                selected = tuple(
                    k for k in by_conf
                    if (values[k] < threshold if higher_is_better else values[k] > threshold)
                )
            else:
                selected = tuple(by_conf[:budget])
            mode = "manual"
        else:  # highest
            if threshold is not None:
                selected = tuple(
                    k for k in reversed(by_conf)
                    if (values[k] > threshold if higher_is_better else values[k] < threshold)
                )
            else:
                selected = tuple(reversed(by_conf[len(by_conf) - budget :])) if budget else ()
            mode = "auto-label"
    return SelectionOutcome(
        iteration=iteration,
        selected=selected,
        strategy=strategy,
        threshold=threshold,
        budget=budget,
        annotation_mode=mode,
    )


@dataclass
class ALConfig:
    pool: tuple[str, ...]
    strategy: str = "lowest"
    budget_per_iteration: Optional[int] = None
    threshold: Optional[float] = None
    quantile: Optional[float] = None  # per-iteration threshold = score quantile
    max_iterations: int = 0
    total_budget: Optional[int] = None
    seed: int = 0
    trainer_cmd: Optional[str] = None  # template with {manifest} and {iteration}
    out_dir: str = "."
    higher_is_better: bool = True


def al_run(
    config: ALConfig,
    scorer: Callable[[Sequence[str]], dict[str, float]],
    ledger_path: str | Path | None = None,
) -> list[dict]:
    """Run the selection loop; returns the ledger entries.

    Per iteration: score the remaining pool, select, emit a selection
    manifest, optionally invoke the external trainer command, remove the
    selected ids, and append a ledger entry. The ledger (JSON-lines) is
    sufficient to replay the run.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ledger_path = Path(ledger_path) if ledger_path else out_dir / "ledger.jsonl"
    ledger_path.write_text("", encoding="utf-8")
    pool = list(config.pool)
    ledger: list[dict] = []
    consumed = 0
    for iteration in range(config.max_iterations):
        if not pool:
            break
        if config.total_budget is not None and consumed >= config.total_budget:
            break
        scores = scorer(tuple(pool))
        threshold = config.threshold
        if config.quantile is not None:
            threshold = float(np.quantile(sorted(scores.values()), config.quantile))
        outcome = select_images(
            scores,
            strategy=config.strategy,
            threshold=threshold,
            budget=config.budget_per_iteration if threshold is None else None,
            seed=config.seed + iteration,
            iteration=iteration,
            higher_is_better=config.higher_is_better,
        )
        selected = list(outcome.selected)
        if config.total_budget is not None:
            remaining = config.total_budget - consumed
            if len(selected) > remaining:
                selected = selected[:remaining]
        if not selected:
            break
        manifest_path = out_dir / f"selection_{iteration:03d}.json"
        manifest_path.write_text(
            json.dumps({"iteration": iteration, "selected": selected}, sort_keys=True),
            encoding="utf-8",
        )
        if config.trainer_cmd:
            cmd = config.trainer_cmd.format(manifest=str(manifest_path), iteration=iteration)
            result = subprocess.run(cmd, shell=True)
            if result.returncode != 0:
                raise RuntimeError(
                    f"trainer command failed with exit {result.returncode} "
                    f"(iteration {iteration}); ledger left intact"
                )
        pool = [p for p in pool if p not in set(selected)]
        consumed += len(selected)
        entry = {
            "iteration": iteration,
            "strategy": outcome.strategy,
            "threshold": threshold,
            "selected": selected,
            "budget_consumed": consumed,
            "annotation_mode": outcome.annotation_mode,
            "seed": config.seed + iteration,
        }
        ledger.append(entry)
        with ledger_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    return ledger


def replay_ledger(path: str | Path) -> list[dict]:
    """Parse a ledger file back into entries, validating the invariants."""
    entries = []
    seen: set[str] = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        entry = json.loads(line)
        for image_id in entry["selected"]:
            if image_id in seen:
                raise ValidationError(f"image {image_id} selected twice in ledger")
            seen.add(image_id)
        entries.append(entry)
    return entries
