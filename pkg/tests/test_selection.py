import json

import numpy as np
import pytest

from docdeteval.confidence import ConfidenceScore
from docdeteval.errors import ConfigError, ValidationError
from docdeteval.selection import (
    ALConfig,
    al_run,
    bootstrap_bands,
    rejection_curve,
    replay_ledger,
    select_images,
)


def simple_scores(n=10):
    # image k has score k/10 and metric k/10: confidence tracks quality
    scores = {f"img{k:02d}": k / 10 for k in range(n)}
    metric = {f"img{k:02d}": k / 10 for k in range(n)}
    return scores, metric


class TestRejectionCurve:
    def test_monotone_when_score_tracks_metric(self):
        scores, metric = simple_scores()
        curve = rejection_curve(scores, metric, [0.0, 0.25, 0.5, 0.75])
        values = [p.metric_value for p in curve.points]
        assert values == sorted(values)
        rates = [p.rejection_rate for p in curve.points]
        assert rates == sorted(rates)

    def test_point_values(self):
        scores, metric = simple_scores(4)  # scores 0, .1, .2, .3
        curve = rejection_curve(scores, metric, [0.15])
        (p,) = curve.points
        assert p.rejection_rate == pytest.approx(0.5)
        assert p.metric_value == pytest.approx(0.25)  # mean of .2 and .3

    def test_empty_thresholds_omitted(self):
        scores, metric = simple_scores(4)
        curve = rejection_curve(scores, metric, [0.0, 99.0])
        assert [p.threshold for p in curve.points] == [0.0]

    def test_lower_is_better_orientation(self):
        scores = {"a": ConfidenceScore(1.0, higher_is_better=False),
                  "b": ConfidenceScore(5.0, higher_is_better=False)}
        metric = {"a": 0.9, "b": 0.1}
        curve = rejection_curve(scores, metric, [2.0])
        (p,) = curve.points
        assert curve.higher_is_better is False
        assert p.metric_value == pytest.approx(0.9)  # only "a" retained

    def test_mismatched_keys_raise(self):
        with pytest.raises(ValidationError):
            rejection_curve({"a": 1.0}, {"b": 1.0}, [0.5])

    def test_empty_raises(self):
        with pytest.raises(ValidationError):
            rejection_curve({}, {}, [0.5])


class TestBootstrapBands:
    def test_deterministic(self):
        scores, metric = simple_scores()
        b1 = bootstrap_bands(scores, metric, [0.0, 0.3, 0.6], seed=11)
        b2 = bootstrap_bands(scores, metric, [0.0, 0.3, 0.6], seed=11)
        assert b1 == b2

    def test_seed_matters(self):
        scores, metric = simple_scores()
        b1 = bootstrap_bands(scores, metric, [0.3], seed=1)
        b2 = bootstrap_bands(scores, metric, [0.3], seed=2)
        assert b1.median != b2.median or b1.lower != b2.lower or b1.upper != b2.upper

    def test_band_ordering(self):
        scores, metric = simple_scores()
        bands = bootstrap_bands(scores, metric, [0.0, 0.2, 0.4, 0.6])
        for lo, mid, hi in zip(bands.lower, bands.median, bands.upper):
            assert lo <= mid <= hi

    def test_two_image_enumeration(self):
        # two images, threshold 0: every resample keeps the full multiset, so
        # possible means are metric(a), metric(b), or their average.
        scores = {"a": 1.0, "b": 1.0}
        metric = {"a": 0.2, "b": 0.8}
        bands = bootstrap_bands(scores, metric, [0.0], resamples=200, seed=3)
        allowed = {0.2, 0.5, 0.8}
        assert bands.lower[0] in allowed or 0.2 <= bands.lower[0] <= 0.8
        assert bands.median[0] in allowed
        assert bands.resamples == 200

    def test_defaults(self):
        scores, metric = simple_scores()
        bands = bootstrap_bands(scores, metric, [0.0])
        assert bands.resamples == 100

    def test_too_few_resamples(self):
        scores, metric = simple_scores()
        with pytest.raises(ConfigError):
            bootstrap_bands(scores, metric, [0.0], resamples=1)


class TestSelectImages:
    def test_lowest_with_budget(self):
        scores, _ = simple_scores(5)
        out = select_images(scores, "lowest", budget=2)
        assert out.selected == ("img00", "img01")
        assert out.annotation_mode == "manual"

    def test_highest_with_budget(self):
        scores, _ = simple_scores(5)
        out = select_images(scores, "highest", budget=2)
        assert out.selected == ("img04", "img03")
        assert out.annotation_mode == "auto-label"

    def test_lowest_with_threshold(self):
        scores, _ = simple_scores(5)
        out = select_images(scores, "lowest", threshold=0.25)
        assert out.selected == ("img00", "img01", "img02")

    def test_orientation_flips_lowest(self):
        scores = {"a": ConfidenceScore(1.0, higher_is_better=False),
                  "b": ConfidenceScore(9.0, higher_is_better=False)}
        out = select_images(scores, "lowest", budget=1)
        assert out.selected == ("b",)  # highest variance = least confident

    def test_random_deterministic(self):
        scores, _ = simple_scores(20)
        out1 = select_images(scores, "random", budget=5, seed=7)
        out2 = select_images(scores, "random", budget=5, seed=7)
        assert out1.selected == out2.selected
        assert len(set(out1.selected)) == 5

    def test_budget_exceeds_pool_warns(self):
        scores, _ = simple_scores(3)
        with pytest.warns(UserWarning):
            out = select_images(scores, "lowest", budget=10)
        assert len(out.selected) == 3

    def test_threshold_and_budget_both_rejected(self):
        scores, _ = simple_scores(3)
        with pytest.raises(ConfigError):
            select_images(scores, "lowest", threshold=0.5, budget=1)
        with pytest.raises(ConfigError):
            select_images(scores, "lowest")

    def test_unknown_strategy(self):
        scores, _ = simple_scores(3)
        with pytest.raises(ConfigError):
            select_images(scores, "middle", budget=1)


class TestALRun:
    @staticmethod
    def scorer(pool):
        # stable synthetic confidence: derived from the numeric suffix
        return {p: int(p.lstrip("img")) / 100 for p in pool}

    def test_loop_and_ledger(self, tmp_path):
        pool = tuple(f"img{k:02d}" for k in range(10))
        cfg = ALConfig(pool=pool, strategy="lowest", budget_per_iteration=3,
                       max_iterations=5, out_dir=str(tmp_path))
        ledger = al_run(cfg, self.scorer)
        assert [len(e["selected"]) for e in ledger] == [3, 3, 3, 1]
        # least confident first, never repeated
        assert ledger[0]["selected"] == ["img00", "img01", "img02"]
        flat = [i for e in ledger for i in e["selected"]]
        assert sorted(flat) == sorted(pool)
        # manifests exist for each iteration
        for e in ledger:
            m = json.loads((tmp_path / f"selection_{e['iteration']:03d}.json").read_text())
            assert m["selected"] == e["selected"]

    def test_replay_round_trip(self, tmp_path):
        pool = tuple(f"img{k:02d}" for k in range(8))
        cfg = ALConfig(pool=pool, budget_per_iteration=3, max_iterations=10,
                       out_dir=str(tmp_path))
        ledger = al_run(cfg, self.scorer)
        replayed = replay_ledger(tmp_path / "ledger.jsonl")
        assert replayed == ledger

    def test_total_budget_truncates(self, tmp_path):
        pool = tuple(f"img{k:02d}" for k in range(10))
        cfg = ALConfig(pool=pool, budget_per_iteration=4, max_iterations=10,
                       total_budget=6, out_dir=str(tmp_path))
        ledger = al_run(cfg, self.scorer)
        assert sum(len(e["selected"]) for e in ledger) == 6
        assert ledger[-1]["budget_consumed"] == 6

    def test_trainer_command_runs(self, tmp_path):
        pool = ("img01", "img02")
        marker = tmp_path / "ran_{iteration}.txt"
        cfg = ALConfig(pool=pool, budget_per_iteration=2, max_iterations=1,
                       out_dir=str(tmp_path),
                       trainer_cmd=f"cp {{manifest}} {tmp_path}/ran_{{iteration}}.txt")
        al_run(cfg, self.scorer)
        assert (tmp_path / "ran_0.txt").exists()

    def test_trainer_failure_raises(self, tmp_path):
        cfg = ALConfig(pool=("img01",), budget_per_iteration=1, max_iterations=1,
                       out_dir=str(tmp_path), trainer_cmd="false")
        with pytest.raises(RuntimeError):
            al_run(cfg, self.scorer)

    def test_duplicate_in_ledger_detected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            json.dumps({"iteration": 0, "selected": ["a", "b"]}) + "\n"
            + json.dumps({"iteration": 1, "selected": ["b"]}) + "\n"
        )
        with pytest.raises(ValidationError):
            replay_ledger(path)

    def test_quantile_threshold(self, tmp_path):
        pool = tuple(f"img{k:02d}" for k in range(10))
        cfg = ALConfig(pool=pool, strategy="lowest", quantile=0.3,
                       max_iterations=1, out_dir=str(tmp_path))
        ledger = al_run(cfg, self.scorer)
        # the 30% quantile threshold selects roughly the bottom third
        assert 2 <= len(ledger[0]["selected"]) <= 4
