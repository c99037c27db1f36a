import numpy as np
import pytest
from hypothesis import given, strategies as st

from docdeteval.raster import mask_from_grid
from docdeteval.text_metrics import (
    cer,
    cer_line,
    cer_page,
    edit_distance,
    match_lines,
    reading_order,
    wer,
    wer_page,
)

from oracles import edit_distance_full_dp


def box_mask(width, height, x0, y0, x1, y1):
    grid = np.zeros((height, width), dtype=bool)
    grid[y0:y1, x0:x1] = True
    return mask_from_grid(grid)


text = st.text(alphabet="abcde ", max_size=20)


class TestEditDistance:
    def test_known_values(self):
        assert edit_distance("kitten", "sitting") == 3
        assert edit_distance("", "abc") == 3
        assert edit_distance("abc", "") == 3
        assert edit_distance("same", "same") == 0
        assert edit_distance("flaw", "lawn") == 2

    @given(a=text, b=text)
    def test_matches_full_dp(self, a, b):
        assert edit_distance(a, b) == edit_distance_full_dp(a, b)

    @given(a=text, b=text)
    def test_symmetry(self, a, b):
        assert edit_distance(a, b) == edit_distance(b, a)

    @given(a=text, b=text, c=text)
    def test_triangle_inequality(self, a, b, c):
        assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)

    @given(a=text, b=text)
    def test_bounds(self, a, b):
        d = edit_distance(a, b)
        assert abs(len(a) - len(b)) <= d <= max(len(a), len(b))

    @given(a=text, b=text)
    def test_identity_of_indiscernibles(self, a, b):
        assert (edit_distance(a, b) == 0) == (a == b)


class TestCerWer:
    def test_cer_values(self):
        assert cer("abc", "abc") == 0.0
        assert cer("axc", "abc") == pytest.approx(1 / 3)
        assert cer("", "") == 0.0
        assert cer("junk", "") == 4.0  # insertions against an empty reference

    def test_wer_values(self):
        assert wer("the cat sat", "the cat sat") == 0.0
        assert wer("the dog sat", "the cat sat") == pytest.approx(1 / 3)
        assert wer("", "") == 0.0
        assert wer("extra words here", "") == 3.0

    @given(a=text)
    def test_perfect_hypothesis_scores_zero(self, a):
        assert cer(a, a) == 0.0
        assert wer(a, a) == 0.0


class TestReadingOrder:
    def test_rows_then_columns(self):
        top_right = (box_mask(40, 40, 20, 0, 30, 5), "B")
        top_left = (box_mask(40, 40, 0, 0, 10, 5), "A")
        bottom = (box_mask(40, 40, 0, 20, 10, 25), "C")
        lines = [bottom, top_right, top_left]
        order = reading_order(lines)
        assert [lines[i][1] for i in order] == ["A", "B", "C"]

    def test_page_cer_detects_swapped_lines(self):
        line1 = (box_mask(40, 40, 0, 0, 20, 5), "hello")
        line2 = (box_mask(40, 40, 0, 10, 20, 15), "world")
        assert cer_page([line2, line1], "hello world") == 0.0
        # with the texts attached to the wrong boxes the join is reversed
        wrong1 = (line1[0], "world")
        wrong2 = (line2[0], "hello")
        assert cer_page([wrong1, wrong2], "hello world") > 0.0

    def test_wer_page(self):
        line1 = (box_mask(40, 40, 0, 0, 20, 5), "hello")
        line2 = (box_mask(40, 40, 0, 10, 20, 15), "world")
        assert wer_page([line1, line2], "hello world") == 0.0
        assert wer_page([line1, line2], "hello there world") == pytest.approx(1 / 3)


class TestLineMatching:
    def test_one_to_one_by_iou(self):
        gt1 = box_mask(40, 40, 0, 0, 10, 10)
        gt2 = box_mask(40, 40, 20, 0, 30, 10)
        pred1 = box_mask(40, 40, 0, 0, 10, 10)   # IoU 1.0 with gt1
        pred2 = box_mask(40, 40, 21, 0, 30, 10)  # high IoU with gt2
        pairs = match_lines([pred1, pred2], [gt1, gt2])
        assert [(i, j) for i, j, _ in pairs] == [(0, 0), (1, 1)]

    def test_zero_iou_never_matches(self):
        gt = box_mask(40, 40, 0, 0, 10, 10)
        pred = box_mask(40, 40, 20, 20, 30, 30)
        assert match_lines([pred], [gt]) == []

    def test_each_side_used_once(self):
        gt = box_mask(40, 40, 0, 0, 10, 10)
        p1 = box_mask(40, 40, 0, 0, 10, 10)
        p2 = box_mask(40, 40, 0, 1, 10, 10)
        pairs = match_lines([p1, p2], [gt])
        assert len(pairs) == 1
        assert pairs[0][:2] == (0, 0)


class TestCerLine:
    def test_worked_example(self):
        # One GT line of 10 chars matched at IoU 0.7 with 2 character errors,
        # plus a spurious 4-char prediction. At t=0.5 the match counts:
        # (2 + 4) / 10 = 0.6. At t=0.75 it is demoted to a deletion:
        # (10 + 4) / 10 = 1.4.
        gt_box = box_mask(60, 20, 0, 0, 10, 10)   # 100 px
        pred_box = box_mask(60, 20, 0, 3, 10, 10)  # 70 px inside -> IoU 0.7
        spurious = box_mask(60, 20, 30, 0, 34, 4)
        result = cer_line(
            [(pred_box, "abcdefgxyj"), (spurious, "zzzz")],
            [(gt_box, "abcdefghij")],
            thresholds=(0.5, 0.75),
        )
        assert result.cer_at[0.5] == pytest.approx(0.6)
        assert result.cer_at[0.75] == pytest.approx(1.4)
        assert result.matched_char_fraction_at[0.5] == pytest.approx(1.0)
        assert result.matched_char_fraction_at[0.75] == 0.0

    def test_perfect_lines(self):
        gt_box = box_mask(40, 40, 0, 0, 20, 5)
        result = cer_line([(gt_box, "hello")], [(gt_box, "hello")])
        assert all(v == 0.0 for v in result.cer_at.values())
        assert result.cer_range == 0.0

    def test_no_predictions(self):
        gt_box = box_mask(40, 40, 0, 0, 20, 5)
        result = cer_line([], [(gt_box, "hello")])
        assert all(v == 1.0 for v in result.cer_at.values())

    def test_no_gt(self):
        pred_box = box_mask(40, 40, 0, 0, 20, 5)
        result = cer_line([(pred_box, "noise")], [])
        # denominator clamps to 1: five inserted characters
        assert all(v == 5.0 for v in result.cer_at.values())

    def test_empty_both_sides(self):
        result = cer_line([], [])
        assert all(v == 0.0 for v in result.cer_at.values())

    def test_monotone_in_threshold_with_substitution_noise(self, rng):
        # When predicted texts differ from references by substitutions only,
        # each pair's edit distance never exceeds the reference length, so
        # demoting a pair at a higher threshold cannot reduce the error.
        alphabet = "abcdefghij"
        for _ in range(20):
            n = int(rng.integers(1, 5))
            gts, preds = [], []
            for k in range(n):
                y0 = k * 8
                gt_box = box_mask(60, 60, 0, y0, 30, y0 + 6)
                shift = int(rng.integers(0, 4))
                pred_box = box_mask(60, 60, 0, y0 + shift, 30, y0 + 6)
                length = int(rng.integers(1, 12))
                ref = "".join(rng.choice(list(alphabet), size=length))
                hyp = "".join(
                    c if rng.random() > 0.3 else str(rng.choice(list(alphabet)))
                    for c in ref
                )
                gts.append((gt_box, ref))
                preds.append((pred_box, hyp))
            result = cer_line(preds, gts)
            values = [result.cer_at[t] for t in sorted(result.cer_at)]
            assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))
