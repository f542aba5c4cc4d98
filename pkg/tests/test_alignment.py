import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabuq.alignment import OcrSpan, match_spans, reading_order
from tabuq.geometry import BBox
from tabuq.grid import GridCell


def cell(r, c, x0, y0, x1, y1, rc=0.9, cc=0.9):
    return GridCell(row_index=r, col_index=c, bbox=BBox(x0, y0, x1, y1),
                    row_confidence=rc, col_confidence=cc)


def span(x0, y0, x1, y1, text="t", conf=0.9):
    return OcrSpan(bbox=BBox(x0, y0, x1, y1), text=text, confidence=conf)


TWO_CELLS = [cell(0, 0, 0, 0, 50, 20), cell(0, 1, 50, 0, 100, 20)]


def test_span_inside_cell():
    extracted, unmatched = match_spans(TWO_CELLS, [span(5, 5, 30, 15, text="abc")])
    assert extracted[0].text == "abc"
    assert extracted[0].matched_span_count == 1
    assert unmatched == []


def test_threshold_plus_argmax():
    # 60% of the span over cell A, 40% over cell B
    s = span(20, 0, 70, 20, text="x")
    extracted, unmatched = match_spans(TWO_CELLS, [s])
    assert extracted[0].text == "x"
    assert extracted[1].text == ""
    assert unmatched == []


def test_empty_cell_rule():
    extracted, _ = match_spans(TWO_CELLS, [span(5, 5, 30, 15)])
    empty = extracted[1]
    assert empty.text == ""
    assert empty.ocr_confidence == 0.0
    assert empty.matched_span_count == 0


def test_mean_confidence_aggregation():
    spans = [span(2, 2, 20, 8, text="a", conf=0.8), span(2, 12, 20, 18, text="b", conf=0.6)]
    extracted, _ = match_spans(TWO_CELLS, spans)
    assert extracted[0].ocr_confidence == pytest.approx(0.7)
    assert extracted[0].text == "a b"


def test_unmatched_span_reported():
    far = span(200, 200, 240, 220)
    extracted, unmatched = match_spans(TWO_CELLS, [far])
    assert unmatched == [far]
    assert all(e.matched_span_count == 0 for e in extracted)


def test_ioa_exactly_at_threshold_is_not_a_match():
    # span half inside the cell: IoA == 0.5 does not exceed the threshold
    s = span(25, 0, 75, 20)
    extracted, unmatched = match_spans([TWO_CELLS[0]], [s], ioa_threshold=0.5)
    assert unmatched == [s]


def test_threshold_validation():
    with pytest.raises(ValueError):
        match_spans(TWO_CELLS, [], ioa_threshold=0.0)
    with pytest.raises(ValueError):
        match_spans(TWO_CELLS, [], ioa_threshold=1.5)


def test_tie_broken_by_smaller_cell_area_then_index():
    big = cell(0, 0, 0, 0, 100, 100)
    small = cell(1, 1, 0, 0, 40, 40)  # span fully inside both -> IoA 1 for both
    s = span(5, 5, 20, 20)
    extracted, _ = match_spans([big, small], [s])
    assert extracted[1].matched_span_count == 1
    assert extracted[0].matched_span_count == 0


def test_span_partition_and_threshold_monotonicity():
    rng = np.random.default_rng(2)
    cells = [
        cell(r, c, c * 30.0, r * 15.0, c * 30.0 + 28.0, r * 15.0 + 13.0)
        for r in range(4)
        for c in range(4)
    ]
    spans = []
    for _ in range(60):
        x0 = float(rng.uniform(0, 110))
        y0 = float(rng.uniform(0, 55))
        spans.append(span(x0, y0, x0 + float(rng.uniform(1, 20)), y0 + float(rng.uniform(1, 8))))
    prev_matched = -1
    for threshold in (0.9, 0.7, 0.5, 0.3, 0.1):
        extracted, unmatched = match_spans(cells, spans, ioa_threshold=threshold)
        matched = sum(e.matched_span_count for e in extracted)
        assert matched + len(unmatched) == len(spans)
        assert matched >= prev_matched
        prev_matched = matched
        for e in extracted:
            assert 0.0 <= e.ocr_confidence <= 1.0
            if e.matched_span_count == 0:
                assert e.text == "" and e.ocr_confidence == 0.0


@settings(max_examples=60)
@given(st.lists(st.text(min_size=0, max_size=5), min_size=1, max_size=5))
def test_concatenated_length_identity(texts):
    cells = [cell(0, 0, 0, 0, 100, 100)]
    spans = [
        span(2.0 + 3 * i, 2.0, 4.0 + 3 * i, 4.0, text=t, conf=0.5) for i, t in enumerate(texts)
    ]
    extracted, _ = match_spans(cells, spans)
    got = extracted[0]
    assert len(got.text) == sum(len(t) for t in texts) + (len(texts) - 1)


class TestReadingOrder:
    def test_single(self):
        s = span(0, 0, 10, 10)
        assert reading_order([s]) == [s]

    def test_left_before_right(self):
        right = span(50, 0, 60, 10, text="b")
        left = span(0, 0, 10, 10, text="a")
        assert [s.text for s in reading_order([right, left])] == ["a", "b"]

    def test_lines_then_columns(self):
        # two text lines, two spans each, handed over shuffled
        a = span(0, 0, 20, 10, text="a")
        b = span(30, 1, 50, 11, text="b")
        c = span(0, 20, 20, 30, text="c")
        d = span(30, 21, 50, 31, text="d")
        shuffled = [d, a, c, b]
        assert [s.text for s in reading_order(shuffled)] == ["a", "b", "c", "d"]

    def test_reconstructs_known_order_on_synthetic_grids(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            n_lines = int(rng.integers(1, 5))
            per_line = int(rng.integers(1, 5))
            truth = []
            for li in range(n_lines):
                y0 = li * 12.0
                for ci in range(per_line):
                    x0 = ci * 25.0 + float(rng.uniform(0, 3))
                    truth.append(
                        span(x0, y0 + float(rng.uniform(0, 2)), x0 + 18.0,
                             y0 + 9.0 + float(rng.uniform(0, 2)),
                             text=f"{li}-{ci}")
                    )
            shuffled = list(truth)
            rng.shuffle(shuffled)
            assert [s.text for s in reading_order(shuffled)] == [s.text for s in truth]


def test_degenerate_span_rejected_at_construction():
    with pytest.raises(ValueError, match="zero area"):
        OcrSpan(bbox=BBox(0, 0, 0, 10), text="x", confidence=0.5)


def test_span_confidence_validated():
    with pytest.raises(ValueError):
        OcrSpan(bbox=BBox(0, 0, 5, 5), text="x", confidence=-0.1)
