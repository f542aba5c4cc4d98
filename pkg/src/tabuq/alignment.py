"""Match OCR text spans to grid cells and aggregate text and confidence.

A span belongs to the cell that maximizes IoA among cells where the IoA
strictly exceeds the threshold (default 0.5, the 50%-of-span-area rule).
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import kernels
from .geometry import BBox, area, boxes_to_array
from .grid import GridCell


@dataclass(frozen=True)
class OcrSpan:
    """One recognized text fragment with its bbox and recognition confidence."""

    bbox: BBox
    text: str
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"span confidence {self.confidence!r} outside [0, 1]")
        if area(self.bbox) <= 0:
            raise ValueError(f"span bbox has zero area: {self.bbox.as_tuple()}")


@dataclass
class ExtractedCell:
    """A grid cell with its aggregated text, confidences, and review state."""

    cell: GridCell
    text: str = ""
    ocr_confidence: float = 0.0
    matched_span_count: int = 0
    score: Optional[float] = None
    uncertainty: Optional[float] = None
    flagged: bool = False
    spans: list[OcrSpan] = field(default_factory=list, repr=False)


def reading_order(spans: Sequence[OcrSpan]) -> list[OcrSpan]:
    """Sort spans into visual reading order.

    Spans are grouped into horizontal bands (text lines) by vertical center,
    using half the median span height as the line-break threshold, then
    ordered left to right within each band.
    """
    if not spans:
        return []
    band_height = statistics.median(s.bbox.height for s in spans)
    indexed = sorted(enumerate(spans), key=lambda kv: (kv[1].bbox.center[1], kv[0]))
    bands: list[list[tuple[int, OcrSpan]]] = []
    anchor = None
    for idx, span in indexed:
        cy = span.bbox.center[1]
        if anchor is None or cy - anchor > band_height * 0.5:
            bands.append([])
            anchor = cy
        bands[-1].append((idx, span))
    ordered: list[OcrSpan] = []
    for band in bands:
        band.sort(key=lambda kv: (kv[1].bbox.x0, kv[0]))
        ordered.extend(span for _, span in band)
    return ordered


def match_spans(
    cells: Sequence[GridCell],
    spans: Sequence[OcrSpan],
    ioa_threshold: float = 0.5,
) -> tuple[list[ExtractedCell], list[OcrSpan]]:
    """Assign each span to at most one cell and aggregate per-cell content.

    Returns one ExtractedCell per input cell (cells with no match keep empty
    text and OCR confidence 0) plus the spans that matched no cell. Ties in
    IoA are broken by smaller cell area, then lower (row, col) index.
    """
    if not 0.0 < ioa_threshold <= 1.0:
        raise ValueError(f"ioa_threshold {ioa_threshold!r} outside (0, 1]")

    span_boxes = boxes_to_array([s.bbox for s in spans])
    cell_boxes = boxes_to_array([c.bbox for c in cells])
    ioa = kernels.pairwise_ioa(span_boxes, cell_boxes)

    cell_areas = [area(c.bbox) for c in cells]
    matched: dict[int, list[OcrSpan]] = {}
    unmatched: list[OcrSpan] = []
    for si, span in enumerate(spans):
        best: Optional[int] = None
        for ci in range(len(cells)):
            v = ioa[si, ci]
            if v <= ioa_threshold:
                continue
            if best is None:
                best = ci
                continue
            b = ioa[si, best]
            if v > b or (
                v == b
                and (cell_areas[ci], cells[ci].row_index, cells[ci].col_index)
                < (cell_areas[best], cells[best].row_index, cells[best].col_index)
            ):
                best = ci
        if best is None:
            unmatched.append(span)
        else:
            matched.setdefault(best, []).append(span)

    extracted: list[ExtractedCell] = []
    for ci, cell in enumerate(cells):
        cell_spans = matched.get(ci, [])
        if not cell_spans:
            extracted.append(ExtractedCell(cell=cell))
            continue
        ordered = reading_order(cell_spans)
        extracted.append(
            ExtractedCell(
                cell=cell,
                text=" ".join(s.text for s in ordered),
                ocr_confidence=sum(s.confidence for s in cell_spans) / len(cell_spans),
                matched_span_count=len(cell_spans),
                spans=ordered,
            )
        )
    return extracted, unmatched
