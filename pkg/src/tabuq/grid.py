"""Build the grid-cell lattice from row and column detections.

Each cell is the intersection of one row box with one column box; its
structural confidence is the mean of the parent confidences.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Sequence

from .errors import DegenerateDataError
from .geometry import BBox, ImageDims, area, intersect, scale_bbox

ROW = "row"
COLUMN = "column"


class GridWarning(UserWarning):
    """Diagnostic emitted for skipped cell pairs and suspicious detections."""


@dataclass(frozen=True)
class StructureDetection:
    """One detected row or column with its model confidence."""

    kind: str
    bbox: BBox
    confidence: float

    def __post_init__(self) -> None:
        if self.kind not in (ROW, COLUMN):
            raise ValueError(f"detection kind must be 'row' or 'column', got {self.kind!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"detection confidence {self.confidence!r} outside [0, 1]")


@dataclass(frozen=True)
class GridCell:
    """A row/column intersection with indices and parent confidences."""

    row_index: int
    col_index: int
    bbox: BBox
    row_confidence: float
    col_confidence: float

    @property
    def location_confidence(self) -> float:
        """Structural certainty: the mean of the parent row and column confidences."""
        return (self.row_confidence + self.col_confidence) / 2


def _check_kinds(detections: Sequence[StructureDetection], kind: str) -> None:
    for d in detections:
        if d.kind != kind:
            raise ValueError(f"expected only {kind} detections, got {d.kind!r}")


def _warn_same_kind_overlaps(detections: Sequence[StructureDetection], kind: str) -> None:
    # Heavily overlapping same-kind detections signal TSR duplicates. They are
    # kept as distinct indices; deduplication is the detector's concern.
    for i in range(len(detections)):
        for j in range(i + 1, len(detections)):
            a, b = detections[i].bbox, detections[j].bbox
            overlap = intersect(a, b)
            if overlap is None:
                continue
            ov = area(overlap)
            ratio = max(ov / area(a) if area(a) > 0 else 0.0,
                        ov / area(b) if area(b) > 0 else 0.0)
            if ratio > 0.8:
                warnings.warn(
                    f"{kind} detections {i} and {j} overlap by {ratio:.0%} IoA; "
                    "possible duplicate detection",
                    GridWarning,
                    stacklevel=3,
                )


def build_grid(
    rows: Sequence[StructureDetection], cols: Sequence[StructureDetection]
) -> list[GridCell]:
    """Intersect every row with every column into indexed cells.

    Row indices follow ascending y0, column indices ascending x0 (ties broken
    by the other coordinate, then input order). Pairs with zero-area overlap
    are skipped with a GridWarning.
    """
    if not rows or not cols:
        raise DegenerateDataError("no structure detected: need at least one row and one column")
    _check_kinds(rows, ROW)
    _check_kinds(cols, COLUMN)
    _warn_same_kind_overlaps(rows, ROW)
    _warn_same_kind_overlaps(cols, COLUMN)

    rows_sorted = sorted(rows, key=lambda d: (d.bbox.y0, d.bbox.x0))
    cols_sorted = sorted(cols, key=lambda d: (d.bbox.x0, d.bbox.y0))

    cells: list[GridCell] = []
    for ri, row in enumerate(rows_sorted):
        for ci, col in enumerate(cols_sorted):
            overlap = intersect(row.bbox, col.bbox)
            if overlap is None:
                warnings.warn(
                    f"row {ri} and column {ci} have no overlap; cell skipped",
                    GridWarning,
                    stacklevel=2,
                )
                continue
            cells.append(
                GridCell(
                    row_index=ri,
                    col_index=ci,
                    bbox=overlap,
                    row_confidence=row.confidence,
                    col_confidence=col.confidence,
                )
            )
    return cells


def normalize_structures(
    rows: Sequence[StructureDetection],
    cols: Sequence[StructureDetection],
    tsr_dims: ImageDims,
    ocr_dims: ImageDims,
) -> tuple[list[StructureDetection], list[StructureDetection]]:
    """Rescale structure boxes from the TSR frame into the OCR frame."""
    def rescale(d: StructureDetection) -> StructureDetection:
        return replace(d, bbox=scale_bbox(d.bbox, tsr_dims, ocr_dims))

    return [rescale(d) for d in rows], [rescale(d) for d in cols]
