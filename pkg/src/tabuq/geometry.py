"""Axis-aligned rectangle arithmetic in image pixel coordinates.

Origin is the top-left corner; x grows right, y grows down. All operations
are pure functions and safe for arbitrary parallel use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class BBox:
    """Rectangle (x0, y0, x1, y1) with x0 <= x1 and y0 <= y1."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        for name in ("x0", "y0", "x1", "y1"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ValueError(f"bbox coordinate {name}={v!r} must be a finite number")
            if v < 0:
                raise ValueError(f"bbox coordinate {name}={v!r} must be >= 0")
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"bbox corners out of order: {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (float(self.x0), float(self.y0), float(self.x1), float(self.y1))

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)


@dataclass(frozen=True)
class ImageDims:
    """Pixel dimensions of an image; both sides strictly positive."""

    width: float
    height: float

    def __post_init__(self) -> None:
        for name in ("width", "height"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v) or v <= 0:
                raise ValueError(f"image {name}={v!r} must be a positive finite number")


def area(a: BBox) -> float:
    return (a.x1 - a.x0) * (a.y1 - a.y0)


def intersect(a: BBox, b: BBox) -> Optional[BBox]:
    """Overlap rectangle of two boxes, or None when the overlap area is zero.

    Edge-touching boxes do not intersect; this keeps a span on a shared
    border from being assigned to both neighbors.
    """
    x0 = max(a.x0, b.x0)
    y0 = max(a.y0, b.y0)
    x1 = min(a.x1, b.x1)
    y1 = min(a.y1, b.y1)
    if x1 <= x0 or y1 <= y0:
        return None
    return BBox(x0, y0, x1, y1)


def intersection_over_area(span_box: BBox, cell_box: BBox) -> float:
    """Overlap area divided by the area of ``span_box``.

    The denominator is always the span's own area, never the cell's. A
    zero-area span is invalid OCR input and raises.
    """
    denom = area(span_box)
    if denom <= 0:
        raise ValueError(f"degenerate OCR span bbox with zero area: {span_box.as_tuple()}")
    overlap = intersect(span_box, cell_box)
    if overlap is None:
        return 0.0
    return area(overlap) / denom


def scale_bbox(a: BBox, src: ImageDims, dst: ImageDims) -> BBox:
    """Rescale a box between coordinate frames using image-dimension ratios."""
    sx = dst.width / src.width
    sy = dst.height / src.height
    return BBox(a.x0 * sx, a.y0 * sy, a.x1 * sx, a.y1 * sy)


def merge_bboxes(boxes: Iterable[BBox]) -> BBox:
    """Envelope of a nonempty collection of boxes."""
    boxes = list(boxes)
    if not boxes:
        raise ValueError("merge_bboxes requires at least one box")
    return BBox(
        min(b.x0 for b in boxes),
        min(b.y0 for b in boxes),
        max(b.x1 for b in boxes),
        max(b.y1 for b in boxes),
    )


def boxes_to_array(boxes: Sequence[BBox]) -> np.ndarray:
    """Stack boxes into an (n, 4) float64 array for the batch kernels."""
    if not boxes:
        return np.zeros((0, 4))
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64)
