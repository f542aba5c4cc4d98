"""Input-file parsing and artifact serialization.

All files are JSON. Validation errors name the offending file and field so
batch runs fail with actionable messages.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .alignment import OcrSpan
from .errors import InputSchemaError
from .evaluation import GroundTruthCell
from .geometry import BBox, ImageDims, area
from .grid import COLUMN, ROW, StructureDetection


def _load_json(path: Path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputSchemaError(f"{path}: file not found")
    except json.JSONDecodeError as exc:
        raise InputSchemaError(f"{path}: invalid JSON ({exc})")


def _require(obj: dict, key: str, path: Path, ctx: str = "") -> Any:
    where = f"{ctx}.{key}" if ctx else key
    if not isinstance(obj, dict) or key not in obj:
        raise InputSchemaError(f"{path}: missing field {where}")
    return obj[key]


def _number(value: Any, path: Path, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise InputSchemaError(f"{path}: field {field} must be a finite number, got {value!r}")
    return float(value)


def _confidence(value: Any, path: Path, field: str) -> float:
    v = _number(value, path, field)
    if not 0.0 <= v <= 1.0:
        raise InputSchemaError(f"{path}: field {field} must be within [0, 1], got {value!r}")
    return v


def _parse_bbox(value: Any, path: Path, field: str) -> BBox:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise InputSchemaError(f"{path}: field {field} must be [x0, y0, x1, y1]")
    coords = [_number(v, path, f"{field}[{i}]") for i, v in enumerate(value)]
    try:
        return BBox(*coords)
    except ValueError as exc:
        raise InputSchemaError(f"{path}: field {field}: {exc}")


def _parse_dims(value: Any, path: Path, field: str) -> ImageDims:
    width = _number(_require(value, "width", path, field), path, f"{field}.width")
    height = _number(_require(value, "height", path, field), path, f"{field}.height")
    try:
        return ImageDims(width, height)
    except ValueError as exc:
        raise InputSchemaError(f"{path}: field {field}: {exc}")


@dataclass(frozen=True)
class TsrFile:
    dims: ImageDims
    rows: list[StructureDetection]
    cols: list[StructureDetection]


@dataclass(frozen=True)
class OcrFile:
    dims: ImageDims
    spans: list[OcrSpan]


def _parse_structures(items: Any, kind: str, path: Path, field: str) -> list[StructureDetection]:
    if not isinstance(items, list):
        raise InputSchemaError(f"{path}: field {field} must be a list")
    out = []
    for i, item in enumerate(items):
        ctx = f"{field}[{i}]"
        bbox = _parse_bbox(_require(item, "bbox", path, ctx), path, f"{ctx}.bbox")
        conf = _confidence(_require(item, "confidence", path, ctx), path, f"{ctx}.confidence")
        out.append(StructureDetection(kind=kind, bbox=bbox, confidence=conf))
    return out


def load_tsr_file(path: Path) -> TsrFile:
    """Parse a structure-detection file (rows/columns with confidences)."""
    path = Path(path)
    data = _load_json(path)
    dims = _parse_dims(_require(data, "image", path), path, "image")
    rows = _parse_structures(_require(data, "rows", path), ROW, path, "rows")
    cols = _parse_structures(_require(data, "columns", path), COLUMN, path, "columns")
    return TsrFile(dims=dims, rows=rows, cols=cols)


def load_ocr_file(path: Path) -> OcrFile:
    """Parse an OCR file (text spans with confidences)."""
    path = Path(path)
    data = _load_json(path)
    dims = _parse_dims(_require(data, "image", path), path, "image")
    items = _require(data, "spans", path)
    if not isinstance(items, list):
        raise InputSchemaError(f"{path}: field spans must be a list")
    spans = []
    for i, item in enumerate(items):
        ctx = f"spans[{i}]"
        bbox = _parse_bbox(_require(item, "bbox", path, ctx), path, f"{ctx}.bbox")
        if area(bbox) <= 0:
            raise InputSchemaError(f"{path}: field {ctx}.bbox has zero area")
        text = _require(item, "text", path, ctx)
        if not isinstance(text, str):
            raise InputSchemaError(f"{path}: field {ctx}.text must be a string")
        conf = _confidence(_require(item, "confidence", path, ctx), path, f"{ctx}.confidence")
        spans.append(OcrSpan(bbox=bbox, text=text, confidence=conf))
    return OcrFile(dims=dims, spans=spans)


def load_gt_file(path: Path) -> list[GroundTruthCell]:
    """Parse a ground-truth file (annotated cells with logical spans)."""
    path = Path(path)
    data = _load_json(path)
    items = _require(data, "cells", path)
    if not isinstance(items, list):
        raise InputSchemaError(f"{path}: field cells must be a list")
    out = []
    for i, item in enumerate(items):
        ctx = f"cells[{i}]"
        bbox = _parse_bbox(_require(item, "bbox", path, ctx), path, f"{ctx}.bbox")
        indices = {}
        for key in ("start_row", "start_col", "end_row", "end_col"):
            v = _require(item, key, path, ctx)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise InputSchemaError(f"{path}: field {ctx}.{key} must be an integer >= 0")
            indices[key] = v
        text = _require(item, "text", path, ctx)
        if not isinstance(text, str):
            raise InputSchemaError(f"{path}: field {ctx}.text must be a string")
        try:
            out.append(GroundTruthCell(bbox=bbox, text=text, **indices))
        except ValueError as exc:
            raise InputSchemaError(f"{path}: field {ctx}: {exc}")
    return out


def write_json(path: Path, payload: Any) -> Path:
    """Write a payload as stable, human-readable JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    return path


def read_json(path: Path) -> Any:
    return _load_json(Path(path))


def span_payload(span: OcrSpan) -> dict:
    return {
        "bbox": list(span.bbox.as_tuple()),
        "text": span.text,
        "confidence": span.confidence,
    }


def cell_payload(extracted, include_spans: bool = False) -> dict:
    """Stable-order record for one extracted cell."""
    cell = extracted.cell
    payload = {
        "row": cell.row_index,
        "col": cell.col_index,
        "bbox": list(cell.bbox.as_tuple()),
        "text": extracted.text,
        "row_confidence": cell.row_confidence,
        "col_confidence": cell.col_confidence,
        "location_confidence": cell.location_confidence,
        "ocr_confidence": extracted.ocr_confidence,
        "matched_span_count": extracted.matched_span_count,
        "score": extracted.score,
        "uncertainty": extracted.uncertainty,
        "flagged": extracted.flagged,
    }
    if include_spans:
        payload["spans"] = [span_payload(s) for s in extracted.spans]
    return payload


@dataclass(frozen=True)
class TableJob:
    """One table's input files plus its reporting domain."""

    table_id: str
    tsr_input: Path
    ocr_input: Path
    gt_input: Optional[Path] = None
    image_ref: Optional[Path] = None
    domain: str = "default"


def load_jobs_manifest(path: Path) -> list[TableJob]:
    """Parse a jobs manifest; relative paths resolve against the manifest."""
    path = Path(path)
    data = _load_json(path)
    items = _require(data, "jobs", path)
    if not isinstance(items, list) or not items:
        raise InputSchemaError(f"{path}: field jobs must be a nonempty list")
    base = path.parent
    jobs = []
    seen: set[str] = set()
    for i, item in enumerate(items):
        ctx = f"jobs[{i}]"
        table_id = _require(item, "table_id", path, ctx)
        if not isinstance(table_id, str) or not table_id:
            raise InputSchemaError(f"{path}: field {ctx}.table_id must be a nonempty string")
        if table_id in seen:
            raise InputSchemaError(f"{path}: field {ctx}.table_id duplicates {table_id!r}")
        seen.add(table_id)

        def resolve(key: str, required: bool) -> Optional[Path]:
            if key not in item or item[key] is None:
                if required:
                    raise InputSchemaError(f"{path}: missing field {ctx}.{key}")
                return None
            value = item[key]
            if not isinstance(value, str):
                raise InputSchemaError(f"{path}: field {ctx}.{key} must be a path string")
            p = Path(value)
            return p if p.is_absolute() else base / p

        domain = item.get("domain", "default")
        if not isinstance(domain, str) or not domain:
            raise InputSchemaError(f"{path}: field {ctx}.domain must be a nonempty string")
        jobs.append(
            TableJob(
                table_id=table_id,
                tsr_input=resolve("tsr_input", required=True),
                ocr_input=resolve("ocr_input", required=True),
                gt_input=resolve("gt_input", required=False),
                image_ref=resolve("image_ref", required=False),
                domain=domain,
            )
        )
    return jobs
