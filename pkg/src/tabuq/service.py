"""Review service: serves run artifacts, applies corrections, reports live metrics.

State is an append-only event log folded over the review_state artifact;
restarting the service replays the log and reproduces the same state.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Optional

from fastapi import APIRouter, FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse
from pydantic import BaseModel

from .errors import InputSchemaError
from .evaluation import report_from_flags, texts_match
from .pipeline import CellKey

VERDICTS = ("accept", "correct", "unresolvable")


class ReviewError(Exception):
    """Request-level failure with an HTTP status."""

    def __init__(self, status: int, message: str) -> None:
        super().__init__(message)
        self.status = status
        self.message = message


class CorrectionBody(BaseModel):
    verdict: Literal["accept", "correct", "unresolvable"]
    reviewer_text: Optional[str] = None
    event_id: Optional[str] = None
    timestamp: Optional[str] = None


@dataclass
class CellState:
    table_id: str
    domain: str
    row: int
    col: int
    bbox: list[float]
    original_text: str
    current_text: str
    location_confidence: float
    ocr_confidence: float
    matched_span_count: int
    score: Optional[float]
    uncertainty: Optional[float]
    flagged: bool
    correct_before: Optional[bool]
    gt_matched: bool
    gt_text: Optional[str]
    in_eval_split: bool
    status: str = "pending"

    @property
    def key(self) -> CellKey:
        return (self.table_id, self.row, self.col)

    def payload(self) -> dict:
        return {
            "row": self.row,
            "col": self.col,
            "bbox": self.bbox,
            "text": self.current_text,
            "original_text": self.original_text,
            "location_confidence": self.location_confidence,
            "ocr_confidence": self.ocr_confidence,
            "matched_span_count": self.matched_span_count,
            "score": self.score,
            "uncertainty": self.uncertainty,
            "flagged": self.flagged,
            "status": self.status,
            "gt_matched": self.gt_matched,
            "gt_text": self.gt_text,
            "in_eval_split": self.in_eval_split,
        }


@dataclass
class TableState:
    table_id: str
    domain: str
    image_ref: Optional[str]
    image: dict
    warnings: list[str]
    unmatched_spans: list[dict]
    cells: dict[tuple[int, int], CellState] = field(default_factory=dict)


class ReviewStore:
    """Run artifacts plus the correction-event fold, behind a single write lock."""

    def __init__(self, state_dir: Path) -> None:
        self.state_dir = Path(state_dir)
        state_path = self.state_dir / "review_state.json"
        if not state_path.exists():
            raise InputSchemaError(f"{state_path}: review state not found; run evaluate first")
        try:
            with open(state_path, encoding="utf-8") as fh:
                state = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputSchemaError(f"{state_path}: corrupt state ({exc})")

        self.config: dict = state.get("config", {})
        self.model: dict = state.get("model", {})
        self.similarity_threshold = float(self.config.get("similarity_threshold", 1.0))
        self.tables: dict[str, TableState] = {}
        for table in state.get("tables", []):
            ts = TableState(
                table_id=table["table_id"],
                domain=table.get("domain", "default"),
                image_ref=table.get("image_ref"),
                image=table.get("image", {}),
                warnings=table.get("warnings", []),
                unmatched_spans=table.get("unmatched_spans", []),
            )
            for cell in table.get("cells", []):
                cs = CellState(
                    table_id=ts.table_id,
                    domain=ts.domain,
                    row=cell["row"],
                    col=cell["col"],
                    bbox=cell["bbox"],
                    original_text=cell["text"],
                    current_text=cell["text"],
                    location_confidence=cell["location_confidence"],
                    ocr_confidence=cell["ocr_confidence"],
                    matched_span_count=cell["matched_span_count"],
                    score=cell.get("score"),
                    uncertainty=cell.get("uncertainty"),
                    flagged=bool(cell.get("flagged", False)),
                    correct_before=cell.get("correct"),
                    gt_matched=bool(cell.get("gt_matched", False)),
                    gt_text=cell.get("gt_text"),
                    in_eval_split=bool(cell.get("in_eval_split", True)),
                )
                ts.cells[(cs.row, cs.col)] = cs
            self.tables[ts.table_id] = ts

        report_path = self.state_dir / "report.json"
        self.batch_report: Optional[dict] = None
        if report_path.exists():
            with open(report_path, encoding="utf-8") as fh:
                self.batch_report = json.load(fh)

        self.events_path = self.state_dir / "events.jsonl"
        self.acks: dict[str, dict] = {}
        self.event_count = 0
        self.lock = threading.Lock()
        self._replay()

    def _replay(self) -> None:
        if not self.events_path.exists():
            return
        with open(self.events_path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise InputSchemaError(
                        f"{self.events_path}: corrupt event log at line {line_no} ({exc})"
                    )
                self._apply(
                    table_id=event["table_id"],
                    row=event["row"],
                    col=event["col"],
                    verdict=event["verdict"],
                    reviewer_text=event.get("reviewer_text"),
                    event_id=event["event_id"],
                    timestamp=event.get("timestamp"),
                    persist=False,
                )

    def _cell(self, table_id: str, row: int, col: int) -> CellState:
        table = self.tables.get(table_id)
        if table is None:
            raise ReviewError(404, f"unknown table {table_id!r}")
        cell = table.cells.get((row, col))
        if cell is None:
            raise ReviewError(404, f"unknown cell ({row}, {col}) in table {table_id!r}")
        return cell

    def _apply(
        self,
        table_id: str,
        row: int,
        col: int,
        verdict: str,
        reviewer_text: Optional[str],
        event_id: str,
        timestamp: Optional[str],
        persist: bool,
    ) -> dict:
        if event_id in self.acks:
            return self.acks[event_id]
        if verdict not in VERDICTS:
            raise ReviewError(422, f"verdict must be one of {VERDICTS}, got {verdict!r}")
        if verdict == "correct" and reviewer_text is None:
            raise ReviewError(422, "verdict 'correct' requires reviewer_text")
        cell = self._cell(table_id, row, col)
        if not cell.flagged:
            raise ReviewError(409, f"cell ({row}, {col}) is not flagged for review")
        if cell.status != "pending":
            raise ReviewError(409, f"cell ({row}, {col}) already resolved: {cell.status}")

        event = {
            "event_id": event_id,
            "table_id": table_id,
            "row": row,
            "col": col,
            "verdict": verdict,
            "reviewer_text": reviewer_text,
            "timestamp": timestamp or datetime.now(timezone.utc).isoformat(),
        }
        if persist:
            with open(self.events_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, ensure_ascii=False) + "\n")
                fh.flush()

        if verdict == "accept":
            cell.status = "accepted"
        elif verdict == "unresolvable":
            cell.status = "unresolvable"
        else:
            cell.status = "corrected"
            cell.current_text = reviewer_text or ""
        self.event_count += 1
        ack = {
            "event_id": event_id,
            "table_id": table_id,
            "cell": cell.payload(),
            "remaining_flagged": self.remaining_flagged(),
        }
        self.acks[event_id] = ack
        return ack

    def apply_event(self, table_id: str, row: int, col: int, body: CorrectionBody) -> dict:
        with self.lock:
            event_id = body.event_id or uuid.uuid4().hex
            return self._apply(
                table_id=table_id,
                row=row,
                col=col,
                verdict=body.verdict,
                reviewer_text=body.reviewer_text,
                event_id=event_id,
                timestamp=body.timestamp,
                persist=True,
            )

    def remaining_flagged(self, table_id: Optional[str] = None) -> int:
        tables = [self.tables[table_id]] if table_id else self.tables.values()
        return sum(
            1
            for t in tables
            for c in t.cells.values()
            if c.flagged and c.status == "pending"
        )

    def reviewed(self, table_id: Optional[str] = None) -> int:
        tables = [self.tables[table_id]] if table_id else self.tables.values()
        return sum(
            1
            for t in tables
            for c in t.cells.values()
            if c.flagged and c.status != "pending"
        )

    def _resolved_correct(self, cell: CellState) -> bool:
        if cell.status != "corrected" or cell.gt_text is None:
            return False
        return texts_match(cell.current_text, cell.gt_text, self.similarity_threshold)

    def live_report(self) -> dict:
        with self.lock:
            scopes: dict[str, list[CellState]] = {}
            all_cells: list[CellState] = []
            per_table: dict[str, list[CellState]] = {t: [] for t in self.tables}
            for table in self.tables.values():
                for cell in table.cells.values():
                    if not cell.in_eval_split or cell.correct_before is None:
                        continue
                    all_cells.append(cell)
                    scopes.setdefault(table.domain, []).append(cell)
                    per_table[table.table_id].append(cell)

            def scope_report(cells: list[CellState]) -> dict:
                if not cells:
                    return {"empty_split": True}
                pairs = [(c.flagged, bool(c.correct_before)) for c in cells]
                corrected = {c.key for c in cells if self._resolved_correct(c)}
                ids = [c.key for c in cells]
                return report_from_flags(pairs, corrected, ids=ids).to_dict()

            return {
                "reviewed": self.reviewed(),
                "remaining_flagged": self.remaining_flagged(),
                "aggregate": scope_report(all_cells),
                "domains": {d: scope_report(scopes[d]) for d in sorted(scopes)},
                "tables": {t: scope_report(per_table[t]) for t in sorted(per_table)},
            }

    def tables_payload(self) -> list[dict]:
        with self.lock:
            out = []
            for table_id in sorted(self.tables):
                table = self.tables[table_id]
                flagged = sum(1 for c in table.cells.values() if c.flagged)
                out.append(
                    {
                        "table_id": table_id,
                        "domain": table.domain,
                        "cell_count": len(table.cells),
                        "flagged": flagged,
                        "remaining_flagged": self.remaining_flagged(table_id),
                        "reviewed": self.reviewed(table_id),
                        "has_image": table.image_ref is not None,
                    }
                )
            return out

    def cells_payload(self, table_id: str, flagged: Optional[bool]) -> dict:
        with self.lock:
            table = self.tables.get(table_id)
            if table is None:
                raise ReviewError(404, f"unknown table {table_id!r}")
            cells = list(table.cells.values())
            if flagged is not None:
                cells = [c for c in cells if c.flagged == flagged]
            if flagged:
                # review-queue ordering: riskiest first, stable tie-break
                cells.sort(key=lambda c: (-(c.uncertainty or 0.0), c.table_id, c.row, c.col))
            else:
                cells.sort(key=lambda c: (c.row, c.col))
            return {
                "table_id": table_id,
                "domain": table.domain,
                "image": table.image,
                "warnings": table.warnings,
                "unmatched_spans": table.unmatched_spans,
                "cells": [c.payload() for c in cells],
            }


def create_app(state_dir: Path) -> FastAPI:
    store = ReviewStore(state_dir)
    app = FastAPI(title="tabuq review service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store
    router = APIRouter(prefix="/v1")

    @router.get("/tables")
    def list_tables() -> list[dict]:
        return store.tables_payload()

    @router.get("/tables/{table_id}/cells")
    def table_cells(table_id: str, flagged: Optional[bool] = None) -> dict:
        try:
            return store.cells_payload(table_id, flagged)
        except ReviewError as exc:
            raise HTTPException(exc.status, exc.message)

    @router.get("/tables/{table_id}/image")
    def table_image(table_id: str) -> Response:
        table = store.tables.get(table_id)
        if table is None:
            raise HTTPException(404, f"unknown table {table_id!r}")
        if not table.image_ref:
            raise HTTPException(404, f"table {table_id!r} has no image")
        path = Path(table.image_ref)
        if not path.is_absolute():
            path = store.state_dir / path
        if not path.exists():
            raise HTTPException(404, f"image file missing for table {table_id!r}")
        return FileResponse(path)

    @router.post("/tables/{table_id}/cells/{coord}/correction")
    def post_correction(table_id: str, coord: str, body: CorrectionBody) -> dict:
        try:
            row_s, _, col_s = coord.partition(",")
            row, col = int(row_s), int(col_s)
        except ValueError:
            raise HTTPException(422, f"cell coordinate must be 'row,col', got {coord!r}")
        try:
            return store.apply_event(table_id, row, col, body)
        except ReviewError as exc:
            raise HTTPException(exc.status, exc.message)

    @router.get("/report")
    def report() -> dict:
        if store.batch_report is None:
            raise HTTPException(404, "no batch report in state dir")
        return store.batch_report

    @router.get("/report/live")
    def report_live() -> dict:
        return store.live_report()

    app.include_router(router)
    return app


def serve_review(state_dir: Path, bind_address: str = "127.0.0.1:8400") -> None:
    """Run the review service until interrupted."""
    import uvicorn

    host, _, port_s = bind_address.partition(":")
    app = create_app(state_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port_s or 8400), log_level="info")
