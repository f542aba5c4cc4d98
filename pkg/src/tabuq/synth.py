"""Synthetic table corpus with seeded error injection.

Generates matched structure/OCR/ground-truth files (plus optional rendered
images) for demos and the end-to-end test suite. Injected defects mirror the
real failure modes: dropped spans (blank cells), corrupted low-confidence
text, and jittered structure boxes with degraded confidence.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .artifacts import write_json

DOMAINS = ["computer_science", "materials_science", "biology", "icdar2013"]

_WORDS = [
    "rate", "flux", "mean", "cells", "alloy", "protein", "yield", "phase",
    "error", "depth", "index", "ratio", "sample", "trial", "oxide", "layer",
    "gene", "score", "width", "batch",
]

# visually confusable substitutions an OCR engine tends to make
_CONFUSIONS = {"0": "O", "O": "0", "1": "l", "l": "1", "5": "S", "S": "5",
               "8": "B", "B": "8", "a": "o", "o": "a", "e": "c", "c": "e"}


@dataclass
class SynthTable:
    """One generated table: file payloads plus the injected-defect bookkeeping."""

    table_id: str
    domain: str
    tsr: dict
    ocr: dict
    gt: dict
    n_rows: int
    n_cols: int
    dropped: list[tuple[int, int]]
    corrupted: list[tuple[int, int]]


def _cell_text(rng: np.random.Generator, row: int, col: int) -> str:
    if row == 0 or col == 0:
        return str(rng.choice(_WORDS))
    kind = rng.integers(0, 3)
    if kind == 0:
        return f"{rng.uniform(0, 100):.2f}"
    if kind == 1:
        return str(int(rng.integers(0, 10000)))
    return f"{rng.choice(_WORDS)}-{int(rng.integers(1, 99))}"


def _corrupt_text(rng: np.random.Generator, text: str) -> str:
    for _ in range(20):
        chars = list(text)
        op = int(rng.integers(0, 3))
        pos = int(rng.integers(0, len(chars))) if chars else 0
        if op == 0 and chars:
            chars[pos] = _CONFUSIONS.get(chars[pos], "#")
        elif op == 1 and len(chars) > 1:
            del chars[pos]
        else:
            chars.insert(pos, str(rng.choice(list("#%~"))))
        mutated = "".join(chars)
        if " ".join(mutated.split()) != " ".join(text.split()):
            return mutated
    return text + "#"


def generate_table(
    rng: np.random.Generator,
    table_id: str,
    domain: str,
    inject: bool = True,
    n_rows: Optional[int] = None,
    n_cols: Optional[int] = None,
    force_defects: bool = False,
) -> SynthTable:
    """Build one synthetic table; ``force_defects`` guarantees one drop and one corruption."""
    n_rows = int(n_rows if n_rows is not None else rng.integers(3, 7))
    n_cols = int(n_cols if n_cols is not None else rng.integers(3, 6))

    margin = 20.0
    col_widths = rng.uniform(70, 120, n_cols)
    row_heights = rng.uniform(26, 40, n_rows)
    x_edges = margin + np.concatenate([[0.0], np.cumsum(col_widths)])
    y_edges = margin + np.concatenate([[0.0], np.cumsum(row_heights)])
    width = float(x_edges[-1] + margin)
    height = float(y_edges[-1] + margin)

    # structure detections live in a differently scaled frame
    tsr_scale = float(rng.choice([1.0, 1.25, 1.5, 2.0]))
    jitter_rows = set()
    jitter_cols = set()
    if inject:
        for r in range(n_rows):
            if rng.random() < 0.10:
                jitter_rows.add(r)
        for c in range(n_cols):
            if rng.random() < 0.10:
                jitter_cols.add(c)

    def row_box(r: int) -> tuple[float, float, float, float]:
        y0, y1 = y_edges[r], y_edges[r + 1]
        if r in jitter_rows:
            shift = float(rng.uniform(0.04, 0.08) * (y1 - y0) * rng.choice([-1, 1]))
            y0, y1 = y0 + shift, y1 + shift
        return (margin * 0.5, float(y0), width - margin * 0.5, float(y1))

    def col_box(c: int) -> tuple[float, float, float, float]:
        x0, x1 = x_edges[c], x_edges[c + 1]
        if c in jitter_cols:
            shift = float(rng.uniform(0.04, 0.08) * (x1 - x0) * rng.choice([-1, 1]))
            x0, x1 = x0 + shift, x1 + shift
        return (float(x0), margin * 0.5, float(x1), height - margin * 0.5)

    def struct_conf(jittered: bool) -> float:
        if jittered:
            return float(rng.uniform(0.76, 0.86))
        return float(rng.uniform(0.90, 0.99))

    rows_payload = []
    for r in range(n_rows):
        box = row_box(r)
        rows_payload.append(
            {
                "bbox": [v * tsr_scale for v in box],
                "confidence": round(struct_conf(r in jitter_rows), 6),
            }
        )
    cols_payload = []
    for c in range(n_cols):
        box = col_box(c)
        cols_payload.append(
            {
                "bbox": [v * tsr_scale for v in box],
                "confidence": round(struct_conf(c in jitter_cols), 6),
            }
        )

    texts = [[_cell_text(rng, r, c) for c in range(n_cols)] for r in range(n_rows)]

    dropped: list[tuple[int, int]] = []
    corrupted: list[tuple[int, int]] = []
    spans = []
    for r in range(n_rows):
        for c in range(n_cols):
            drop = inject and rng.random() < 0.02
            corrupt = inject and not drop and rng.random() < 0.05
            if force_defects and (r, c) == (1, 1):
                drop, corrupt = False, True
            if force_defects and (r, c) == (2, 2):
                drop, corrupt = True, False
            if drop:
                dropped.append((r, c))
                continue
            x0, x1 = x_edges[c], x_edges[c + 1]
            y0, y1 = y_edges[r], y_edges[r + 1]
            inset_x = 0.18 * (x1 - x0)
            inset_y = 0.22 * (y1 - y0)
            text = texts[r][c]
            conf = float(rng.uniform(0.90, 0.99))
            if corrupt:
                corrupted.append((r, c))
                text = _corrupt_text(rng, text)
                conf = float(rng.uniform(0.35, 0.60))
            spans.append(
                {
                    "bbox": [
                        float(x0 + inset_x),
                        float(y0 + inset_y),
                        float(x1 - inset_x),
                        float(y1 - inset_y),
                    ],
                    "text": text,
                    "confidence": round(conf, 6),
                }
            )

    gt_cells = []
    for r in range(n_rows):
        for c in range(n_cols):
            gt_cells.append(
                {
                    "bbox": [
                        float(x_edges[c]),
                        float(y_edges[r]),
                        float(x_edges[c + 1]),
                        float(y_edges[r + 1]),
                    ],
                    "start_row": r,
                    "start_col": c,
                    "end_row": r,
                    "end_col": c,
                    "text": texts[r][c],
                }
            )

    return SynthTable(
        table_id=table_id,
        domain=domain,
        tsr={
            "image": {"width": width * tsr_scale, "height": height * tsr_scale},
            "rows": rows_payload,
            "columns": cols_payload,
        },
        ocr={"image": {"width": width, "height": height}, "spans": spans},
        gt={"cells": gt_cells},
        n_rows=n_rows,
        n_cols=n_cols,
        dropped=dropped,
        corrupted=corrupted,
    )


def _render_image(table: SynthTable, path: Path) -> None:
    from PIL import Image, ImageDraw

    dims = table.ocr["image"]
    img = Image.new("RGB", (int(dims["width"]), int(dims["height"])), "white")
    draw = ImageDraw.Draw(img)
    for cell in table.gt["cells"]:
        x0, y0, x1, y1 = cell["bbox"]
        draw.rectangle([x0, y0, x1, y1], outline=(170, 170, 170))
    for span in table.ocr["spans"]:
        x0, y0, _, _ = span["bbox"]
        draw.text((x0 + 1, y0 + 1), span["text"], fill=(30, 30, 30))
    img.save(path)


def generate_corpus(
    out_dir: Path,
    n_tables: int = 20,
    seed: int = 20250407,
    inject: bool = True,
    images: bool = True,
) -> Path:
    """Write a jobs manifest plus per-table input files; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    jobs = []
    for i in range(n_tables):
        table_id = f"table_{i:03d}"
        domain = DOMAINS[i % len(DOMAINS)]
        table = generate_table(
            rng, table_id, domain, inject=inject, force_defects=inject and i == 0
        )
        write_json(out / f"{table_id}.tsr.json", table.tsr)
        write_json(out / f"{table_id}.ocr.json", table.ocr)
        write_json(out / f"{table_id}.gt.json", table.gt)
        job = {
            "table_id": table_id,
            "domain": domain,
            "tsr_input": f"{table_id}.tsr.json",
            "ocr_input": f"{table_id}.ocr.json",
            "gt_input": f"{table_id}.gt.json",
        }
        if images:
            _render_image(table, out / f"{table_id}.png")
            job["image_ref"] = f"{table_id}.png"
        jobs.append(job)
    return write_json(out / "jobs.json", {"jobs": jobs})
