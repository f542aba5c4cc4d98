"""End-to-end orchestration: extract, calibrate, evaluate, and review-state prep.

All batch operations are deterministic given the same inputs, config, and
seed; artifacts are plain JSON so reruns can be compared byte for byte.
"""

from __future__ import annotations

import shutil
import warnings
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import conformal
from .alignment import ExtractedCell, OcrSpan, match_spans
from .artifacts import (
    TableJob,
    cell_payload,
    load_gt_file,
    load_ocr_file,
    load_tsr_file,
    read_json,
    span_payload,
    write_json,
)
from .errors import DegenerateDataError, InputSchemaError
from .evaluation import (
    EvaluationReport,
    GroundTruthCell,
    compute_report,
    emulate_human_correction,
    label_correct,
    match_ground_truth,
)
from .grid import build_grid, normalize_structures

SCORE_KINDS = tuple(k.value for k in conformal.ScoreKind)

CellKey = tuple[str, int, int]


@dataclass(frozen=True)
class RunConfig:
    """Knobs for a full run; defaults follow the documented operating point."""

    score_fn: str = "aps"
    hss_weights: object = None  # (w_row, w_col, w_text), "auto", or None
    alpha: float = 0.1
    tau: float = 0.03
    ioa_threshold: float = 0.5
    similarity_threshold: float = 1.0
    calib_fraction: float = 0.5
    seed: int = 0
    per_domain_calibration: bool = False

    def __post_init__(self) -> None:
        if self.score_fn not in SCORE_KINDS:
            raise ValueError(f"score_fn must be one of {SCORE_KINDS}, got {self.score_fn!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha {self.alpha!r} outside (0, 1)")
        if self.tau < 0:
            raise ValueError(f"tau {self.tau!r} must be >= 0")
        if not 0.0 < self.ioa_threshold <= 1.0:
            raise ValueError(f"ioa_threshold {self.ioa_threshold!r} outside (0, 1]")
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValueError(
                f"similarity_threshold {self.similarity_threshold!r} outside [0, 1]"
            )
        if not 0.0 < self.calib_fraction < 1.0:
            raise ValueError(f"calib_fraction {self.calib_fraction!r} outside (0, 1)")
        if self.hss_weights is not None and self.hss_weights != "auto":
            w = tuple(self.hss_weights)
            if len(w) != 3 or not all(0.0 <= v <= 1.0 for v in w):
                raise ValueError(f"hss_weights {self.hss_weights!r} must be 3 values in [0, 1]")
            object.__setattr__(self, "hss_weights", w)

    def score_function(self) -> conformal.ScoreFunction:
        kind = conformal.ScoreKind(self.score_fn)
        if kind is not conformal.ScoreKind.HSS:
            return conformal.ScoreFunction(kind=kind)
        if isinstance(self.hss_weights, tuple):
            return conformal.ScoreFunction(kind=kind, hss_weights=self.hss_weights)
        # "auto" resolves during calibration; until then score with full weights
        return conformal.ScoreFunction(kind=kind, hss_weights=(1.0, 1.0, 1.0))

    def to_dict(self) -> dict:
        return {
            "score_fn": self.score_fn,
            "hss_weights": list(self.hss_weights)
            if isinstance(self.hss_weights, tuple)
            else self.hss_weights,
            "alpha": self.alpha,
            "tau": self.tau,
            "ioa_threshold": self.ioa_threshold,
            "similarity_threshold": self.similarity_threshold,
            "calib_fraction": self.calib_fraction,
            "seed": self.seed,
            "per_domain_calibration": self.per_domain_calibration,
        }


@dataclass
class CalibrationModel:
    """Fitted conformal model: score function, threshold(s), and review cutoff."""

    score_function: conformal.ScoreFunction
    alpha: float
    q_hat: float
    flag_threshold_tau: float
    calibration_size: int
    calib_fraction: float
    seed: int
    q_hat_by_domain: Optional[dict[str, float]] = None
    tau_tuned: bool = False

    def q_for(self, domain: str) -> float:
        if self.q_hat_by_domain and domain in self.q_hat_by_domain:
            return self.q_hat_by_domain[domain]
        return self.q_hat

    def to_dict(self) -> dict:
        return {
            "score_function": {
                "kind": self.score_function.kind.value,
                "hss_weights": list(self.score_function.hss_weights)
                if self.score_function.hss_weights is not None
                else None,
            },
            "alpha": self.alpha,
            "q_hat": self.q_hat,
            "flag_threshold_tau": self.flag_threshold_tau,
            "calibration_size": self.calibration_size,
            "calib_fraction": self.calib_fraction,
            "seed": self.seed,
            "q_hat_by_domain": self.q_hat_by_domain,
            "tau_tuned": self.tau_tuned,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationModel":
        sf = data["score_function"]
        weights = sf.get("hss_weights")
        return cls(
            score_function=conformal.ScoreFunction(
                kind=conformal.ScoreKind(sf["kind"]),
                hss_weights=tuple(weights) if weights is not None else None,
            ),
            alpha=data["alpha"],
            q_hat=data["q_hat"],
            flag_threshold_tau=data["flag_threshold_tau"],
            calibration_size=data["calibration_size"],
            calib_fraction=data["calib_fraction"],
            seed=data["seed"],
            q_hat_by_domain=data.get("q_hat_by_domain"),
            tau_tuned=data.get("tau_tuned", False),
        )


def load_model(path: Path) -> CalibrationModel:
    data = read_json(path)
    try:
        return CalibrationModel.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputSchemaError(f"{path}: not a valid calibration model ({exc})")


@dataclass
class TableExtraction:
    """In-memory result of running one table through grid, alignment, and scoring."""

    job: TableJob
    cells: list[ExtractedCell]
    records: list[conformal.ConformalRecord]
    unmatched: list[OcrSpan]
    warnings: list[str]
    ocr_dims: tuple[float, float]
    gt: Optional[list[GroundTruthCell]] = None
    gt_matches: Optional[list[Optional[GroundTruthCell]]] = None
    labels: Optional[list[bool]] = None

    def keys(self) -> list[CellKey]:
        return [(self.job.table_id, c.cell.row_index, c.cell.col_index) for c in self.cells]


def extract_table(job: TableJob, cfg: RunConfig) -> TableExtraction:
    """Run one table end to end, up to conformal scoring (no flagging yet)."""
    tsr = load_tsr_file(job.tsr_input)
    ocr = load_ocr_file(job.ocr_input)
    rows, cols = normalize_structures(tsr.rows, tsr.cols, tsr.dims, ocr.dims)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            grid_cells = build_grid(rows, cols)
        except DegenerateDataError as exc:
            raise DegenerateDataError(f"table {job.table_id}: {exc}")
        cells, unmatched = match_spans(grid_cells, ocr.spans, cfg.ioa_threshold)
    warning_messages = [str(w.message) for w in caught]

    fn = cfg.score_function()
    records = [
        conformal.ConformalRecord(
            tsr_confidence=c.cell.location_confidence,
            ocr_confidence=c.ocr_confidence,
            row_confidence=c.cell.row_confidence,
            col_confidence=c.cell.col_confidence,
        )
        for c in cells
    ]
    scores = conformal.score_batch(records, fn)
    for cell, s in zip(cells, scores):
        cell.score = float(s)

    extraction = TableExtraction(
        job=job,
        cells=cells,
        records=records,
        unmatched=unmatched,
        warnings=warning_messages,
        ocr_dims=(ocr.dims.width, ocr.dims.height),
    )
    if job.gt_input is not None:
        extraction.gt = load_gt_file(job.gt_input)
        extraction.gt_matches = [m for _, m in match_ground_truth(cells, extraction.gt)]
        extraction.labels = [
            label_correct(c, m, cfg.similarity_threshold)
            for c, m in zip(cells, extraction.gt_matches)
        ]
    return extraction


def rescore(extraction: TableExtraction, fn: conformal.ScoreFunction) -> None:
    """Recompute cell scores under a different score function (e.g. tuned weights)."""
    scores = conformal.score_batch(extraction.records, fn)
    for cell, s in zip(extraction.cells, scores):
        cell.score = float(s)


def apply_model(extraction: TableExtraction, model: CalibrationModel) -> None:
    """Fill per-cell uncertainty and flag from a fitted model."""
    q = model.q_for(extraction.job.domain)
    for cell in extraction.cells:
        assert cell.score is not None
        cell.uncertainty = conformal.uncertainty(cell.score, q)
        cell.flagged = conformal.flag(cell.uncertainty, model.flag_threshold_tau)


def _apply_uncalibrated(extraction: TableExtraction, tau: float) -> None:
    # Without a model the reference threshold is 0: uncertainty is the raw score.
    for cell in extraction.cells:
        assert cell.score is not None
        cell.uncertainty = conformal.uncertainty(cell.score, 0.0)
        cell.flagged = conformal.flag(cell.uncertainty, tau)


def domain_split(
    keys_by_domain: dict[str, list[CellKey]], fraction: float, seed: int
) -> set[CellKey]:
    """Seeded per-domain calibration split over canonically ordered cell keys.

    The same (seed, fraction, keys) always produce the same split, so
    calibration and evaluation stay disjoint across separate runs.
    """
    calib: set[CellKey] = set()
    for domain in sorted(keys_by_domain):
        keys = sorted(keys_by_domain[domain])
        n = len(keys)
        k = int(n * fraction)
        rng = np.random.default_rng([seed, zlib.crc32(domain.encode("utf-8"))])
        order = rng.permutation(n)
        calib.update(keys[i] for i in order[:k])
    return calib


def _extract_all(jobs: Sequence[TableJob], cfg: RunConfig) -> list[TableExtraction]:
    seen: set[str] = set()
    for job in jobs:
        if job.table_id in seen:
            raise InputSchemaError(f"duplicate table_id {job.table_id!r} in job list")
        seen.add(job.table_id)
    return [extract_table(job, cfg) for job in jobs]


def _keys_by_domain(extractions: Sequence[TableExtraction]) -> dict[str, list[CellKey]]:
    out: dict[str, list[CellKey]] = {}
    for ex in extractions:
        out.setdefault(ex.job.domain, []).extend(ex.keys())
    return out


def _cells_artifact_payload(
    extraction: TableExtraction, cfg: RunConfig, model: Optional[CalibrationModel]
) -> dict:
    return {
        "table_id": extraction.job.table_id,
        "domain": extraction.job.domain,
        "image": {"width": extraction.ocr_dims[0], "height": extraction.ocr_dims[1]},
        "config": cfg.to_dict(),
        "model": model.to_dict() if model is not None else None,
        "warnings": extraction.warnings,
        "unmatched_spans": [span_payload(s) for s in extraction.unmatched],
        "cells": [cell_payload(c) for c in extraction.cells],
    }


def run_extract(
    job: TableJob,
    cfg: RunConfig,
    out_dir: Path,
    model: Optional[CalibrationModel] = None,
) -> Path:
    """Extract one table and write its cells artifact."""
    extraction = extract_table(job, cfg)
    if model is not None:
        rescore(extraction, model.score_function)
        apply_model(extraction, model)
    else:
        _apply_uncalibrated(extraction, cfg.tau)
    payload = _cells_artifact_payload(extraction, cfg, model)
    return write_json(Path(out_dir) / f"{job.table_id}.cells.json", payload)


def _require_labels(
    extractions: Sequence[TableExtraction], purpose: str
) -> None:
    missing = sorted(ex.job.table_id for ex in extractions if ex.labels is None)
    if missing:
        raise InputSchemaError(
            f"ground truth required for {purpose}; missing for tables: {', '.join(missing)}"
        )


def run_calibrate(
    jobs: Sequence[TableJob],
    cfg: RunConfig,
    out_dir: Optional[Path] = None,
    tune_tau: bool = False,
) -> CalibrationModel:
    """Pool cells across jobs, split per domain, and fit the conformal model.

    HSS "auto" weights and the tau sweep both run on the calibration split
    only and both require ground-truth labels.
    """
    if not jobs:
        raise DegenerateDataError("no jobs to calibrate on")
    extractions = _extract_all(jobs, cfg)
    keys_by_domain = _keys_by_domain(extractions)
    calib_keys = domain_split(keys_by_domain, cfg.calib_fraction, cfg.seed)
    if not calib_keys:
        raise DegenerateDataError("calibration split empty")

    index: dict[CellKey, tuple[TableExtraction, int]] = {}
    for ex in extractions:
        for i, key in enumerate(ex.keys()):
            index[key] = (ex, i)

    fn = cfg.score_function()
    if cfg.score_fn == conformal.ScoreKind.HSS.value and cfg.hss_weights == "auto":
        _require_labels(extractions, "HSS weight tuning")
        calib_records = [
            conformal.ConformalRecord(
                tsr_confidence=index[k][0].records[index[k][1]].tsr_confidence,
                ocr_confidence=index[k][0].records[index[k][1]].ocr_confidence,
                row_confidence=index[k][0].records[index[k][1]].row_confidence,
                col_confidence=index[k][0].records[index[k][1]].col_confidence,
                correct=index[k][0].labels[index[k][1]],
            )
            for k in sorted(calib_keys)
        ]
        weights = conformal.tune_hss_weights(calib_records, cfg.alpha)
        fn = conformal.ScoreFunction(kind=conformal.ScoreKind.HSS, hss_weights=weights)
        for ex in extractions:
            rescore(ex, fn)

    def scores_for(keys: Sequence[CellKey]) -> np.ndarray:
        return np.array([index[k][0].cells[index[k][1]].score for k in keys])

    sorted_calib = sorted(calib_keys)
    q_hat = conformal.calibrate(scores_for(sorted_calib), cfg.alpha)
    q_by_domain: Optional[dict[str, float]] = None
    if cfg.per_domain_calibration:
        q_by_domain = {}
        for domain in sorted(keys_by_domain):
            domain_keys = [k for k in sorted_calib if index[k][0].job.domain == domain]
            if not domain_keys:
                raise DegenerateDataError(f"calibration split empty for domain {domain!r}")
            q_by_domain[domain] = conformal.calibrate(scores_for(domain_keys), cfg.alpha)

    tau = cfg.tau
    tau_tuned = False
    if tune_tau:
        _require_labels(extractions, "threshold tuning")
        labeled = []
        for k in sorted_calib:
            ex, i = index[k]
            q = q_by_domain[ex.job.domain] if q_by_domain else q_hat
            u = conformal.uncertainty(ex.cells[i].score, q)
            labeled.append((u, ex.labels[i]))
        tau, _ = conformal.sweep_flag_threshold(labeled, conformal.default_tau_grid())
        tau_tuned = True

    model = CalibrationModel(
        score_function=fn,
        alpha=cfg.alpha,
        q_hat=q_hat,
        flag_threshold_tau=tau,
        calibration_size=len(calib_keys),
        calib_fraction=cfg.calib_fraction,
        seed=cfg.seed,
        q_hat_by_domain=q_by_domain,
        tau_tuned=tau_tuned,
    )
    if out_dir is not None:
        write_json(Path(out_dir) / "model.json", model.to_dict())
    return model


@dataclass
class EvaluationRun:
    """Reports at every scope plus the review-state payload."""

    aggregate: EvaluationReport
    by_domain: dict[str, EvaluationReport]
    by_table: dict[str, Optional[EvaluationReport]]
    review_state: dict
    report_payload: dict = field(repr=False, default_factory=dict)


def _scope_report(
    entries: list[tuple[ExtractedCell, bool, CellKey, bool]],
) -> Optional[EvaluationReport]:
    # entries: (cell, correct, key, corrected)
    if not entries:
        return None
    labeled = [(cell, ok) for cell, ok, _, _ in entries]
    corrected = {key for _, _, key, corr in entries if corr}
    ids = [key for _, _, key, _ in entries]
    return compute_report(labeled, corrected, ids=ids)


def run_evaluate(
    jobs: Sequence[TableJob],
    model: CalibrationModel,
    cfg: RunConfig,
    out_dir: Optional[Path] = None,
) -> EvaluationRun:
    """Score the held-out split and report all three evaluation phases.

    The calibration split is recomputed from the model's stored seed and
    fraction so the two phases never share a cell.
    """
    if not jobs:
        raise DegenerateDataError("no jobs to evaluate")
    extractions = _extract_all(jobs, cfg)
    _require_labels(extractions, "evaluate")
    for ex in extractions:
        rescore(ex, model.score_function)
        apply_model(ex, model)

    calib_keys = domain_split(
        _keys_by_domain(extractions), model.calib_fraction, model.seed
    )

    # Emulated correction once per cell; scope reports then slice consistently.
    eval_entries: list[tuple[ExtractedCell, bool, CellKey, bool]] = []
    per_table: dict[str, list[tuple[ExtractedCell, bool, CellKey, bool]]] = {}
    per_domain: dict[str, list[tuple[ExtractedCell, bool, CellKey, bool]]] = {}
    for ex in extractions:
        correction = emulate_human_correction(ex.cells, ex.gt_matches)
        for i, (cell, key) in enumerate(zip(ex.cells, ex.keys())):
            if key in calib_keys:
                continue
            entry = (cell, ex.labels[i], key, i in correction.corrected_ids)
            eval_entries.append(entry)
            per_table.setdefault(ex.job.table_id, []).append(entry)
            per_domain.setdefault(ex.job.domain, []).append(entry)

    aggregate = _scope_report(eval_entries)
    if aggregate is None:
        raise DegenerateDataError("evaluation split empty")
    by_domain = {d: _scope_report(per_domain[d]) for d in sorted(per_domain)}
    by_table = {ex.job.table_id: _scope_report(per_table.get(ex.job.table_id, []))
                for ex in extractions}

    def report_json(report: Optional[EvaluationReport]) -> dict:
        if report is None:
            return {"empty_split": True}
        return report.to_dict()

    report_payload = {
        "config": cfg.to_dict(),
        "model": model.to_dict(),
        "seed": cfg.seed,
        "aggregate": aggregate.to_dict(),
        "domains": {d: report_json(r) for d, r in by_domain.items()},
        "tables": {t: report_json(r) for t, r in sorted(by_table.items())},
    }

    # Images are copied into the state dir and referenced by bare filename so
    # the review_state artifact stays byte-identical across reruns from
    # different input locations.
    image_refs: dict[str, Optional[str]] = {}
    for ex in extractions:
        src = ex.job.image_ref
        if src is None or not Path(src).exists():
            image_refs[ex.job.table_id] = None
        elif out_dir is not None:
            dest = Path(out_dir) / f"{ex.job.table_id}{Path(src).suffix}"
            dest.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(src, dest)
            image_refs[ex.job.table_id] = dest.name
        else:
            image_refs[ex.job.table_id] = str(src)

    review_state = _review_state_payload(extractions, model, cfg, calib_keys, image_refs)

    if out_dir is not None:
        out = Path(out_dir)
        write_json(out / "report.json", report_payload)
        for table_id, report in sorted(by_table.items()):
            write_json(out / f"{table_id}.report.json",
                       {"table_id": table_id, **report_json(report)})
        write_json(out / "review_state.json", review_state)

    return EvaluationRun(
        aggregate=aggregate,
        by_domain=by_domain,
        by_table=by_table,
        review_state=review_state,
        report_payload=report_payload,
    )


def _review_state_payload(
    extractions: Sequence[TableExtraction],
    model: CalibrationModel,
    cfg: RunConfig,
    calib_keys: set[CellKey],
    image_refs: dict[str, Optional[str]],
) -> dict:
    tables = []
    for ex in sorted(extractions, key=lambda e: e.job.table_id):
        cells = []
        for i, cell in enumerate(ex.cells):
            key = (ex.job.table_id, cell.cell.row_index, cell.cell.col_index)
            gt = ex.gt_matches[i] if ex.gt_matches is not None else None
            record = cell_payload(cell)
            record["gt_matched"] = gt is not None
            record["gt_text"] = gt.text if gt is not None else None
            record["correct"] = ex.labels[i] if ex.labels is not None else None
            record["in_eval_split"] = key not in calib_keys
            cells.append(record)
        tables.append(
            {
                "table_id": ex.job.table_id,
                "domain": ex.job.domain,
                "image_ref": image_refs.get(ex.job.table_id),
                "image": {"width": ex.ocr_dims[0], "height": ex.ocr_dims[1]},
                "warnings": ex.warnings,
                "unmatched_spans": [span_payload(s) for s in ex.unmatched],
                "cells": cells,
            }
        )
    return {"config": cfg.to_dict(), "model": model.to_dict(), "tables": tables}
