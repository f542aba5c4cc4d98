"""Uncertainty-aware table data extraction.

Merges table-structure detections with OCR spans into grid cells, scores
each cell's reliability with split conformal prediction, flags risky cells,
and drives a human verification loop with before/after quality metrics.
"""

from .alignment import ExtractedCell, OcrSpan, match_spans, reading_order
from .conformal import (
    ConformalRecord,
    ScoreFunction,
    ScoreKind,
    calibrate,
    flag,
    score_aps,
    score_hss,
    score_lac,
    score_single,
    sweep_flag_threshold,
    tune_hss_weights,
    uncertainty,
)
from .errors import DegenerateDataError, InputSchemaError
from .evaluation import (
    EvaluationReport,
    GroundTruthCell,
    compute_report,
    emulate_human_correction,
    label_correct,
    levenshtein_accuracy,
    levenshtein_distance,
    match_ground_truth,
)
from .geometry import BBox, ImageDims, area, intersect, intersection_over_area, merge_bboxes, scale_bbox
from .grid import GridCell, GridWarning, StructureDetection, build_grid, normalize_structures
from .pipeline import (
    CalibrationModel,
    RunConfig,
    run_calibrate,
    run_evaluate,
    run_extract,
)
from .artifacts import TableJob

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "CalibrationModel",
    "ConformalRecord",
    "DegenerateDataError",
    "EvaluationReport",
    "ExtractedCell",
    "GridCell",
    "GridWarning",
    "GroundTruthCell",
    "ImageDims",
    "InputSchemaError",
    "OcrSpan",
    "RunConfig",
    "ScoreFunction",
    "ScoreKind",
    "StructureDetection",
    "TableJob",
    "area",
    "build_grid",
    "calibrate",
    "compute_report",
    "emulate_human_correction",
    "flag",
    "intersect",
    "intersection_over_area",
    "label_correct",
    "levenshtein_accuracy",
    "levenshtein_distance",
    "match_ground_truth",
    "match_spans",
    "merge_bboxes",
    "normalize_structures",
    "reading_order",
    "run_calibrate",
    "run_evaluate",
    "run_extract",
    "scale_bbox",
    "score_aps",
    "score_hss",
    "score_lac",
    "score_single",
    "sweep_flag_threshold",
    "tune_hss_weights",
    "uncertainty",
]
