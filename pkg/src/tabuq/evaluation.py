"""Ground-truth matching, text accuracy, and the three-phase metric suite.

Phases: extraction quality before any flagging, flag quality (precision,
recall, labor savings), and residual error after flagged cells are corrected.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, replace
from typing import AbstractSet, Hashable, Optional, Sequence

from . import kernels
from .alignment import ExtractedCell
from .errors import DegenerateDataError
from .geometry import BBox, boxes_to_array


@dataclass(frozen=True)
class GroundTruthCell:
    """An annotated table cell with its logical span and text."""

    bbox: BBox
    start_row: int
    start_col: int
    end_row: int
    end_col: int
    text: str

    def __post_init__(self) -> None:
        for name in ("start_row", "start_col", "end_row", "end_col"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.end_row < self.start_row or self.end_col < self.start_col:
            raise ValueError("ground-truth cell span ends before it starts")


def levenshtein_distance(a: str, b: str) -> int:
    """Minimum number of character insertions, deletions, or substitutions."""
    return kernels.levenshtein_codes(kernels.text_to_codes(a), kernels.text_to_codes(b))


def levenshtein_accuracy(extracted: str, truth: str) -> float:
    """Normalized edit similarity; 1.0 is a perfect match.

    Two empty strings are a perfect match by convention (a blank cell
    extracted as blank).
    """
    longest = max(len(extracted), len(truth))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein_distance(extracted, truth) / longest


def normalize_text(s: str) -> str:
    """Canonical compose, collapse runs of whitespace, and trim."""
    return " ".join(unicodedata.normalize("NFC", s).split())


def match_ground_truth(
    cells: Sequence[ExtractedCell], gt: Sequence[GroundTruthCell]
) -> list[tuple[ExtractedCell, Optional[GroundTruthCell]]]:
    """Pair each extracted cell with the GT cell covering most of its area.

    The overlap ratio uses the extracted cell's area as denominator and must
    strictly exceed 0.5. One GT cell may match several extracted cells, which
    happens when the lattice over-segments a spanning cell.
    """
    if not cells:
        return []
    cell_boxes = boxes_to_array([c.cell.bbox for c in cells])
    gt_boxes = boxes_to_array([g.bbox for g in gt])
    ioa = kernels.pairwise_ioa(cell_boxes, gt_boxes)
    matches: list[tuple[ExtractedCell, Optional[GroundTruthCell]]] = []
    for i, cell in enumerate(cells):
        best: Optional[int] = None
        for j in range(len(gt)):
            if ioa[i, j] > 0.5 and (best is None or ioa[i, j] > ioa[i, best]):
                best = j
        matches.append((cell, gt[best] if best is not None else None))
    return matches


def texts_match(extracted: str, truth: str, similarity_threshold: float = 1.0) -> bool:
    """Compare texts after normalization, exactly or by edit similarity.

    The fuzzy branch only applies when the threshold is below 1.
    """
    if not 0.0 <= similarity_threshold <= 1.0:
        raise ValueError(f"similarity_threshold {similarity_threshold!r} outside [0, 1]")
    a = normalize_text(extracted)
    b = normalize_text(truth)
    if a == b:
        return True
    return similarity_threshold < 1.0 and levenshtein_accuracy(a, b) >= similarity_threshold


def label_correct(
    cell: ExtractedCell,
    gt: Optional[GroundTruthCell],
    similarity_threshold: float = 1.0,
) -> bool:
    """Whether an extracted cell counts as correct against its GT match.

    Cells without a GT match are never correct.
    """
    if gt is None:
        # still validate the threshold so bad configs fail on every path
        if not 0.0 <= similarity_threshold <= 1.0:
            raise ValueError(f"similarity_threshold {similarity_threshold!r} outside [0, 1]")
        return False
    return texts_match(cell.text, gt.text, similarity_threshold)


@dataclass(frozen=True)
class EvaluationReport:
    """Metric bundle for one scope (table, domain, or the pooled corpus)."""

    accuracy_before: float
    error_rate_before: float
    precision_uq: float
    recall_uq: float
    f1_uq: float
    labor_savings: float
    error_rate_after_hc: float
    counts: dict[str, int]
    degenerate: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "accuracy_before": self.accuracy_before,
            "error_rate_before": self.error_rate_before,
            "precision_uq": self.precision_uq,
            "recall_uq": self.recall_uq,
            "f1_uq": self.f1_uq,
            "labor_savings": self.labor_savings,
            "error_rate_after_hc": self.error_rate_after_hc,
            "counts": dict(self.counts),
            "degenerate": list(self.degenerate),
        }


def report_from_flags(
    flag_label_pairs: Sequence[tuple[bool, bool]],
    corrected: AbstractSet[Hashable],
    ids: Optional[Sequence[Hashable]] = None,
) -> EvaluationReport:
    """Metric fold over (flagged, correct) pairs; see compute_report.

    Exists so callers that only hold flag/label booleans (e.g. the live
    review service) share the exact same arithmetic as the batch path.
    """
    n = len(flag_label_pairs)
    if n == 0:
        raise DegenerateDataError("empty evaluation set")
    if ids is None:
        ids = list(range(n))
    if len(ids) != n:
        raise ValueError("ids must parallel the labeled cells")

    n_correct = sum(1 for _, ok in flag_label_pairs if ok)
    n_incorrect = n - n_correct
    n_flagged = sum(1 for flagged, _ in flag_label_pairs if flagged)
    tp = sum(1 for flagged, ok in flag_label_pairs if flagged and not ok)
    n_corrected = sum(1 for i in ids if i in corrected)
    corrected_incorrect = sum(
        1 for (_, ok), i in zip(flag_label_pairs, ids) if not ok and i in corrected
    )

    degenerate: list[str] = []
    accuracy = n_correct / n
    if n_flagged:
        precision = tp / n_flagged
    else:
        precision = 0.0
        degenerate.append("precision_uq")
    if n_incorrect:
        recall = tp / n_incorrect
    else:
        recall = 0.0
        degenerate.append("recall_uq")
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0

    return EvaluationReport(
        accuracy_before=accuracy,
        error_rate_before=1.0 - accuracy,
        precision_uq=precision,
        recall_uq=recall,
        f1_uq=f1,
        labor_savings=1.0 - n_flagged / n,
        error_rate_after_hc=(n_incorrect - corrected_incorrect) / n,
        counts={
            "total": n,
            "flagged": n_flagged,
            "incorrect": n_incorrect,
            "corrected": n_corrected,
        },
        degenerate=tuple(degenerate),
    )


def compute_report(
    labeled_cells: Sequence[tuple[ExtractedCell, bool]],
    corrected: AbstractSet[Hashable],
    ids: Optional[Sequence[Hashable]] = None,
) -> EvaluationReport:
    """Fold labeled cells and a corrected-cell set into the metric bundle.

    ``corrected`` holds the ids of cells resolved to a correct value by
    (emulated or real) human review; ids default to list positions.
    Zero-denominator precision/recall report 0 and are listed in
    ``degenerate`` instead of raising.
    """
    return report_from_flags(
        [(cell.flagged, ok) for cell, ok in labeled_cells], corrected, ids=ids
    )


@dataclass
class HumanCorrectionResult:
    """Cells after emulated review plus the ids touched by it."""

    cells: list[ExtractedCell]
    corrected_ids: set[int]
    unresolvable_ids: set[int]


def emulate_human_correction(
    cells: Sequence[ExtractedCell],
    gt_matches: Sequence[Optional[GroundTruthCell]],
) -> HumanCorrectionResult:
    """Replay the review loop with ground truth standing in for the human.

    Every flagged cell with a GT match takes the GT text and is marked
    corrected; flagged cells without a match are unresolvable; unflagged
    cells pass through untouched. Input cells are not mutated.
    """
    if len(cells) != len(gt_matches):
        raise ValueError("cells and gt_matches must be parallel")
    out: list[ExtractedCell] = []
    corrected: set[int] = set()
    unresolvable: set[int] = set()
    for i, (cell, gt) in enumerate(zip(cells, gt_matches)):
        if cell.flagged and gt is not None:
            out.append(replace(cell, text=gt.text))
            corrected.add(i)
        elif cell.flagged:
            out.append(replace(cell))
            unresolvable.add(i)
        else:
            out.append(replace(cell))
    return HumanCorrectionResult(cells=out, corrected_ids=corrected, unresolvable_ids=unresolvable)
