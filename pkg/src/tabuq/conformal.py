"""Conformal score functions, calibration threshold, uncertainty, and tuning.

Scores map confidence pairs into [0, 1] with higher meaning less reliable.
Calibration picks the empirical quantile at rank ceil((n+1)(1-alpha)) from the
held-out score multiset; test-time uncertainty is the clamped excess over it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from itertools import product
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegenerateDataError


class ScoreKind(str, Enum):
    LAC = "lac"
    APS = "aps"
    HSS = "hss"
    OCR_ONLY = "ocr"
    TSR_ONLY = "tsr"


class FeasibilityWarning(UserWarning):
    """Raised when weight tuning cannot meet the coverage constraint."""


@dataclass(frozen=True)
class ScoreFunction:
    """Score-function identity; HSS carries its (w_row, w_col, w_text) weights."""

    kind: ScoreKind
    hss_weights: Optional[tuple[float, float, float]] = None

    def __post_init__(self) -> None:
        if self.kind is ScoreKind.HSS:
            if self.hss_weights is None:
                raise ValueError("HSS score function requires hss_weights")
            if len(self.hss_weights) != 3 or not all(0.0 <= w <= 1.0 for w in self.hss_weights):
                raise ValueError(f"hss_weights {self.hss_weights!r} must be three values in [0, 1]")
        elif self.hss_weights is not None:
            raise ValueError(f"hss_weights only apply to HSS, not {self.kind.value}")


@dataclass(frozen=True)
class ConformalRecord:
    """Per-cell confidence bundle consumed by the score functions."""

    tsr_confidence: float
    ocr_confidence: float
    row_confidence: float
    col_confidence: float
    correct: Optional[bool] = None

    def __post_init__(self) -> None:
        for name in ("tsr_confidence", "ocr_confidence", "row_confidence", "col_confidence"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v!r} outside [0, 1]")


def score_lac(r: ConformalRecord) -> float:
    """One minus the least reliable of the structural and text confidences."""
    return 1.0 - min(r.tsr_confidence, r.ocr_confidence)


def score_aps(r: ConformalRecord) -> float:
    """Normalized complement of the summed structural and text confidences."""
    return 1.0 - (r.tsr_confidence + r.ocr_confidence) / 2.0


def score_hss(r: ConformalRecord, w: tuple[float, float, float]) -> float:
    """Hybrid score: geometric mean of structural and content reliability, complemented.

    Structural reliability damps each axis by its weight before the geometric
    mean; content reliability is the weighted OCR confidence.
    """
    w_row, w_col, w_text = w
    r_struct = math.sqrt(
        (1.0 - w_row * (1.0 - r.row_confidence)) * (1.0 - w_col * (1.0 - r.col_confidence))
    )
    r_content = w_text * r.ocr_confidence
    return 1.0 - math.sqrt(r_struct * r_content)


def score_single(r: ConformalRecord, source: ScoreKind) -> float:
    """Ablation scores: a single model's confidence complement, no aggregation."""
    if source is ScoreKind.OCR_ONLY:
        return 1.0 - r.ocr_confidence
    if source is ScoreKind.TSR_ONLY:
        return 1.0 - r.tsr_confidence
    raise ValueError(f"score_single expects OCR_ONLY or TSR_ONLY, got {source}")


def score(r: ConformalRecord, fn: ScoreFunction) -> float:
    if fn.kind is ScoreKind.LAC:
        return score_lac(r)
    if fn.kind is ScoreKind.APS:
        return score_aps(r)
    if fn.kind is ScoreKind.HSS:
        assert fn.hss_weights is not None
        return score_hss(r, fn.hss_weights)
    return score_single(r, fn.kind)


def score_batch(records: Sequence[ConformalRecord], fn: ScoreFunction) -> np.ndarray:
    """Vectorized scoring used by the pipeline and the tuning loops."""
    if not records:
        return np.zeros(0)
    tsr = np.array([r.tsr_confidence for r in records])
    ocr = np.array([r.ocr_confidence for r in records])
    if fn.kind is ScoreKind.LAC:
        return 1.0 - np.minimum(tsr, ocr)
    if fn.kind is ScoreKind.APS:
        return 1.0 - (tsr + ocr) / 2.0
    if fn.kind is ScoreKind.OCR_ONLY:
        return 1.0 - ocr
    if fn.kind is ScoreKind.TSR_ONLY:
        return 1.0 - tsr
    assert fn.hss_weights is not None
    row = np.array([r.row_confidence for r in records])
    col = np.array([r.col_confidence for r in records])
    return _hss_batch(row, col, ocr, fn.hss_weights)


def _hss_batch(
    row: np.ndarray, col: np.ndarray, ocr: np.ndarray, w: tuple[float, float, float]
) -> np.ndarray:
    w_row, w_col, w_text = w
    r_struct = np.sqrt((1.0 - w_row * (1.0 - row)) * (1.0 - w_col * (1.0 - col)))
    r_content = w_text * ocr
    return 1.0 - np.sqrt(r_struct * r_content)


def quantile_rank(n: int, alpha: float) -> int:
    """1-based order-statistic rank ceil((n+1)(1-alpha)), clamped to n.

    The product is evaluated in exact rational arithmetic: for alpha values
    like 0.1 the float product can land a hair above an integer and a float
    ceil would then overshoot the rank by one.
    """
    rank = math.ceil((n + 1) * (1 - Fraction(alpha)))
    return min(rank, n)


def calibrate(scores: Iterable[float], alpha: float) -> float:
    """Calibration threshold: the ceil((n+1)(1-alpha))/n empirical quantile.

    Ranks beyond n (small n, small alpha) clamp to the maximum score.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha {alpha!r} outside (0, 1)")
    arr = np.sort(np.asarray(list(scores), dtype=np.float64))
    if arr.size == 0:
        raise DegenerateDataError("empty calibration set")
    if not np.isfinite(arr).all():
        raise ValueError("calibration scores must be finite")
    return float(arr[quantile_rank(arr.size, alpha) - 1])


def uncertainty(score_value: float, q_hat: float) -> float:
    """Clamped excess of a conformal score over the calibrated threshold."""
    return max(0.0, score_value - q_hat)


def flag(u: float, tau: float) -> bool:
    """True when the uncertainty strictly exceeds the review threshold."""
    if tau < 0:
        raise ValueError(f"tau {tau!r} must be >= 0")
    return u > tau


@dataclass(frozen=True)
class ThresholdMetrics:
    """Precision/recall/F1 of flag-equals-incorrect at one threshold."""

    tau: float
    precision: float
    recall: float
    f1: float
    flagged: int
    true_positives: int


def default_tau_grid() -> list[float]:
    """The 0.01 .. 1.00 sweep grid, step 0.01."""
    return [round(0.01 * k, 2) for k in range(1, 101)]


def sweep_flag_threshold(
    labeled: Sequence[tuple[float, bool]], taus: Sequence[float]
) -> tuple[float, list[ThresholdMetrics]]:
    """Sweep review thresholds and pick the F1-argmax (ties to smaller tau).

    ``labeled`` pairs each uncertainty with whether the cell was correct; the
    flag prediction targets the incorrect cells.
    """
    if not labeled:
        raise DegenerateDataError("degenerate tuning set: no records")
    if not taus:
        raise ValueError("no thresholds to sweep")
    u = np.array([t[0] for t in labeled], dtype=np.float64)
    incorrect = np.array([not t[1] for t in labeled], dtype=bool)
    n_incorrect = int(incorrect.sum())
    if n_incorrect == 0:
        raise DegenerateDataError("degenerate tuning set: no incorrect records")

    results: list[ThresholdMetrics] = []
    best: Optional[ThresholdMetrics] = None
    for tau in sorted(set(float(t) for t in taus)):
        if tau < 0:
            raise ValueError(f"tau {tau!r} must be >= 0")
        flags = u > tau
        n_flagged = int(flags.sum())
        tp = int((flags & incorrect).sum())
        precision = tp / n_flagged if n_flagged else 0.0
        recall = tp / n_incorrect
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        m = ThresholdMetrics(tau, precision, recall, f1, n_flagged, tp)
        results.append(m)
        if best is None or m.f1 > best.f1:
            best = m
    assert best is not None
    return best.tau, results


def _weight_grid(grid_step: float) -> list[float]:
    if not 0.0 < grid_step < 1.0:
        raise ValueError(f"grid_step {grid_step!r} outside (0, 1)")
    values = []
    k = 0
    while k * grid_step <= 1.0 + 1e-9:
        values.append(min(1.0, round(k * grid_step, 12)))
        k += 1
    if values[-1] != 1.0:
        values.append(1.0)
    return values


def tune_hss_weights(
    calib: Sequence[ConformalRecord], alpha: float, grid_step: float = 0.1
) -> tuple[float, float, float]:
    """Exhaustive weight search minimizing the flagged fraction under coverage.

    For each triple on the grid the calibration scores are thresholded at
    their own quantile (tau = 0); a triple is feasible when the fraction of
    incorrect records flagged is at least 1 - alpha. Ties go to the
    lexicographically smallest triple. With no feasible triple the one
    maximizing error recall is returned under a FeasibilityWarning.
    """
    if not calib:
        raise DegenerateDataError("empty calibration set")
    if any(r.correct is None for r in calib):
        raise ValueError("tune_hss_weights requires correctness labels on every record")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha {alpha!r} outside (0, 1)")

    row = np.array([r.row_confidence for r in calib])
    col = np.array([r.col_confidence for r in calib])
    ocr = np.array([r.ocr_confidence for r in calib])
    incorrect = np.array([not r.correct for r in calib], dtype=bool)
    n = len(calib)
    n_incorrect = int(incorrect.sum())
    target = 1 - Fraction(alpha)

    grid = _weight_grid(grid_step)
    best_feasible: Optional[tuple[int, tuple[float, float, float]]] = None
    best_recall: Optional[tuple[Fraction, tuple[float, float, float]]] = None
    for w in product(grid, repeat=3):
        scores = _hss_batch(row, col, ocr, w)
        q_hat = float(np.sort(scores)[quantile_rank(n, alpha) - 1])
        flags = scores > q_hat
        n_flagged = int(flags.sum())
        if n_incorrect == 0:
            feasible = True
            err_recall = Fraction(1)
        else:
            err_recall = Fraction(int((flags & incorrect).sum()), n_incorrect)
            feasible = err_recall >= target
        if feasible and (best_feasible is None or n_flagged < best_feasible[0]):
            best_feasible = (n_flagged, w)
        if best_recall is None or err_recall > best_recall[0]:
            best_recall = (err_recall, w)

    if best_feasible is not None:
        return best_feasible[1]
    assert best_recall is not None
    warnings.warn(
        "no weight triple met the coverage constraint; returning the "
        "max-error-recall triple",
        FeasibilityWarning,
        stacklevel=2,
    )
    return best_recall[1]
