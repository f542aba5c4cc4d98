import math

import numpy as np
import pytest

from oracles import (
    aps_exact,
    hss_exact,
    hss_tuning_brute_force,
    lac_exact,
    quantile_by_search,
    sweep_brute_force,
)
from tabuq.conformal import (
    ConformalRecord,
    FeasibilityWarning,
    ScoreFunction,
    ScoreKind,
    calibrate,
    default_tau_grid,
    flag,
    score,
    score_aps,
    score_batch,
    score_hss,
    score_lac,
    score_single,
    sweep_flag_threshold,
    tune_hss_weights,
    uncertainty,
)
from tabuq.errors import DegenerateDataError


def record(tsr=0.9, ocr=0.9, row=0.9, col=0.9, correct=None):
    return ConformalRecord(
        tsr_confidence=tsr, ocr_confidence=ocr,
        row_confidence=row, col_confidence=col, correct=correct,
    )


class TestScoreFunctions:
    def test_lac_examples(self):
        assert score_lac(record(tsr=0.9, ocr=0.6)) == pytest.approx(0.4)
        assert score_lac(record(tsr=1.0, ocr=1.0)) == 0.0
        assert score_lac(record(tsr=0.0, ocr=0.7)) == 1.0
        assert score_lac(record(tsr=0.8, ocr=0.0)) == 1.0

    def test_aps_examples(self):
        assert score_aps(record(tsr=1.0, ocr=1.0)) == 0.0
        assert score_aps(record(tsr=0.9, ocr=0.6)) == pytest.approx(0.25)
        assert score_aps(record(tsr=0.0, ocr=0.0)) == 1.0

    def test_hss_boundaries(self):
        perfect = record(tsr=1.0, ocr=1.0, row=1.0, col=1.0)
        assert score_hss(perfect, (1.0, 1.0, 1.0)) == pytest.approx(0.0)
        no_text = record(ocr=0.0)
        assert score_hss(no_text, (0.3, 0.7, 0.9)) == 1.0

    def test_hss_worked_example_against_oracle(self):
        r = record(row=0.8, col=0.6, ocr=0.9)
        got = score_hss(r, (0.5, 0.5, 1.0))
        assert got == pytest.approx(hss_exact(0.8, 0.6, 0.9, 0.5, 0.5, 1.0), abs=1e-12)

    def test_single_source(self):
        assert score_single(record(ocr=0.75), ScoreKind.OCR_ONLY) == pytest.approx(0.25)
        assert score_single(record(tsr=1.0), ScoreKind.TSR_ONLY) == 0.0
        with pytest.raises(ValueError):
            score_single(record(), ScoreKind.LAC)

    def test_ocr_only_ordering_is_reverse_confidence(self):
        rng = np.random.default_rng(0)
        records = [record(ocr=float(v)) for v in rng.uniform(0, 1, 30)]
        by_score = sorted(records, key=lambda r: score_single(r, ScoreKind.OCR_ONLY))
        by_conf = sorted(records, key=lambda r: -r.ocr_confidence)
        assert [r.ocr_confidence for r in by_score] == [r.ocr_confidence for r in by_conf]

    def test_all_scores_in_unit_interval_and_monotone(self):
        rng = np.random.default_rng(1)
        fns = [
            ScoreFunction(ScoreKind.LAC),
            ScoreFunction(ScoreKind.APS),
            ScoreFunction(ScoreKind.OCR_ONLY),
            ScoreFunction(ScoreKind.TSR_ONLY),
            ScoreFunction(ScoreKind.HSS, hss_weights=(0.6, 0.4, 0.9)),
        ]
        for _ in range(200):
            tsr, ocr, row, col = rng.uniform(0, 1, 4)
            r = record(tsr=float(tsr), ocr=float(ocr), row=float(row), col=float(col))
            bumped = record(
                tsr=min(1.0, float(tsr) + 0.1),
                ocr=min(1.0, float(ocr) + 0.1),
                row=min(1.0, float(row) + 0.1),
                col=min(1.0, float(col) + 0.1),
            )
            for fn in fns:
                v = score(r, fn)
                assert 0.0 <= v <= 1.0
                assert score(bumped, fn) <= v + 1e-12

    def test_lac_equals_aps_when_confidences_agree(self):
        for v in (0.0, 0.25, 0.8, 1.0):
            r = record(tsr=v, ocr=v)
            assert score_lac(r) == pytest.approx(score_aps(r))

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(2)
        records = [
            record(*(float(x) for x in rng.uniform(0, 1, 4))) for _ in range(100)
        ]
        for fn in (
            ScoreFunction(ScoreKind.LAC),
            ScoreFunction(ScoreKind.APS),
            ScoreFunction(ScoreKind.OCR_ONLY),
            ScoreFunction(ScoreKind.TSR_ONLY),
            ScoreFunction(ScoreKind.HSS, hss_weights=(0.2, 0.9, 0.7)),
        ):
            batch = score_batch(records, fn)
            for r, b in zip(records, batch):
                assert score(r, fn) == pytest.approx(float(b), abs=1e-12)

    def test_score_function_weight_validation(self):
        with pytest.raises(ValueError):
            ScoreFunction(ScoreKind.HSS)
        with pytest.raises(ValueError):
            ScoreFunction(ScoreKind.LAC, hss_weights=(1, 1, 1))
        with pytest.raises(ValueError):
            ScoreFunction(ScoreKind.HSS, hss_weights=(1.5, 0.5, 0.5))


class TestCalibrate:
    def test_constant_scores(self):
        for alpha in (0.05, 0.3, 0.9):
            assert calibrate([0.42] * 7, alpha) == 0.42

    def test_worked_example_nine_scores(self):
        scores = [0.1 * k for k in range(1, 10)]
        assert calibrate(scores, 0.1) == pytest.approx(0.9)

    def test_worked_example_nineteen_scores(self):
        scores = [0.05 * k for k in range(1, 20)]
        assert calibrate(scores, 0.5) == pytest.approx(0.50)

    def test_clamps_to_max_for_tiny_alpha(self):
        scores = [0.2, 0.5, 0.9]
        assert calibrate(scores, 0.01) == 0.9

    def test_empty_raises(self):
        with pytest.raises(DegenerateDataError, match="empty calibration set"):
            calibrate([], 0.1)

    def test_alpha_validated(self):
        with pytest.raises(ValueError):
            calibrate([0.1], 0.0)
        with pytest.raises(ValueError):
            calibrate([0.1], 1.0)

    def test_matches_search_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(2000):
            n = int(rng.integers(1, 51))
            scores = rng.uniform(0, 1, n)
            if rng.random() < 0.3:
                scores = np.round(scores, 1)  # force ties
            alpha = float(rng.uniform(0.001, 0.999))
            assert calibrate(scores, alpha) == quantile_by_search(scores, alpha)

    def test_rank_is_exact_where_float_ceil_diverges(self):
        # (n+1)*(1-alpha) for the double 0.3 is 7.0000000000000001, but the
        # float expression evaluates to 6.999999999999999556: a float ceil
        # would pick the 7th order statistic instead of the 8th. Random
        # oracle sampling essentially never lands on these boundaries.
        scores = [0.1 * k for k in range(1, 10)]
        assert calibrate(scores, 0.3) == scores[7]
        assert calibrate(scores, 0.3) == quantile_by_search(scores, 0.3)
        for n, alpha in ((19, 0.3), (29, 0.3), (39, 0.3)):
            xs = list(np.linspace(0.01, 0.99, n))
            assert calibrate(xs, alpha) == quantile_by_search(xs, alpha)

    def test_q_hat_is_attainable(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            scores = rng.uniform(0, 1, int(rng.integers(1, 40)))
            q = calibrate(scores, float(rng.uniform(0.01, 0.99)))
            assert q in scores

    def test_coverage_on_exchangeable_scores(self):
        # quick version of the acceptance run: fewer trials, same guarantee
        rng = np.random.default_rng(5)
        for alpha in (0.1, 0.2):
            covered = []
            for _ in range(200):
                cal = rng.uniform(0, 1, 200)
                test = rng.uniform(0, 1, 200)
                q = calibrate(cal, alpha)
                covered.append(float((test <= q).mean()))
            assert np.mean(covered) >= 1 - alpha - 0.03

    def test_positive_uncertainty_bounded_by_alpha_n(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            n = int(rng.integers(1, 200))
            alpha = float(rng.uniform(0.01, 0.99))
            scores = rng.uniform(0, 1, n)
            q = calibrate(scores, alpha)
            positive = sum(1 for s in scores if uncertainty(float(s), q) > 0)
            assert positive <= math.ceil(alpha * n)


class TestUncertaintyAndFlag:
    def test_uncertainty_examples(self):
        assert uncertainty(0.5, 0.3) == pytest.approx(0.2)
        assert uncertainty(0.3, 0.3) == 0.0
        assert uncertainty(0.1, 0.3) == 0.0

    def test_flag_examples(self):
        assert flag(0.05, 0.03) is True
        assert flag(0.0, 0.03) is False
        assert flag(0.03, 0.03) is False  # strict comparison

    def test_flag_tau_validated(self):
        with pytest.raises(ValueError):
            flag(0.5, -0.1)

    def test_flag_count_monotone_in_tau(self):
        rng = np.random.default_rng(7)
        us = rng.uniform(0, 1, 300)
        taus = np.linspace(0, 1, 21)
        counts = [sum(flag(float(u), float(t)) for u in us) for t in taus]
        assert counts == sorted(counts, reverse=True)

    def test_flag_sets_nested(self):
        rng = np.random.default_rng(8)
        us = rng.uniform(0, 1, 100)
        set_lo = {i for i, u in enumerate(us) if flag(float(u), 0.2)}
        set_hi = {i for i, u in enumerate(us) if flag(float(u), 0.6)}
        assert set_hi <= set_lo


class TestSweep:
    def test_perfectly_separated(self):
        labeled = [(0.9, False), (0.8, False), (0.1, True), (0.05, True)]
        best, metrics = sweep_flag_threshold(labeled, [0.2, 0.5, 0.7])
        by_tau = {m.tau: m for m in metrics}
        assert by_tau[0.2].f1 == 1.0 and by_tau[0.5].f1 == 1.0 and by_tau[0.7].f1 == 1.0
        assert best == 0.2  # ties go to the smaller threshold

    def test_all_zero_uncertainty(self):
        labeled = [(0.0, False), (0.0, True)]
        _, metrics = sweep_flag_threshold(labeled, [0.01, 0.5])
        assert all(m.recall == 0.0 for m in metrics)

    def test_no_incorrect_records_raises(self):
        with pytest.raises(DegenerateDataError, match="degenerate tuning set"):
            sweep_flag_threshold([(0.5, True), (0.2, True)], [0.1])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            n = int(rng.integers(5, 60))
            labeled = [
                (float(rng.uniform(0, 0.6)), bool(rng.random() < 0.7)) for _ in range(n)
            ]
            if all(ok for _, ok in labeled):
                labeled[0] = (labeled[0][0], False)
            taus = default_tau_grid()
            best, metrics = sweep_flag_threshold(labeled, taus)
            oracle_tau, oracle_f1 = sweep_brute_force(labeled, taus)
            assert best == oracle_tau
            assert max(m.f1 for m in metrics) == pytest.approx(oracle_f1)


class TestHssTuning:
    def test_all_correct_flags_nothing(self):
        rng = np.random.default_rng(10)
        records = [
            record(*(float(x) for x in rng.uniform(0.5, 1.0, 4)), correct=True)
            for _ in range(30)
        ]
        w = tune_hss_weights(records, alpha=0.2, grid_step=0.5)
        scores = score_batch(records, ScoreFunction(ScoreKind.HSS, hss_weights=w))
        q = calibrate(scores, 0.2)
        assert sum(s > q for s in scores) == 0

    def test_zero_ocr_error_is_catchable(self):
        records = [record(ocr=0.95, row=0.95, col=0.95, correct=True) for _ in range(20)]
        records.append(record(ocr=0.0, row=0.95, col=0.95, correct=False))
        w = tune_hss_weights(records, alpha=0.2, grid_step=0.25)
        assert w[2] > 0  # only a positive text weight separates the error

    def test_labels_required(self):
        with pytest.raises(ValueError, match="labels"):
            tune_hss_weights([record()], alpha=0.1)

    def test_matches_brute_force_on_fifty_records(self):
        rng = np.random.default_rng(11)
        raw = []
        for _ in range(50):
            correct = bool(rng.random() < 0.75)
            if correct:
                row, col, ocr = rng.uniform(0.7, 1.0, 3)
            else:
                row, col, ocr = rng.uniform(0.1, 0.6, 3)
            raw.append((float(row), float(col), float(ocr), correct))
        records = [
            record(tsr=(r + c) / 2, ocr=o, row=r, col=c, correct=ok)
            for r, c, o, ok in raw
        ]
        got = tune_hss_weights(records, alpha=0.25, grid_step=0.25)
        expected = hss_tuning_brute_force(raw, alpha=0.25, grid_step=0.25)
        assert got == expected

    def test_feasibility_warning_path(self):
        # uncertainty carries no signal: every triple misses the constraint
        records = [record(tsr=0.9, ocr=0.9, row=0.9, col=0.9, correct=False) for _ in range(10)]
        records += [record(tsr=0.9, ocr=0.9, row=0.9, col=0.9, correct=True) for _ in range(10)]
        with pytest.warns(FeasibilityWarning):
            w = tune_hss_weights(records, alpha=0.05, grid_step=0.5)
        assert all(0.0 <= v <= 1.0 for v in w)
