"""Confusion counts, the four detection metrics, and the report table."""

import numpy as np
import pytest

from insiderkit.errors import UndefinedMetricError
from insiderkit.metrics import (
    Confusion,
    EvalReport,
    accuracy,
    confusion,
    f1,
    percent,
    precision,
    recall,
    render_report,
)


class TestConfusion:
    def test_perfect_two_item_case(self):
        c = confusion([1, 0], [1, 0])
        assert (c.tp, c.tn, c.fp, c.fn) == (1, 1, 0, 0)

    def test_all_negative_predictions(self):
        c = confusion([0, 0, 0], [1, 0, 1])
        assert c.tp == 0 and c.fp == 0
        assert c.fn == 2 and c.tn == 1

    def test_matches_brute_force_recount_on_random_pairs(self):
        rng = np.random.default_rng(30)
        preds = (rng.random(1000) < 0.4).astype(int)
        labels = (rng.random(1000) < 0.3).astype(int)
        c = confusion(list(preds), list(labels))
        # independent recount via pair counting
        pairs = list(zip(preds, labels))
        assert c.tp == pairs.count((1, 1))
        assert c.fp == pairs.count((1, 0))
        assert c.tn == pairs.count((0, 0))
        assert c.fn == pairs.count((0, 1))
        assert c.total == 1000

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            confusion([1], [1, 0])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            confusion([], [])

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            Confusion(tp=-1, fp=0, tn=0, fn=0)


class TestMetricValues:
    def test_accuracy_of_a_perfect_classifier(self):
        assert accuracy(Confusion(tp=5, fp=0, tn=5, fn=0)) == 1.0

    def test_accuracy_formula(self):
        c = Confusion(tp=96, fp=2, tn=0, fn=2)
        assert accuracy(c) == pytest.approx((96 + 0) / 100)

    def test_precision_examples(self):
        assert precision(Confusion(tp=9, fp=1, tn=0, fn=0)) == pytest.approx(0.9)
        assert precision(Confusion(tp=3, fp=0, tn=0, fn=0)) == 1.0

    def test_recall_examples(self):
        assert recall(Confusion(tp=96, fp=0, tn=0, fn=4)) == pytest.approx(0.96)
        assert recall(Confusion(tp=3, fp=0, tn=0, fn=0)) == 1.0

    def test_undefined_cases_raise(self):
        with pytest.raises(UndefinedMetricError):
            precision(Confusion(tp=0, fp=0, tn=5, fn=5))
        with pytest.raises(UndefinedMetricError):
            recall(Confusion(tp=0, fp=5, tn=5, fn=0))
        with pytest.raises(UndefinedMetricError):
            f1(0.0, 0.0)

    def test_random_confusions_match_independent_arithmetic(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            tp, fp, tn, fn = (int(v) for v in rng.integers(1, 100, size=4))
            c = Confusion(tp=tp, fp=fp, tn=tn, fn=fn)
            assert accuracy(c) == pytest.approx((tp + tn) / (tp + fp + tn + fn), abs=1e-15)
            assert precision(c) == pytest.approx(tp / (tp + fp), abs=1e-15)
            assert recall(c) == pytest.approx(tp / (tp + fn), abs=1e-15)


class TestF1:
    def test_harmonic_mean_of_equal_values_is_the_value(self):
        for x in (0.25, 0.5, 0.9):
            assert f1(x, x) == pytest.approx(x)

    def test_published_style_values_round_to_94_and_92_percent(self):
        high = f1(0.92, 0.96)
        assert round(high, 4) == 0.9396
        assert percent(high) == "94%"
        low = f1(0.90, 0.95)
        assert round(low, 4) == 0.9243
        assert percent(low) == "92%"

    def test_harmonic_leq_geometric_leq_arithmetic(self):
        rng = np.random.default_rng(32)
        for _ in range(200):
            p, r = rng.uniform(0.01, 1.0, size=2)
            harmonic = f1(p, r)
            geometric = np.sqrt(p * r)
            arithmetic = (p + r) / 2
            assert harmonic <= geometric + 1e-12
            assert geometric <= arithmetic + 1e-12


class TestInvariants:
    def test_strictly_positive_counts_give_metrics_in_the_open_interval(self):
        rng = np.random.default_rng(33)
        for _ in range(100):
            tp, fp, tn, fn = (int(v) for v in rng.integers(1, 50, size=4))
            report = EvalReport.from_confusion("m", Confusion(tp=tp, fp=fp, tn=tn, fn=fn))
            for value in (report.accuracy, report.precision, report.recall, report.f1):
                assert 0.0 < value < 1.0

    def test_metrics_are_scale_free(self):
        base = Confusion(tp=7, fp=3, tn=25, fn=5)
        for k in (2, 5, 13):
            scaled = Confusion(tp=7 * k, fp=3 * k, tn=25 * k, fn=5 * k)
            assert accuracy(scaled) == pytest.approx(accuracy(base), abs=1e-15)
            assert precision(scaled) == pytest.approx(precision(base), abs=1e-15)
            assert recall(scaled) == pytest.approx(recall(base), abs=1e-15)


class TestReports:
    def test_single_row_renders_paper_style_percentages(self):
        report = EvalReport(
            model="Variational Autoencoder (VAE)",
            confusion=Confusion(tp=96, fp=8, tn=292, fn=4),
            accuracy=0.96, precision=0.92, recall=0.96, f1=0.94,
        )
        text = render_report([report])
        lines = text.splitlines()
        assert len(lines) == 2
        assert lines[1].split()[-4:] == ["92%", "96%", "96%", "94%"]

    def test_empty_report_is_header_only(self):
        lines = render_report([]).splitlines()
        assert len(lines) == 1
        assert "Precision" in lines[0] and "F1-Score" in lines[0]

    def test_undefined_metrics_render_as_na(self):
        report = EvalReport.from_confusion("CNN", Confusion(tp=0, fp=0, tn=90, fn=10))
        assert report.precision is None
        text = render_report([report])
        assert "n/a" in text.splitlines()[1]

    def test_json_dict_uses_null_for_undefined(self):
        report = EvalReport.from_confusion("m", Confusion(tp=0, fp=0, tn=9, fn=1))
        payload = report.to_dict()
        assert payload["precision"] is None
        assert payload["f1"] is None
        assert payload["accuracy"] == pytest.approx(0.9)
        assert payload["tp"] == 0 and payload["fn"] == 1

    def test_percent_rounds_half_up(self):
        assert percent(0.945) == "95%"
        assert percent(0.9449) == "94%"
        assert percent(None) == "n/a"
