import json

import numpy as np
import pytest

from armload.errors import InvalidInputError
from armload.evaluation import (ConfusionMatrix, aggregate, confusion, per_class_metrics,
                                report_json, report_table, truncate_percent)

MATRIX = [[8, 2, 0], [1, 9, 0], [0, 3, 7]]


@pytest.fixture
def cm():
    return ConfusionMatrix(np.array(MATRIX), ("a", "b", "c"))


class TestConfusion:
    def test_perfect_is_diagonal(self):
        m = confusion(list("abcab"), list("abcab"), "abc")
        assert m.counts.tolist() == [[2, 0, 0], [0, 2, 0], [0, 0, 1]]

    def test_single_cell(self):
        assert confusion(["a"], ["b"], "ab").counts.tolist() == [[0, 1], [0, 0]]

    def test_total_conservation(self, rng):
        t = rng.choice(list("xyz"), 57).tolist()
        p = rng.choice(list("xyz"), 57).tolist()
        assert confusion(t, p, "xyz").total == 57

    def test_unknown_label(self):
        with pytest.raises(InvalidInputError):
            confusion(["a"], ["q"], "ab")

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            confusion(["a", "b"], ["a"], "ab")


class TestMetrics:
    def test_hand_computed_class_zero(self, cm):
        m = per_class_metrics(cm)[0]
        assert m.precision == pytest.approx(0.8)
        assert m.recall == pytest.approx(8 / 9)
        assert m.accuracy == pytest.approx(0.9)
        assert m.f_measure == pytest.approx(2 * 0.8 * (8 / 9) / (0.8 + 8 / 9))
        assert round(m.f_measure, 4) == 0.8421

    def test_overall_accuracy(self, cm):
        assert aggregate(cm).overall_accuracy == pytest.approx(0.8)

    def test_macro_means(self, cm):
        per = per_class_metrics(cm)
        agg = aggregate(cm)
        assert agg.precision == pytest.approx(np.mean([m.precision for m in per]))
        assert agg.f_measure == pytest.approx(np.mean([m.f_measure for m in per]))

    def test_diagonal_all_ones(self):
        cm = ConfusionMatrix(np.diag([9, 10, 9]), ("0", "5", "6"))
        assert all((m.accuracy, m.precision, m.recall, m.f_measure) == (1, 1, 1, 1)
                   for m in per_class_metrics(cm))
        agg = aggregate(cm)
        assert (agg.overall_accuracy, agg.accuracy, agg.precision, agg.recall, agg.f_measure) == (1,) * 5

    def test_zero_denominators_flagged(self):
        cm = ConfusionMatrix(np.array([[3, 0], [0, 0]]), ("a", "b"))
        b = per_class_metrics(cm)[1]
        assert (b.precision, b.recall, b.f_measure) == (0.0, 0.0, 0.0)
        assert b.precision_undefined and b.recall_undefined

    def test_empty_matrix(self):
        with pytest.raises(InvalidInputError):
            aggregate(ConfusionMatrix(np.zeros((2, 2)), ("a", "b")))


class TestTruncation:
    @pytest.mark.parametrize("value, text", [
        (2 * 0.8 * 1.0 / 1.8, "88.88"),
        (1.0, "100.00"),
        (0.0, "0.00"),
        (0.82142857, "82.14"),
        (0.9285714285714286, "92.85"),
        (0.29, "29.00"),
    ])
    def test_truncates_not_rounds(self, value, text):
        assert truncate_percent(value) == text


class TestReports:
    def test_json_is_canonical(self, cm):
        text = report_json(cm, {"seed": 3})
        doc = json.loads(text)
        assert doc["schema_version"] == 1
        assert doc["confusion_matrix"] == MATRIX
        assert doc["config"] == {"seed": 3}
        assert text == json.dumps(doc, indent=2, sort_keys=True) + "\n"
        assert report_json(cm, {"seed": 3}) == text

    def test_table_lists_every_class(self, cm):
        text = report_table(cm, "LBP")
        assert "80.00%" in text and "84.21%" in text
        rows = [line.split("|") for line in text.splitlines() if line.startswith("     LBP")]
        assert [r[1].strip() for r in rows] == ["a", "b", "c"]
