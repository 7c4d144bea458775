import numpy as np
import pytest

from radfuse.evalmetrics import (
    confidence_interval,
    confusion_matrix,
    confusion_to_csv,
    covid_rates,
    evaluate,
    macro_metrics,
    per_class_metrics,
)

C, N, P = "covid", "normal", "pneumonia"

# Frozen reference pairs (metric, 95% half-width) at n_test = 1029;
# the normal-approximation formula must land within 0.001 of each
TABLE_VALUES = [
    (0.762, 0.026), (0.771, 0.026),
    (0.896, 0.019), (0.880, 0.020),
    (0.900, 0.018), (0.894, 0.019),
    (0.818, 0.024), (0.809, 0.024),
    (0.940, 0.015), (0.934, 0.015),
    (0.874, 0.020), (0.880, 0.020),
    (0.963, 0.012), (0.957, 0.012),
    (0.982, 0.008), (0.983, 0.008),
    (0.983, 0.008), (0.984, 0.008),
    (0.988, 0.007), (0.989, 0.006),
    (0.987, 0.007), (0.988, 0.007),
]


class TestConfusionMatrix:
    def test_perfect_predictions_diagonal(self):
        y = [C, N, P, N]
        cm = confusion_matrix(y, y)
        assert np.trace(cm) == 4
        assert cm.sum() == 4

    def test_all_predicted_covid(self):
        cm = confusion_matrix([C, N, P], [C, C, C])
        assert cm[:, 0].sum() == 3
        assert cm[:, 1:].sum() == 0

    def test_hand_case(self):
        cm = confusion_matrix([C, N, P], [C, P, P])
        assert cm.tolist() == [[1, 0, 0], [0, 0, 1], [0, 0, 1]]

    def test_unknown_label(self):
        with pytest.raises(ValueError):
            confusion_matrix([C], ["flu"])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion_matrix([C, N], [C])


class TestMacroMetrics:
    def test_diagonal_is_perfect(self):
        acc, mp, mr, mf1 = macro_metrics(np.diag([5, 3, 2]))
        assert acc == 1.0 and mf1 == 1.0

    def test_hand_case_accuracy(self):
        cm = np.array([[1, 0, 0], [0, 0, 1], [0, 0, 1]])
        acc, _, _, _ = macro_metrics(cm)
        assert acc == pytest.approx(2 / 3)

    def test_permutation_leaves_macro_invariant(self, rng):
        cm = rng.integers(0, 30, size=(3, 3))
        cm[0, 0] += 5
        perm = [2, 0, 1]
        permuted = cm[np.ix_(perm, perm)]
        a1 = macro_metrics(cm)
        a2 = macro_metrics(permuted)
        assert a1[0] == pytest.approx(a2[0])
        assert a1[3] == pytest.approx(a2[3])

    def test_zero_denominator_counts_as_zero(self):
        cm = np.array([[2, 0, 0], [0, 3, 0], [0, 0, 0]])  # no pneumonia rows or cols
        _, mp, mr, mf1 = macro_metrics(cm)
        assert mp == pytest.approx(2 / 3)

    def test_empty_matrix_rejected(self):
        with pytest.raises(ValueError):
            macro_metrics(np.zeros((3, 3)))


class TestConfidenceInterval:
    def test_degenerate(self):
        assert confidence_interval(1.0, 500) == 0.0
        assert confidence_interval(0.0, 500) == 0.0

    def test_symmetry_and_max_at_half(self):
        assert confidence_interval(0.3, 100) == pytest.approx(confidence_interval(0.7, 100))
        assert confidence_interval(0.5, 100) >= confidence_interval(0.49, 100)

    def test_headline_value(self):
        assert confidence_interval(0.963, 1029) == pytest.approx(0.0115, abs=5e-4)

    @pytest.mark.parametrize("metric,half_width", TABLE_VALUES)
    def test_reference_table_half_widths(self, metric, half_width):
        got = round(confidence_interval(metric, 1029), 3)
        assert abs(got - half_width) <= 0.001

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            confidence_interval(1.2, 10)
        with pytest.raises(ValueError):
            confidence_interval(0.5, 0)


class TestCovidRates:
    def test_diagonal_zero_rates(self):
        fnr, fpr = covid_rates(np.diag([10, 20, 30]))
        assert fnr == 0.0 and fpr == 0.0

    def test_single_miss_among_244(self):
        # 1 covid -> normal error among 244 covid; nobody else predicted covid
        cm = np.array([[243, 1, 0], [0, 400, 0], [0, 0, 385]])
        assert cm.sum() == 1029
        fnr, fpr = covid_rates(cm)
        assert fnr == pytest.approx(1 / 244)
        assert round(100 * fnr, 2) == 0.41
        assert fpr == 0.0

    def test_all_covid_missed(self):
        cm = np.array([[0, 5, 5], [0, 10, 0], [0, 0, 10]])
        fnr, _ = covid_rates(cm)
        assert fnr == 1.0

    def test_zero_denominator_marker(self):
        cm = np.array([[0, 0, 0], [0, 5, 0], [0, 0, 5]])
        fnr, fpr = covid_rates(cm)
        assert fnr is None
        assert fpr == 0.0


class TestEvaluateReport:
    def test_fields_and_bounds(self, rng):
        y_true = rng.choice([C, N, P], size=200).tolist()
        y_pred = [t if rng.random() < 0.8 else N for t in y_true]
        rep = evaluate(y_true, y_pred)
        assert rep.n_test == 200
        for v in (rep.accuracy, rep.macro_f1, rep.macro_precision, rep.macro_recall):
            assert 0.0 <= v <= 1.0
        assert rep.accuracy_ci >= 0.0
        doc = rep.to_dict()
        assert doc["n_test"] == 200
        assert len(doc["per_class"]) == 3
        text = rep.to_table()
        assert "accuracy" in text and "covid" in text

    def test_json_round_trip(self):
        import json

        rep = evaluate([C, N, P], [C, N, P])
        doc = json.loads(rep.to_json())
        assert doc["accuracy"] == 1.0
        assert doc["covid_false_negative_rate"] == 0.0

    def test_csv_export(self):
        rep = evaluate([C, N, P], [C, N, P])
        csv_text = confusion_to_csv(rep.confusion)
        assert csv_text.splitlines()[0] == "true\\pred,covid,normal,pneumonia"
        assert csv_text.splitlines()[1] == "covid,1,0,0"

    def test_heatmap_png(self, tmp_path):
        pytest.importorskip("matplotlib")
        from radfuse.evalmetrics import confusion_heatmap_png

        rep = evaluate([C, N, P, C], [C, N, P, N])
        out = tmp_path / "cm.png"
        confusion_heatmap_png(rep.confusion, out)
        assert out.stat().st_size > 1000


class TestPerClass:
    def test_per_class_values(self):
        cm = np.array([[8, 2, 0], [1, 9, 0], [0, 0, 10]])
        precision, recall, f1 = per_class_metrics(cm)
        assert precision[0] == pytest.approx(8 / 9)
        assert recall[0] == pytest.approx(8 / 10)
        assert f1[2] == 1.0
