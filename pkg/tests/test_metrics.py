"""Accuracy, rank-based AUC, and the metric report format."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssavd.metrics import MetricReport, accuracy, auc


def brute_force_auc(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestAuc:
    def test_hand_oracle(self):
        assert auc([0.9, 0.6, 0.65, 0.2], [1, 1, 0, 0]) == pytest.approx(0.75, abs=1e-12)

    def test_perfect_separation(self):
        assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == pytest.approx(1.0, abs=1e-12)

    def test_reversed_separation(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == pytest.approx(0.0, abs=1e-12)

    def test_all_tied_scores_give_half(self):
        assert auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == pytest.approx(0.5, abs=1e-12)

    def test_midrank_tie_handling(self):
        scores = [0.3, 0.5, 0.5, 0.7]
        labels = [0, 1, 0, 1]
        assert auc(scores, labels) == pytest.approx(brute_force_auc(scores, labels), abs=1e-12)

    def test_single_class_absent(self):
        assert auc([0.1, 0.9], [1, 1]) is None
        assert auc([0.1, 0.9], [0, 0]) is None

    @given(st.integers(0, 2**31 - 1), st.integers(4, 40))
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force_pairwise(self, seed, n):
        rng = np.random.default_rng(seed)
        # quantized scores so ties occur regularly
        scores = np.round(rng.uniform(0.0, 1.0, n), 1)
        labels = rng.integers(0, 2, n)
        if labels.sum() in (0, n):
            return
        assert auc(scores, labels) == pytest.approx(
            brute_force_auc(scores, labels), abs=1e-12
        )

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_within_unit_interval(self, seed):
        rng = np.random.default_rng(seed)
        scores = rng.uniform(0, 1, 20)
        labels = np.r_[np.ones(10, int), np.zeros(10, int)]
        assert 0.0 <= auc(scores, labels) <= 1.0


class TestAccuracy:
    def test_threshold_behaviour(self):
        assert accuracy([0.9, 0.4, 0.6, 0.1], [1, 0, 1, 0]) == 1.0
        assert accuracy([0.9, 0.4, 0.6, 0.1], [0, 1, 0, 1]) == 0.0

    def test_constant_half_predicts_negative_class(self):
        # 0.5 is not above the threshold, so every prediction is 0
        labels = np.array([1, 0, 0, 0, 1])
        acc = accuracy(np.full(5, 0.5), labels)
        assert acc == pytest.approx((labels == 0).mean())

    def test_custom_threshold(self):
        assert accuracy([0.3, 0.1], [1, 0], threshold=0.2) == 1.0


class TestMetricReport:
    def make_report(self):
        return MetricReport(
            acc={"visual": 0.9, "audio": 0.8, "whole": 0.85},
            auc={"visual": 0.95, "audio": None, "whole": 0.91},
            loss_curve=[1.5, 1.2, 0.9],
            param_count=12345,
        )

    def test_render_contains_key_value_lines(self):
        text = self.make_report().render()
        assert "acc_visual = 0.900000" in text
        assert "auc_whole = 0.910000" in text
        assert "auc_audio = absent" in text
        assert "param_count = 12345" in text

    def test_save_load_roundtrip(self, tmp_path):
        path = tmp_path / "report.txt"
        report = self.make_report()
        report.save(path)
        loaded = MetricReport.load(path)
        assert loaded.to_dict() == report.to_dict()

    def test_load_without_json_block_raises(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("acc_visual = 0.5\n")
        with pytest.raises(ValueError):
            MetricReport.load(path)

    def test_metric_values_in_unit_interval(self):
        report = self.make_report()
        for v in report.acc.values():
            assert 0.0 <= v <= 1.0
        for v in report.auc.values():
            assert v is None or 0.0 <= v <= 1.0
