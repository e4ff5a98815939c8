"""Distribution extraction and the fairness and performance indices."""
from __future__ import annotations

import dataclasses
import json
import math

import numpy as np
import pytest

from otparity import (
    GroupConfusion,
    MetricReport,
    ValidationError,
    WeightedDataset,
    confusion_from_predictions,
    disparate_impact,
    empirical_distribution,
    f1_scores,
    groupwise_distributions,
    s_wise_tv,
)


class TestGroupConfusion:
    def test_counts_write_protected(self):
        conf = GroupConfusion(np.ones(2), np.ones(2), np.ones(2), np.ones(2))
        assert conf.n_groups == 2
        with pytest.raises(ValueError):
            conf.tp[0] = 2.0

    def test_negative_counts_rejected(self):
        with pytest.raises(ValidationError, match="nonnegative"):
            GroupConfusion(np.array([-1.0, 1.0]), np.ones(2), np.ones(2), np.ones(2))

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValidationError, match="lengths differ"):
            GroupConfusion(np.ones(2), np.ones(3), np.ones(2), np.ones(2))

    def test_matrix_counts_rejected(self):
        with pytest.raises(ValidationError, match="one dimensional"):
            GroupConfusion(np.ones((2, 2)), np.ones(2), np.ones(2), np.ones(2))


class TestMetricReport:
    def test_defaults_are_nan(self):
        report = MetricReport()
        assert math.isnan(report.f1_micro)
        assert math.isnan(report.s_wise_tv)

    def test_f1_range_checked(self):
        with pytest.raises(ValidationError, match="f1_macro"):
            MetricReport(f1_macro=1.2)

    def test_tv_range_checked(self):
        with pytest.raises(ValidationError, match="s_wise_tv"):
            MetricReport(s_wise_tv=-0.1)

    def test_negative_impact_rejected(self):
        with pytest.raises(ValidationError, match="disparate_impact"):
            MetricReport(disparate_impact=-1.0)

    def test_json_round_trip(self):
        report = MetricReport(f1_micro=0.75, disparate_impact=0.9, s_wise_tv=0.1)
        loaded = json.loads(report.to_json())
        assert loaded["f1_micro"] == 0.75
        assert math.isnan(loaded["f1_macro"])

    def test_csv_row_matches_header(self):
        header = MetricReport.csv_header().split(",")
        row = MetricReport(s_wise_tv=0.25).to_csv_row().split(",")
        assert len(header) == len(row) == 5
        assert float(row[header.index("s_wise_tv")]) == 0.25


def unit_dataset(values, groups=None, group_values=(), weight=None) -> WeightedDataset:
    features = np.asarray(values, dtype=float)[:, None]
    return WeightedDataset(
        feature_names=("x",),
        features=features,
        weight=np.ones(len(features)) if weight is None else np.asarray(weight, dtype=float),
        group=None if groups is None else np.asarray(groups, dtype=np.intp),
        group_values=group_values,
    )


class TestEmpiricalDistribution:
    def test_unit_weight_counts(self):
        hist = empirical_distribution(unit_dataset([0, 0, 1]))
        np.testing.assert_allclose(hist.mass, [2.0 / 3.0, 1.0 / 3.0])

    def test_weights_drive_the_masses(self):
        hist = empirical_distribution(unit_dataset([0, 1], weight=[5.0, 5.0]))
        np.testing.assert_allclose(hist.mass, [0.5, 0.5])

    def test_feature_cols_select_other_columns(self):
        data = WeightedDataset(
            feature_names=("x", "u"),
            features=np.array([[0.0, 7.0], [1.0, 7.0]]),
            weight=np.ones(2),
            adjusted=("x",),
        )
        hist = empirical_distribution(data, feature_cols=("u",))
        assert hist.support.size == 1
        np.testing.assert_allclose(hist.mass, [1.0])

    def test_empty_dataset_rejected(self):
        data = WeightedDataset(
            feature_names=("x",), features=np.empty((0, 1)), weight=np.empty(0)
        )
        with pytest.raises(ValidationError, match="empty distribution"):
            empirical_distribution(data)


class TestGroupwiseDistributions:
    def test_two_point_conditionals(self, two_point_dataset):
        dists = groupwise_distributions(two_point_dataset)
        np.testing.assert_allclose(dists["a"].mass, [1.0 / 3.0, 2.0 / 3.0])
        np.testing.assert_allclose(dists["b"].mass, [2.0 / 3.0, 1.0 / 3.0])

    def test_union_support_zero_filled(self):
        data = unit_dataset([0, 1, 1, 2], groups=[0, 0, 1, 1], group_values=("a", "b"))
        dists = groupwise_distributions(data)
        assert dists["a"].support.size == 3
        np.testing.assert_allclose(dists["a"].mass, [0.5, 0.5, 0.0])
        np.testing.assert_allclose(dists["b"].mass, [0.0, 0.5, 0.5])

    def test_single_group_equals_empirical(self):
        data = unit_dataset([0, 0, 1], groups=[0, 0, 0], group_values=("a",))
        dists = groupwise_distributions(data)
        np.testing.assert_allclose(dists["a"].mass, empirical_distribution(data).mass)

    def test_empty_group_rejected(self):
        data = unit_dataset([0, 1], groups=[0, 0], group_values=("a", "b"))
        with pytest.raises(ValidationError, match="group 'b' has zero total weight"):
            groupwise_distributions(data)

    def test_missing_group_column_rejected(self):
        with pytest.raises(ValidationError, match="no group column"):
            groupwise_distributions(unit_dataset([0, 1]))


class TestSWiseTV:
    def test_two_point_disparity(self, two_point_dataset):
        assert s_wise_tv(two_point_dataset) == pytest.approx(1.0 / 3.0)

    def test_identical_groups_give_zero(self):
        data = unit_dataset([0, 1, 0, 1], groups=[0, 0, 1, 1], group_values=("a", "b"))
        assert s_wise_tv(data) == pytest.approx(0.0, abs=1e-15)

    def test_weight_rescaling_is_invisible(self, two_point_dataset):
        scaled = dataclasses.replace(two_point_dataset, weight=np.full(6, 7.5))
        assert s_wise_tv(scaled) == pytest.approx(s_wise_tv(two_point_dataset))

    def test_three_groups_rejected(self):
        data = unit_dataset([0, 1, 0], groups=[0, 1, 2], group_values=("a", "b", "c"))
        with pytest.raises(ValidationError, match="exactly two groups"):
            s_wise_tv(data)


class TestDisparateImpact:
    def test_direct_ratio(self):
        pred = [1, 0, 0, 0, 0, 1, 1, 0, 1, 0]
        grp = ["a"] * 5 + ["b"] * 5
        # a: rate 0.2, b: rate 0.6
        assert disparate_impact(pred, grp) == pytest.approx(0.2 / 0.6)

    def test_equal_rates_give_parity(self):
        assert disparate_impact([1, 0, 1, 0], ["a", "a", "b", "b"]) == pytest.approx(1.0)

    def test_groups_sort_by_value(self):
        pred = [1, 0]
        assert disparate_impact(pred, ["b", "a"]) == pytest.approx(0.0)
        with pytest.raises(ValidationError, match="privileged positive rate is zero"):
            disparate_impact(pred, ["a", "b"])

    def test_weights_enter_the_rates(self):
        pred = [1, 0, 1]
        grp = ["a", "a", "b"]
        assert disparate_impact(pred, grp, weights=[1.0, 3.0, 2.0]) == pytest.approx(0.25)

    def test_reciprocity_under_group_swap(self, rng):
        for _ in range(20):
            pred = rng.integers(0, 2, size=30)
            grp = np.where(rng.random(30) < 0.5, "a", "b")
            pred[np.flatnonzero(grp == "a")[:1]] = 1
            pred[np.flatnonzero(grp == "b")[:1]] = 1
            swapped = np.where(grp == "a", "b", "a")
            di = disparate_impact(pred, grp)
            assert disparate_impact(pred, swapped) == pytest.approx(1.0 / di)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="equal-length"):
            disparate_impact([1, 0], ["a", "b", "b"])

    def test_needs_two_groups(self):
        with pytest.raises(ValidationError, match="exactly two groups"):
            disparate_impact([1, 0], ["a", "a"])


class TestConfusion:
    def test_hand_counts(self):
        y_true = [1, 0, 1, 1, 0, 0]
        y_pred = [1, 1, 0, 1, 0, 0]
        grp = ["a", "a", "a", "b", "b", "b"]
        conf = confusion_from_predictions(y_true, y_pred, grp)
        np.testing.assert_array_equal(conf.tp, [1.0, 1.0])
        np.testing.assert_array_equal(conf.fp, [1.0, 0.0])
        np.testing.assert_array_equal(conf.fn, [1.0, 0.0])
        np.testing.assert_array_equal(conf.tn, [0.0, 2.0])

    def test_weights_accumulate(self):
        conf = confusion_from_predictions([1, 1], [1, 1], ["a", "b"], weights=[2.5, 4.0])
        np.testing.assert_array_equal(conf.tp, [2.5, 4.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="equal-length"):
            confusion_from_predictions([1], [1, 0], ["a", "b"])


class TestF1Scores:
    def test_hand_example(self):
        conf = GroupConfusion(
            tp=np.array([1.0, 2.0]),
            fp=np.array([1.0, 0.0]),
            fn=np.array([0.0, 1.0]),
            tn=np.array([0.0, 0.0]),
        )
        micro, macro, weighted = f1_scores(conf, [0.5, 0.5])
        assert micro == pytest.approx(0.75)
        assert macro == pytest.approx(11.0 / 15.0)
        assert weighted == pytest.approx(macro)

    def test_perfect_classifier(self):
        conf = confusion_from_predictions([1, 0, 1, 0], [1, 0, 1, 0], ["a", "a", "b", "b"])
        assert f1_scores(conf, [0.5, 0.5]) == pytest.approx((1.0, 1.0, 1.0))

    def test_unequal_priors_move_weighted_off_macro(self):
        conf = GroupConfusion(
            tp=np.array([1.0, 2.0]),
            fp=np.array([1.0, 0.0]),
            fn=np.array([0.0, 1.0]),
            tn=np.array([0.0, 0.0]),
        )
        _, macro, weighted = f1_scores(conf, [0.9, 0.1])
        assert weighted == pytest.approx(0.9 * (2.0 / 3.0) + 0.1 * 0.8)
        assert weighted != pytest.approx(macro)

    def test_all_negative_predictions_zero_micro(self):
        conf = confusion_from_predictions([1, 1], [0, 0], ["a", "b"])
        micro, _, _ = f1_scores(conf, [0.5, 0.5])
        assert micro == pytest.approx(0.0)

    def test_zero_denominator_warns_and_scores_zero(self):
        conf = GroupConfusion(
            tp=np.array([0.0, 1.0]),
            fp=np.array([0.0, 0.0]),
            fn=np.array([0.0, 0.0]),
            tn=np.array([5.0, 0.0]),
        )
        with pytest.warns(UserWarning, match="group 0"):
            micro, macro, weighted = f1_scores(conf, [0.5, 0.5])
        assert micro == pytest.approx(1.0)
        assert macro == pytest.approx(0.5)

    def test_priors_length_checked(self):
        conf = confusion_from_predictions([1, 0], [1, 0], ["a", "b"])
        with pytest.raises(ValidationError, match="one entry per group"):
            f1_scores(conf, [1.0])

    def test_two_groups_only(self):
        conf = GroupConfusion(np.ones(3), np.ones(3), np.ones(3), np.ones(3))
        with pytest.raises(ValidationError, match="exactly two groups"):
            f1_scores(conf, [0.5, 0.5])
