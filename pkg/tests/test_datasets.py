"""Weighted dataset container semantics."""
from __future__ import annotations

import numpy as np
import pytest

from otparity import ValidationError, WeightedDataset, WeightedSample


def small_dataset(**overrides) -> WeightedDataset:
    kwargs = dict(
        feature_names=("x", "u"),
        features=np.array([[0.0, 5.0], [1.0, 6.0], [1.0, 7.0]]),
        weight=np.array([1.0, 2.0, 1.0]),
        adjusted=("x",),
        group=np.array([0, 1, 0], dtype=np.intp),
        group_values=("a", "b"),
        label=np.array([0.0, 1.0, 1.0]),
    )
    kwargs.update(overrides)
    return WeightedDataset(**kwargs)


class TestConstruction:
    def test_basic_properties(self):
        data = small_dataset()
        assert data.n_samples == 3
        assert data.neutral == ("u",)
        assert data.total_weight == pytest.approx(4.0)

    def test_empty_adjusted_means_all_features(self):
        data = small_dataset(adjusted=())
        assert data.adjusted == ("x", "u")
        assert data.neutral == ()

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValidationError, match="unique"):
            small_dataset(feature_names=("x", "x"))

    def test_unknown_adjusted_rejected(self):
        with pytest.raises(ValidationError, match="unknown adjusted feature"):
            small_dataset(adjusted=("y",))

    def test_nonpositive_weight_rejected(self):
        with pytest.raises(ValidationError, match="positive"):
            small_dataset(weight=np.array([1.0, 0.0, 1.0]))

    def test_group_code_out_of_range_rejected(self):
        with pytest.raises(ValidationError, match="group code"):
            small_dataset(group=np.array([0, 2, 0], dtype=np.intp))

    def test_arrays_are_write_protected(self):
        data = small_dataset()
        with pytest.raises(ValueError):
            data.features[0, 0] = 9.0
        with pytest.raises(ValueError):
            data.weight[0] = 9.0

    def test_weighted_sample_positive_weight(self):
        with pytest.raises(ValidationError, match="positive"):
            WeightedSample(features=(0.0,), neutral=(), weight=0.0)


class TestAccessors:
    def test_column_indices_and_block(self):
        data = small_dataset()
        np.testing.assert_array_equal(data.column_indices(("u", "x")), [1, 0])
        np.testing.assert_array_equal(data.feature_block(("u",))[:, 0], [5.0, 6.0, 7.0])

    def test_unknown_feature_rejected(self):
        with pytest.raises(ValidationError, match="unknown feature 'z'"):
            small_dataset().column_indices(("z",))

    def test_samples_iterator(self):
        rows = list(small_dataset().samples())
        assert len(rows) == 3
        assert rows[0] == WeightedSample(
            features=(0.0,), neutral=(5.0,), weight=1.0, group="a", label=0.0
        )
        assert rows[1].group == "b"

    def test_with_adjusted_swaps_partition(self):
        data = small_dataset().with_adjusted(("u",))
        assert data.adjusted == ("u",)
        assert data.neutral == ("x",)


class TestSubsetsAndConcat:
    def test_take_by_mask(self):
        data = small_dataset()
        part = data.take(data.group == 0)
        assert part.n_samples == 2
        np.testing.assert_array_equal(part.features[:, 0], [0.0, 1.0])
        np.testing.assert_array_equal(part.label, [0.0, 1.0])
        assert part.group_values == ("a", "b")

    def test_take_by_indices_keeps_order(self):
        part = small_dataset().take(np.array([2, 0]))
        np.testing.assert_array_equal(part.features[:, 1], [7.0, 5.0])

    def test_concat_round_trip(self):
        data = small_dataset()
        back = WeightedDataset.concat(
            [data.take(data.group == 0), data.take(data.group == 1)]
        )
        assert back.n_samples == 3
        assert back.total_weight == pytest.approx(data.total_weight)
        assert back.group_values == data.group_values

    def test_concat_rejects_mismatched_schemas(self):
        a = small_dataset()
        b = small_dataset(label=None)
        with pytest.raises(ValidationError, match="different schemas"):
            WeightedDataset.concat([a, b])

    def test_concat_rejects_empty_list(self):
        with pytest.raises(ValidationError, match="nothing to concatenate"):
            WeightedDataset.concat([])
