"""Weighted tabular datasets.

A dataset is a dense block of numeric feature columns plus optional group,
label, and weight columns, with a declared partition of the features into
adjusted ones (subject to repair) and neutral ones (carried through
untouched). Group values are stored as integer codes against a sorted
tuple of the original values; the first code is the unprivileged group
everywhere the distinction matters.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import ValidationError

__all__ = ["WeightedDataset", "WeightedSample"]


@dataclass(frozen=True)
class WeightedSample:
    """One row of a dataset, split into its adjusted and neutral parts."""

    features: tuple[float, ...]
    neutral: tuple[float, ...]
    weight: float
    group: str | None = None
    label: float | None = None

    def __post_init__(self) -> None:
        if not self.weight > 0.0:
            raise ValidationError("sample weight must be positive")


@dataclass(frozen=True)
class WeightedDataset:
    """Immutable weighted samples with a declared adjusted/neutral split."""

    feature_names: tuple[str, ...]
    features: np.ndarray
    weight: np.ndarray
    adjusted: tuple[str, ...] = ()
    group: np.ndarray | None = None
    group_values: tuple[str, ...] = ()
    label: np.ndarray | None = None
    _frozen: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        names = tuple(self.feature_names)
        if len(set(names)) != len(names):
            raise ValidationError("feature names must be unique")
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=float))
        if feats.ndim != 2:
            raise ValidationError("features must be a samples-by-columns block")
        if feats.shape[1] != len(names):
            raise ValidationError("feature block width does not match the names")
        n = feats.shape[0]
        w = np.asarray(self.weight, dtype=float)
        if w.shape != (n,):
            raise ValidationError("weight column length does not match the samples")
        if not (w > 0.0).all():
            raise ValidationError("sample weight must be positive")
        adjusted = tuple(self.adjusted) if self.adjusted else names
        unknown = [a for a in adjusted if a not in names]
        if unknown:
            raise ValidationError(f"unknown adjusted feature {unknown[0]!r}")
        if len(set(adjusted)) != len(adjusted):
            raise ValidationError("adjusted feature names must be unique")
        g = self.group
        if g is not None:
            g = np.asarray(g, dtype=np.intp)
            if g.shape != (n,):
                raise ValidationError("group column length does not match the samples")
            if g.size and (g.min() < 0 or g.max() >= len(self.group_values)):
                raise ValidationError("group code outside the declared group values")
            g.setflags(write=False)
        lab = self.label
        if lab is not None:
            lab = np.asarray(lab, dtype=float)
            if lab.shape != (n,):
                raise ValidationError("label column length does not match the samples")
            lab.setflags(write=False)
        feats.setflags(write=False)
        w = np.ascontiguousarray(w)
        w.setflags(write=False)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "adjusted", adjusted)
        object.__setattr__(self, "group", g)
        object.__setattr__(self, "group_values", tuple(self.group_values))
        object.__setattr__(self, "label", lab)
        object.__setattr__(self, "_frozen", True)

    # -- shape helpers ----------------------------------------------------

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def neutral(self) -> tuple[str, ...]:
        return tuple(n for n in self.feature_names if n not in self.adjusted)

    @property
    def total_weight(self) -> float:
        return float(self.weight.sum())

    def column_indices(self, names) -> np.ndarray:
        pos = {name: i for i, name in enumerate(self.feature_names)}
        try:
            return np.array([pos[n] for n in names], dtype=np.intp)
        except KeyError as exc:
            raise ValidationError(f"unknown feature {exc.args[0]!r}") from exc

    def feature_block(self, names) -> np.ndarray:
        """The sample-by-feature block for the named columns."""
        return self.features[:, self.column_indices(names)]

    # -- derived datasets --------------------------------------------------

    def with_adjusted(self, names) -> "WeightedDataset":
        return replace(self, adjusted=tuple(names))

    def take(self, indices) -> "WeightedDataset":
        """Subset by row indices or boolean mask, preserving metadata."""
        idx = np.asarray(indices)
        return replace(
            self,
            features=self.features[idx],
            weight=self.weight[idx],
            group=None if self.group is None else self.group[idx],
            label=None if self.label is None else self.label[idx],
        )

    @classmethod
    def concat(cls, parts) -> "WeightedDataset":
        """Stack datasets with identical schemas, preserving order."""
        parts = list(parts)
        if not parts:
            raise ValidationError("nothing to concatenate")
        first = parts[0]
        for other in parts[1:]:
            if (
                other.feature_names != first.feature_names
                or other.adjusted != first.adjusted
                or other.group_values != first.group_values
                or (other.group is None) != (first.group is None)
                or (other.label is None) != (first.label is None)
            ):
                raise ValidationError("datasets to concatenate have different schemas")
        return cls(
            feature_names=first.feature_names,
            features=np.concatenate([p.features for p in parts]),
            weight=np.concatenate([p.weight for p in parts]),
            adjusted=first.adjusted,
            group=None
            if first.group is None
            else np.concatenate([p.group for p in parts]),
            group_values=first.group_values,
            label=None
            if first.label is None
            else np.concatenate([p.label for p in parts]),
        )

    def samples(self):
        """Iterate rows as :class:`WeightedSample` views."""
        adj = self.column_indices(self.adjusted)
        neu = self.column_indices(self.neutral)
        for i in range(self.n_samples):
            yield WeightedSample(
                features=tuple(self.features[i, adj]),
                neutral=tuple(self.features[i, neu]),
                weight=float(self.weight[i]),
                group=None if self.group is None else self.group_values[self.group[i]],
                label=None if self.label is None else float(self.label[i]),
            )
