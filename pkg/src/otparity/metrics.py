"""Empirical distributions and the fairness and performance indices.

Everything here is weight-aware so that split samples produced by a repair
map flow through unchanged: a sample of weight w contributes w to every
count it touches. All functions are pure and scale-invariant in the
weights.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .core import Histogram, Support, ValidationError, make_histogram, tv_distance
from .datasets import WeightedDataset

__all__ = [
    "GroupConfusion",
    "MetricReport",
    "empirical_distribution",
    "groupwise_distributions",
    "s_wise_tv",
    "disparate_impact",
    "f1_scores",
    "confusion_from_predictions",
]


@dataclass(frozen=True)
class GroupConfusion:
    """Weighted confusion counts per group, unprivileged group first."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray

    def __post_init__(self) -> None:
        arrays = {}
        shape = None
        for name in ("tp", "fp", "fn", "tn"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.ndim != 1:
                raise ValidationError("confusion counts must be one dimensional")
            if shape is None:
                shape = a.shape
            elif a.shape != shape:
                raise ValidationError("confusion count lengths differ")
            if (a < 0.0).any():
                raise ValidationError("confusion counts must be nonnegative")
            a.setflags(write=False)
            arrays[name] = a
        for name, a in arrays.items():
            object.__setattr__(self, name, a)

    @property
    def n_groups(self) -> int:
        return self.tp.size


@dataclass(frozen=True)
class MetricReport:
    """The five indices reported for every experiment arm.

    Arms without a classifier or without group labels leave the fields
    they cannot evaluate as NaN.
    """

    f1_micro: float = float("nan")
    f1_macro: float = float("nan")
    f1_weighted: float = float("nan")
    disparate_impact: float = float("nan")
    s_wise_tv: float = float("nan")

    def __post_init__(self) -> None:
        for name in ("f1_micro", "f1_macro", "f1_weighted"):
            x = getattr(self, name)
            if not np.isnan(x) and not 0.0 <= x <= 1.0:
                raise ValidationError(f"{name} outside [0, 1]")
        if not np.isnan(self.s_wise_tv) and not 0.0 <= self.s_wise_tv <= 1.0 + 1e-12:
            raise ValidationError("s_wise_tv outside [0, 1]")
        if not np.isnan(self.disparate_impact) and self.disparate_impact < 0.0:
            raise ValidationError("disparate_impact must be nonnegative")

    _FIELDS = ("f1_micro", "f1_macro", "f1_weighted", "disparate_impact", "s_wise_tv")

    def to_json(self) -> str:
        return json.dumps({k: getattr(self, k) for k in self._FIELDS})

    def to_csv_row(self) -> str:
        return ",".join(repr(float(getattr(self, k))) for k in self._FIELDS)

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(cls._FIELDS)


def _feature_points(data: WeightedDataset, feature_cols) -> np.ndarray:
    names = tuple(feature_cols) if feature_cols is not None else data.adjusted
    return data.feature_block(names)


def empirical_distribution(data: WeightedDataset, feature_cols=None) -> Histogram:
    """Weighted empirical distribution over the observed feature tuples.

    Uses the adjusted features by default; pass ``feature_cols`` to look
    at any subset of columns.
    """
    if data.n_samples == 0:
        raise ValidationError("empty distribution")
    pts = _feature_points(data, feature_cols)
    support = Support.from_points(pts)
    mass = np.zeros(support.size)
    np.add.at(mass, support.index_of(pts), data.weight)
    return make_histogram(support, mass)


def groupwise_distributions(data: WeightedDataset, feature_cols=None) -> dict[str, Histogram]:
    """Per-group empirical distributions on the union support, zero-filled."""
    if data.group is None:
        raise ValidationError("dataset has no group column")
    if data.n_samples == 0:
        raise ValidationError("empty distribution")
    pts = _feature_points(data, feature_cols)
    support = Support.from_points(pts)
    idx = support.index_of(pts)
    out: dict[str, Histogram] = {}
    for code, value in enumerate(data.group_values):
        sel = data.group == code
        mass = np.zeros(support.size)
        np.add.at(mass, idx[sel], data.weight[sel])
        total = mass.sum()
        if total <= 0.0:
            raise ValidationError(f"group {value!r} has zero total weight")
        out[value] = Histogram(support, mass / total)
    return out


def s_wise_tv(data: WeightedDataset, feature_cols=None) -> float:
    """TV distance between the two group-conditional distributions."""
    dists = groupwise_distributions(data, feature_cols)
    if len(dists) != 2:
        raise ValidationError("group-wise TV needs exactly two groups")
    first, second = (dists[k] for k in sorted(dists))
    return tv_distance(first, second)


def _positive_rates(predictions, groups, weights) -> tuple[np.ndarray, list]:
    pred = np.asarray(predictions, dtype=float)
    grp = np.asarray(groups)
    if pred.shape != grp.shape or pred.ndim != 1:
        raise ValidationError("predictions and groups must be equal-length vectors")
    w = np.ones(pred.size) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != pred.shape:
        raise ValidationError("weights length does not match the predictions")
    values = sorted(set(grp.tolist()))
    if len(values) != 2:
        raise ValidationError("disparate impact needs exactly two groups")
    rates = []
    for value in values:
        sel = grp == value
        total = w[sel].sum()
        if total <= 0.0:
            raise ValidationError(f"group {value!r} has zero total weight")
        rates.append(float((w[sel] * pred[sel]).sum() / total))
    return np.array(rates), values


def disparate_impact(predictions, groups, weights=None) -> float:
    """Positive rate of the unprivileged group over the privileged one.

    Groups sort by value and the first is treated as unprivileged; parity
    is 1. Predictions are 0/1 indicators, optionally weighted.
    """
    rates, _ = _positive_rates(predictions, groups, weights)
    if rates[1] <= 0.0:
        raise ValidationError("privileged positive rate is zero")
    return float(rates[0] / rates[1])


def confusion_from_predictions(y_true, y_pred, groups, weights=None) -> GroupConfusion:
    """Weighted per-group confusion counts, groups in sorted value order."""
    yt = np.asarray(y_true, dtype=float)
    yp = np.asarray(y_pred, dtype=float)
    grp = np.asarray(groups)
    if not (yt.shape == yp.shape == grp.shape) or yt.ndim != 1:
        raise ValidationError("labels, predictions, and groups must be equal-length vectors")
    w = np.ones(yt.size) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != yt.shape:
        raise ValidationError("weights length does not match the labels")
    values = sorted(set(grp.tolist()))
    tp, fp, fn, tn = [], [], [], []
    for value in values:
        sel = grp == value
        t, p, ww = yt[sel], yp[sel], w[sel]
        tp.append(float((ww * ((t == 1) & (p == 1))).sum()))
        fp.append(float((ww * ((t == 0) & (p == 1))).sum()))
        fn.append(float((ww * ((t == 1) & (p == 0))).sum()))
        tn.append(float((ww * ((t == 0) & (p == 0))).sum()))
    return GroupConfusion(np.array(tp), np.array(fp), np.array(fn), np.array(tn))


def f1_scores(confusion: GroupConfusion, p_s) -> tuple[float, float, float]:
    """Micro, macro, and weighted f1 from per-group confusion counts.

    Macro is the plain average of the two per-group scores and weighted
    uses the group priors ``p_s``; a zero denominator defines that score
    as 0 and emits a warning so reports stay total.
    """
    if confusion.n_groups != 2:
        raise ValidationError("f1 scores are defined for exactly two groups")
    priors = p_s.mass if isinstance(p_s, Histogram) else np.asarray(p_s, dtype=float)
    if priors.shape != (2,):
        raise ValidationError("group priors must have one entry per group")
    denom = 2.0 * confusion.tp + confusion.fp + confusion.fn
    per_group = np.zeros(2)
    for s in range(2):
        if denom[s] > 0.0:
            per_group[s] = 2.0 * confusion.tp[s] / denom[s]
        else:
            warnings.warn(f"group {s} has no positives in labels or predictions; f1 set to 0")
    micro_den = float(denom.sum())
    if micro_den > 0.0:
        micro = float(2.0 * confusion.tp.sum() / micro_den)
    else:
        micro = 0.0
        warnings.warn("no positives in labels or predictions; micro f1 set to 0")
    macro = 0.5 * float(per_group.sum())
    weighted = float((priors * per_group).sum())
    return micro, macro, weighted
