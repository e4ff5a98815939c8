"""Group-blind projection maps and their application to datasets.

A solved coupling becomes a row-stochastic map by dividing each row by the
prescribed source mass. Applying the map splits every sample into weighted
copies, one per reachable target point, without ever reading the sample's
group. Groups enter only through the disparity vector at solve time and
through the evaluation metrics afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Coupling, DisparityVector, Histogram, RepairBand, Support, ValidationError
from .datasets import WeightedDataset

__all__ = [
    "ProjectionMap",
    "projection_map",
    "apply_map",
    "pushforward_conditional",
    "theta_bound_check",
]


@dataclass(frozen=True)
class ProjectionMap:
    """Row-stochastic sample-splitting map between two supports."""

    source: Support
    target: Support
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=float))
        if w.shape != (self.source.size, self.target.size):
            raise ValidationError("weight matrix shape does not match the supports")
        if (w < 0.0).any():
            raise ValidationError("map weights must be nonnegative")
        if np.abs(w.sum(axis=1) - 1.0).max() > 1e-10:
            raise ValidationError("map rows must sum to one")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def projection_map(gamma: Coupling, p_x: Histogram, tol: float = 1e-8) -> ProjectionMap:
    """Turn a coupling into the sample-splitting map w_ij = gamma_ij / p_i.

    The coupling's row sums must match ``p_x`` within ``tol`` entrywise;
    rows are renormalized after the division so that each sums to one
    exactly. Iterative solves stopped at a fixed budget leave a small row
    residual, so callers working with such couplings pass an explicit
    ``tol`` reflecting their solver's convergence report.
    """
    if gamma.source != p_x.support:
        raise ValidationError("coupling source and histogram supports differ")
    if (p_x.mass <= 0.0).any():
        raise ValidationError("source histogram must be strictly positive")
    rows = gamma.row_sums()
    if np.abs(rows - p_x.mass).max() > tol or (rows <= 0.0).any():
        raise ValidationError("coupling infeasible for this source histogram")
    w = gamma.mass / p_x.mass[:, None]
    w = w / w.sum(axis=1, keepdims=True)
    return ProjectionMap(gamma.source, gamma.target, w)


def _split_arrays(
    data: WeightedDataset,
    pmap: ProjectionMap,
    min_weight: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row indices, target indices, and split weights above the threshold.

    Works through the samples in blocks so the dense sample-by-target
    weight lookup never materializes for large datasets. Split order is
    input order with targets in canonical order inside each sample.
    """
    if min_weight < 0.0:
        raise ValidationError("min_weight must be nonnegative")
    cols = data.column_indices(data.adjusted)
    if cols.size != pmap.source.dim:
        raise ValidationError("map dimension does not match the adjusted features")
    idx = pmap.source.index_of(data.features[:, cols])
    missing = np.flatnonzero(idx < 0)
    if missing.size:
        raise ValidationError(
            f"row {int(missing[0])}: adjusted features not on the map's source support"
        )
    block = max(1, 4_000_000 // max(1, pmap.target.size))
    rows, tgts, weights = [], [], []
    for start in range(0, data.n_samples, block):
        stop = min(start + block, data.n_samples)
        w = pmap.weights[idx[start:stop]]
        keep = w > min_weight
        r, t = np.nonzero(keep)
        rows.append(r + start)
        tgts.append(t)
        weights.append(data.weight[r + start] * w[r, t])
    row = np.concatenate(rows) if rows else np.empty(0, dtype=np.intp)
    tgt = np.concatenate(tgts) if tgts else np.empty(0, dtype=np.intp)
    return row, tgt, np.concatenate(weights) if weights else np.empty(0)


def apply_map(
    data: WeightedDataset,
    pmap: ProjectionMap,
    min_weight: float = 0.0,
) -> tuple[WeightedDataset, float]:
    """Split every sample through the map, leaving everything else alone.

    Each input row whose adjusted features sit at source point i becomes
    one output row per target point j with w_ij above ``min_weight``; the
    new row keeps its group, label, and neutral features, and carries
    weight w * w_ij. Returns the split dataset and the total mass dropped
    by the threshold. With the default threshold the output weight equals
    the input weight up to rounding.
    """
    row, tgt, new_weight = _split_arrays(data, pmap, min_weight)
    if row.size == 0:
        raise ValidationError("all mass dropped")
    cols = data.column_indices(data.adjusted)
    feats = data.features[row].copy()
    feats[:, cols] = pmap.target.points[tgt]
    out = WeightedDataset(
        feature_names=data.feature_names,
        features=feats,
        weight=new_weight,
        adjusted=data.adjusted,
        group=None if data.group is None else data.group[row],
        group_values=data.group_values,
        label=None if data.label is None else data.label[row],
    )
    dropped = data.total_weight - out.total_weight
    return out, float(max(dropped, 0.0))


def pushforward_conditional(gamma: Coupling, p_xs: Histogram, p_x: Histogram) -> Histogram:
    """Push a group conditional through the map defined by ``gamma``.

    Computes the transpose action gamma^T (p_xs / p_x) on the target
    support. When the coupling's rows match ``p_x`` this is exactly the
    distribution of the adjusted features among that group after repair.
    """
    if gamma.source != p_x.support or p_xs.support != p_x.support:
        raise ValidationError("support mismatch")
    if (p_x.mass <= 0.0).any():
        raise ValidationError("zero mass point in the pooled histogram: prune support first")
    ratio = p_xs.mass / p_x.mass
    return Histogram(gamma.target, gamma.mass.T @ ratio)


def theta_bound_check(
    gamma: Coupling,
    v: DisparityVector,
    theta: RepairBand,
) -> tuple[float, float, bool]:
    """Evaluate the repair guarantee on a solved coupling.

    Returns the certified bound half the L1 norm of theta, the achieved
    group-wise TV half the L1 norm of gamma^T V, and whether the bound
    holds up to a 1e-9 slack.
    """
    if gamma.source != v.support:
        raise ValidationError("disparity vector support does not match the coupling")
    if gamma.target != theta.support:
        raise ValidationError("band support does not match the coupling")
    achieved = 0.5 * float(np.abs(gamma.mass.T @ v.values).sum())
    bound = theta.half_l1()
    return bound, achieved, achieved <= bound + 1e-9
