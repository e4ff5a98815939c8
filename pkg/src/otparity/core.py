"""Foundational types and scalar functionals.

Supports, histograms, couplings, cost matrices, the entropy and KL
functionals used by every solver, total variation distance, and the
disparity vector that encodes all group-level information a repair map is
allowed to see.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ValidationError",
    "SolverError",
    "Support",
    "Histogram",
    "Coupling",
    "CostMatrix",
    "DisparityVector",
    "RepairBand",
    "make_histogram",
    "entropy",
    "kl_divergence",
    "tv_distance",
    "cost_matrix",
    "gibbs_kernel",
    "product_coupling",
    "disparity_vector",
]


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


class SolverError(RuntimeError):
    """Raised when an iterative solve cannot produce a usable result."""


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValidationError("support needs a nonempty 2-d point array")
    return arr


@dataclass(frozen=True)
class Support:
    """An ordered set of discrete points, one row per point.

    Points are kept in canonical lexicographic order so that matrices built
    on a support are reproducible across runs and file round-trips. Use
    :meth:`from_points` to construct from unordered data.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = _as_points(self.points)
        object.__setattr__(self, "points", pts)
        pts.setflags(write=False)

    @classmethod
    def from_points(cls, points) -> "Support":
        pts = _as_points(points)
        order = np.lexsort(pts.T[::-1])
        pts = pts[order]
        keep = np.ones(pts.shape[0], dtype=bool)
        keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
        return cls(pts[keep])

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def index_of(self, rows) -> np.ndarray:
        """Map point rows to support indices; unknown points map to -1."""
        rows = _as_points(rows)
        if rows.shape[1] != self.dim:
            raise ValidationError("point dimension mismatch")
        if self.dim == 1:
            lo = np.searchsorted(self.points[:, 0], rows[:, 0])
            lo = np.clip(lo, 0, self.size - 1)
            return np.where(self.points[lo, 0] == rows[:, 0], lo, -1)
        table = {tuple(p): i for i, p in enumerate(self.points)}
        return np.array([table.get(tuple(r), -1) for r in rows], dtype=int)

    def __eq__(self, other) -> bool:
        return isinstance(other, Support) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.points.shape, self.points.tobytes()))


@dataclass(frozen=True)
class Histogram:
    """A probability distribution over a :class:`Support`."""

    support: Support
    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        if mass.shape != (self.support.size,):
            raise ValidationError("histogram length must match support size")
        if (mass < 0.0).any():
            raise ValidationError("negative mass")
        object.__setattr__(self, "mass", mass)
        mass.setflags(write=False)


@dataclass(frozen=True)
class Coupling:
    """A nonnegative transport plan between two supports.

    When feasible for a marginal pair (P, Q), the row sums equal P and the
    column sums equal Q up to solver tolerance; the type itself only
    enforces nonnegativity and shape.
    """

    source: Support
    target: Support
    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        if mass.shape != (self.source.size, self.target.size):
            raise ValidationError("coupling shape must match supports")
        if (mass < 0.0).any():
            raise ValidationError("negative coupling entry")
        object.__setattr__(self, "mass", mass)
        mass.setflags(write=False)

    def row_sums(self) -> np.ndarray:
        return self.mass.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.mass.sum(axis=0)

    def total(self) -> float:
        return float(self.mass.sum())


@dataclass(frozen=True)
class CostMatrix:
    """Per-pair transport costs C[i, j] = sum_k g_k |x_i,k - y_j,k|."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if (vals < 0.0).any():
            raise ValidationError("negative cost")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "weights", w)
        vals.setflags(write=False)
        w.setflags(write=False)


@dataclass(frozen=True)
class DisparityVector:
    """Per-point group imbalance (P_s0 - P_s1) / P_X on a shared support.

    This vector is the only group-level input any repair computation reads;
    it never exposes which individual sample belongs to which group.
    """

    support: Support
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.support.size,):
            raise ValidationError("disparity vector length must match support")
        if not np.isfinite(vals).all():
            raise ValidationError("disparity vector must be finite")
        object.__setattr__(self, "values", vals)
        vals.setflags(write=False)


@dataclass(frozen=True)
class RepairBand:
    """Per-column parity tolerance Theta >= 0; the zero vector asks for
    total repair."""

    support: Support
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 0:
            vals = np.full(self.support.size, float(vals))
        if vals.shape != (self.support.size,):
            raise ValidationError("band length must match support size")
        if (vals < 0.0).any():
            raise ValidationError("band entries must be nonnegative")
        object.__setattr__(self, "values", vals)
        vals.setflags(write=False)

    @classmethod
    def uniform(cls, support: Support, value: float) -> "RepairBand":
        return cls(support, np.full(support.size, float(value)))

    def half_l1(self) -> float:
        return 0.5 * float(np.abs(self.values).sum())


def make_histogram(support: Support, raw_weights) -> Histogram:
    """Normalize nonnegative weights into a histogram on ``support``."""
    w = np.asarray(raw_weights, dtype=float)
    if w.shape != (support.size,):
        raise ValidationError("weight length must match support size")
    if (w < 0.0).any():
        raise ValidationError("negative weight")
    total = w.sum()
    if total <= 0.0:
        raise ValidationError("empty distribution")
    return Histogram(support, w / total)


def entropy(gamma: Coupling | np.ndarray) -> float:
    """Entropy -sum gamma * (log gamma - 1) with the 0 log 0 = 0 convention."""
    g = gamma.mass if isinstance(gamma, Coupling) else np.asarray(gamma, dtype=float)
    pos = g > 0.0
    terms = np.zeros_like(g)
    terms[pos] = g[pos] * (np.log(g[pos]) - 1.0)
    return float(-terms.sum())


def kl_divergence(gamma: Coupling | np.ndarray, xi: Coupling | np.ndarray) -> float:
    """KL divergence sum gamma * (log(gamma / xi) - 1), 0 log 0 = 0.

    The minus-one term makes every projection in this library stationary at
    gamma = xi, at the price of losing nonnegativity for subprobability
    matrices; callers compare values, never signs.
    """
    g = gamma.mass if isinstance(gamma, Coupling) else np.asarray(gamma, dtype=float)
    x = xi.mass if isinstance(xi, Coupling) else np.asarray(xi, dtype=float)
    if g.shape != x.shape:
        raise ValidationError("shape mismatch")
    if (x <= 0.0).any():
        raise ValidationError("reference must be strictly positive")
    pos = g > 0.0
    terms = np.zeros_like(g)
    terms[pos] = g[pos] * (np.log(g[pos] / x[pos]) - 1.0)
    return float(terms.sum())


def tv_distance(p: Histogram, q: Histogram) -> float:
    """Total variation distance between two histograms on one support."""
    if p.support != q.support:
        raise ValidationError("support mismatch")
    return 0.5 * float(np.abs(p.mass - q.mass).sum())


def cost_matrix(source: Support, target: Support, g) -> CostMatrix:
    """Weighted L1 ground cost between two supports."""
    g = np.atleast_1d(np.asarray(g, dtype=float))
    if source.dim != target.dim:
        raise ValidationError("dimension mismatch")
    if g.shape != (source.dim,):
        raise ValidationError("dimension mismatch")
    if (g <= 0.0).any():
        raise ValidationError("cost weights must be strictly positive")
    diff = np.abs(source.points[:, None, :] - target.points[None, :, :])
    return CostMatrix((diff * g).sum(axis=2), g)


def gibbs_kernel(c, epsilon: float) -> np.ndarray:
    """Kernel exp(-C / epsilon), the starting point of every solve."""
    if epsilon <= 0.0:
        raise ValidationError("epsilon must be positive")
    values = c.values if isinstance(c, CostMatrix) else np.asarray(c, dtype=float)
    with np.errstate(under="ignore"):
        xi = np.exp(-values / epsilon)
    if (xi <= 0.0).any():
        raise ValidationError("epsilon too small for cost range")
    return xi


def product_coupling(p: Histogram, q: Histogram) -> Coupling:
    """Independent coupling P x Q; feasible for every parity band."""
    return Coupling(p.support, q.support, np.outer(p.mass, q.mass))


def disparity_vector(p_s0: Histogram, p_s1: Histogram, p_x: Histogram) -> DisparityVector:
    """Build V = (P_s0 - P_s1) / P_X on the shared support.

    The group conditionals must be zero-filled outside their own group's
    observed points, and the pooled histogram must be strictly positive
    everywhere (drop unobserved points first).
    """
    if p_s0.support != p_x.support or p_s1.support != p_x.support:
        raise ValidationError("support mismatch")
    if (p_x.mass <= 0.0).any():
        raise ValidationError("zero mass point in the pooled histogram: prune support first")
    return DisparityVector(p_x.support, (p_s0.mass - p_s1.mass) / p_x.mass)
