"""Iterative KL-projection solvers for constrained entropic couplings.

The public entry points accept and return mass-domain objects, while all
iteration happens on log masses. Small entropic regularisers push iterates
through scales that overflow doubles long before convergence, and every
prox in the cycle has an exact log-domain form, so the log representation
is the only one the loops ever touch.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core import (
    Coupling,
    CostMatrix,
    DisparityVector,
    Histogram,
    RepairBand,
    SolverError,
    Support,
    ValidationError,
    gibbs_kernel,
)
from .projections import ColEq, ParityBand, RowEq

__all__ = [
    "SolveConfig",
    "SolveReport",
    "dykstra",
    "bregman_iterate",
    "residuals",
    "solve_repair_coupling",
    "solve_barycentre_coupling",
    "barycentre_group_maps",
]


@dataclass(frozen=True)
class SolveConfig:
    """Knobs shared by the iterative solvers.

    ``theta`` is the uniform band half-width carried along for callers that
    build the band from configuration files; ``None`` means the caller
    supplies the band explicitly.
    """

    epsilon: float = 0.01
    max_iters: int = 600
    residual_tol: float = 1e-9
    theta: float | None = None

    def __post_init__(self) -> None:
        if self.epsilon <= 0.0:
            raise ValidationError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be at least 1")
        if self.residual_tol < 0.0:
            raise ValidationError("residual_tol must be nonnegative")
        if self.theta is not None and self.theta < 0.0:
            raise ValidationError("theta must be nonnegative")

    @classmethod
    def from_json(cls, text: str) -> "SolveConfig":
        """Parse a config from its JSON form.

        Recognised keys are ``epsilon``, ``max_iters``, ``residual_tol``
        and ``theta``; the latter is an object like
        ``{"kind": "uniform", "value": 1e-3}``.
        """
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid config JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ValidationError("config JSON must be an object")
        kwargs: dict = {}
        if "epsilon" in raw:
            kwargs["epsilon"] = float(raw["epsilon"])
        if "max_iters" in raw:
            kwargs["max_iters"] = int(raw["max_iters"])
        if "residual_tol" in raw:
            kwargs["residual_tol"] = float(raw["residual_tol"])
        if "theta" in raw:
            spec = raw["theta"]
            if not isinstance(spec, dict) or spec.get("kind") != "uniform":
                raise ValidationError("theta config must be {'kind': 'uniform', 'value': ...}")
            kwargs["theta"] = float(spec["value"])
        return cls(**kwargs)


@dataclass(frozen=True)
class SolveReport:
    """What a solver run actually did."""

    iterations_run: int
    final_residuals: dict[str, float] = field(default_factory=dict)
    kl_to_kernel: float = float("nan")
    converged: bool = False

    @property
    def max_residual(self) -> float:
        return max(self.final_residuals.values()) if self.final_residuals else float("nan")


def residuals(gamma, constraints) -> dict[str, float]:
    """Violation of each constraint at ``gamma``, keyed by class name."""
    g = gamma.mass if isinstance(gamma, Coupling) else np.asarray(gamma, dtype=float)
    out: dict[str, float] = {}
    for cons in constraints:
        name = type(cons).__name__
        key = name
        n = 2
        while key in out:
            key = f"{name}_{n}"
            n += 1
        out[key] = cons.residual(g)
    return out


def _kl_to_kernel(lz: np.ndarray, lxi: np.ndarray) -> float:
    with np.errstate(under="ignore", over="ignore", invalid="ignore"):
        g = np.exp(lz)
        terms = np.where(g > 0.0, g * (lz - lxi - 1.0), 0.0)
    return float(terms.sum())


def _check_state(lz: np.ndarray) -> None:
    if np.isnan(lz).any() or (lz == np.inf).any():
        raise SolverError("numerical blow-up: decrease K or increase epsilon")


def dykstra(xi, constraints, config: SolveConfig) -> tuple[np.ndarray, SolveReport]:
    """Dykstra's algorithm with KL projections, cycling over ``constraints``.

    ``xi`` is the reference matrix the KL objective is measured against
    (typically a Gibbs kernel). One iteration is one prox application, so a
    budget of ``max_iters`` spread over L constraints performs
    ``max_iters / L`` full cycles. Corrections are stored per constraint
    and applied multiplicatively, which in the log domain is an addition.

    Returns the mass-domain solution and a report. Residuals are checked
    once per full cycle and the loop stops early when all of them fall
    below ``config.residual_tol``.
    """
    xi = xi.mass if isinstance(xi, Coupling) else np.asarray(xi, dtype=float)
    if xi.ndim != 2:
        raise ValidationError("reference matrix must be two dimensional")
    if (xi <= 0.0).any() or not np.isfinite(xi).all():
        raise ValidationError("reference matrix must be strictly positive")
    if not constraints:
        raise ValidationError("need at least one constraint")
    lz = np.log(xi)
    lxi = lz.copy()
    num = len(constraints)
    corrections = [np.zeros_like(lz) for _ in range(num)]
    converged = False
    steps = 0
    for k in range(config.max_iters):
        idx = k % num
        z = lz + corrections[idx]
        try:
            lz = constraints[idx].log_prox(z)
        except (ValidationError, SolverError) as exc:
            raise type(exc)(f"iteration {k + 1}: {exc}") from exc
        d = z - lz
        # entries pinned to zero mass stay zero under every prox here, so
        # the correction on them carries no information; keep it finite
        corrections[idx] = np.where(np.isfinite(d), d, 0.0)
        steps = k + 1
        if steps % num == 0:
            _check_state(lz)
            with np.errstate(under="ignore"):
                g = np.exp(lz)
            res = residuals(g, constraints)
            if max(res.values()) <= config.residual_tol:
                converged = True
                break
    _check_state(lz)
    with np.errstate(under="ignore"):
        g = np.exp(lz)
    report = SolveReport(
        iterations_run=steps,
        final_residuals=residuals(g, constraints),
        kl_to_kernel=_kl_to_kernel(lz, lxi),
        converged=converged,
    )
    return g, report


def bregman_iterate(
    xi,
    p: Histogram,
    q: Histogram,
    max_iters: int = 400,
    tol: float = 1e-9,
) -> tuple[np.ndarray, SolveReport]:
    """Plain iterative Bregman projections onto the two marginal sets.

    Equivalent to Sinkhorn scaling. On marginal constraints Dykstra's
    corrections are per-row and per-column constants that the next prox
    cancels exactly, so this shortcut matches :func:`dykstra` to floating
    point noise while skipping the correction bookkeeping. Iterations
    count individual prox applications, like ``dykstra``.
    """
    xi = xi.mass if isinstance(xi, Coupling) else np.asarray(xi, dtype=float)
    if xi.shape != (p.mass.size, q.mass.size):
        raise ValidationError("reference matrix shape does not match the marginals")
    if (xi <= 0.0).any() or not np.isfinite(xi).all():
        raise ValidationError("reference matrix must be strictly positive")
    cycle = [RowEq(p), ColEq(q)]
    lz = np.log(xi)
    lxi = lz.copy()
    converged = False
    steps = 0
    for k in range(max_iters):
        try:
            lz = cycle[k % 2].log_prox(lz)
        except (ValidationError, SolverError) as exc:
            raise type(exc)(f"iteration {k + 1}: {exc}") from exc
        steps = k + 1
        if steps % 2 == 0:
            _check_state(lz)
            with np.errstate(under="ignore"):
                g = np.exp(lz)
            res = residuals(g, cycle)
            if max(res.values()) <= tol:
                converged = True
                break
    _check_state(lz)
    with np.errstate(under="ignore"):
        g = np.exp(lz)
    report = SolveReport(
        iterations_run=steps,
        final_residuals=residuals(g, cycle),
        kl_to_kernel=_kl_to_kernel(lz, lxi),
        converged=converged,
    )
    return g, report


def solve_repair_coupling(
    p_x: Histogram,
    p_xt: Histogram,
    v: DisparityVector,
    theta: RepairBand,
    cost,
    config: SolveConfig | None = None,
) -> tuple[Coupling, SolveReport]:
    """Entropic coupling of ``p_x`` to ``p_xt`` with the parity band enforced.

    The constraint cycle is row marginals, column marginals, band, in that
    order, so a budget that is a multiple of three ends on a band
    projection and the returned coupling satisfies the band exactly.
    """
    if config is None:
        config = SolveConfig()
    if p_x.support != v.support:
        raise ValidationError("disparity vector support does not match the source")
    if p_xt.support != theta.support:
        raise ValidationError("band support does not match the target")
    c = cost.values if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=float)
    if c.shape != (p_x.support.size, p_xt.support.size):
        raise ValidationError("cost shape does not match the marginals")
    xi = gibbs_kernel(c, config.epsilon)
    cycle = [RowEq(p_x), ColEq(p_xt), ParityBand(v, theta)]
    g, report = dykstra(xi, cycle, config)
    return Coupling(p_x.support, p_xt.support, g), report


def solve_barycentre_coupling(
    p_s0: Histogram,
    p_s1: Histogram,
    cost,
    epsilon: float = 0.01,
    max_iters: int = 400,
    tol: float = 1e-9,
) -> Coupling:
    """Entropic coupling between the two group conditionals."""
    if p_s0.support != p_s1.support:
        raise ValidationError("group histograms must share a support")
    c = cost.values if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=float)
    if c.shape != (p_s0.support.size, p_s1.support.size):
        raise ValidationError("cost shape does not match the marginals")
    xi = gibbs_kernel(c, epsilon)
    g, _ = bregman_iterate(xi, p_s0, p_s1, max_iters=max_iters, tol=tol)
    return Coupling(p_s0.support, p_s1.support, g)


def _nearest_indices(points: np.ndarray, support: Support) -> np.ndarray:
    """Index of the nearest support point for each row, ties to the lower index."""
    if support.dim == 1:
        vals = support.points[:, 0]
        x = points[:, 0]
        pos = np.searchsorted(vals, x)
        pos = np.clip(pos, 1, vals.size - 1) if vals.size > 1 else np.zeros_like(pos)
        if vals.size == 1:
            return np.zeros(x.size, dtype=np.intp)
        left = pos - 1
        right = pos
        dl = np.abs(x - vals[left])
        dr = np.abs(x - vals[right])
        return np.where(dl <= dr, left, right)
    tree = cKDTree(support.points)
    _, idx = tree.query(points, k=1, p=1)
    return np.asarray(idx, dtype=np.intp)


def barycentre_group_maps(gamma_b: Coupling, pi0: float) -> tuple[Coupling, Coupling]:
    """Split a group-to-group coupling through its weighted barycentre.

    Each unit of mass travelling from group-0 point ``x0`` to group-1
    point ``x1`` stops at the interpolate ``pi0 * x0 + (1 - pi0) * x1``,
    snapped to the nearest support point (ties break toward the lower
    index). The two returned couplings keep their group marginals as row
    sums and share the barycentre histogram as their column marginal.
    """
    if not 0.0 <= pi0 <= 1.0:
        raise ValidationError("pi0 must lie in [0, 1]")
    if gamma_b.source != gamma_b.target:
        raise ValidationError("barycentre coupling must live on a shared support")
    support = gamma_b.source
    n0, n1 = gamma_b.mass.shape
    i0, i1 = np.nonzero(gamma_b.mass)
    w = gamma_b.mass[i0, i1]
    mid = pi0 * support.points[i0] + (1.0 - pi0) * support.points[i1]
    b = _nearest_indices(mid, support)
    g0 = np.zeros((n0, support.size))
    g1 = np.zeros((n1, support.size))
    np.add.at(g0, (i0, b), w)
    np.add.at(g1, (i1, b), w)
    return Coupling(support, support, g0), Coupling(support, support, g1)
