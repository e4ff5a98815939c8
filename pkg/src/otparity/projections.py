"""KL projections onto the constraint sets used by the solvers.

Each constraint kind ships three things: a mass-domain prox (the public
closed forms), a log-domain prox used inside the iterative solvers where
intermediate iterates can reach scales far beyond double range, and a
violation residual. The parity band is the one set without a closed form;
its per-column multiplier is found by a monotone root solve.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    Coupling,
    DisparityVector,
    Histogram,
    RepairBand,
    SolverError,
    ValidationError,
)

__all__ = [
    "RowEq",
    "ColEq",
    "RowLeq",
    "ColLeq",
    "TotalMass",
    "Capacity",
    "ParityBand",
    "BandMultiplier",
    "prox_row_eq",
    "prox_col_eq",
    "prox_row_leq",
    "prox_col_leq",
    "prox_total_mass",
    "prox_capacity",
    "prox_parity_band",
    "solve_band_multiplier",
]

#: Columns are treated as active only when their signed sum exceeds the band
#: by more than this slack, so boundary columns never trigger a root solve.
_BAND_ACTIVATION_SLACK = 1e-12


def _mass(gamma) -> np.ndarray:
    return gamma.mass if isinstance(gamma, Coupling) else np.asarray(gamma, dtype=float)


def _hist(p) -> np.ndarray:
    return p.mass if isinstance(p, Histogram) else np.asarray(p, dtype=float)


# ---------------------------------------------------------------------------
# mass-domain closed forms
# ---------------------------------------------------------------------------


def prox_row_eq(gamma_bar, p) -> np.ndarray:
    """Rescale rows so the row sums equal ``p`` exactly."""
    g = _mass(gamma_bar)
    pv = _hist(p)
    rows = g.sum(axis=1)
    if ((rows == 0.0) & (pv > 0.0)).any():
        raise ValidationError("mass cannot be created: zero row with positive target")
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(rows > 0.0, pv / np.where(rows > 0.0, rows, 1.0), 1.0)
    return g * scale[:, None]


def prox_col_eq(gamma_bar, q) -> np.ndarray:
    """Rescale columns so the column sums equal ``q`` exactly."""
    g = _mass(gamma_bar)
    qv = _hist(q)
    cols = g.sum(axis=0)
    if ((cols == 0.0) & (qv > 0.0)).any():
        raise ValidationError("mass cannot be created: zero column with positive target")
    scale = np.where(cols > 0.0, qv / np.where(cols > 0.0, cols, 1.0), 1.0)
    return g * scale[None, :]


def prox_row_leq(gamma_bar, p) -> np.ndarray:
    """Scale down any row whose sum exceeds its bound; leave the rest."""
    g = _mass(gamma_bar)
    pv = _hist(p)
    rows = g.sum(axis=1)
    scale = np.where(rows > 0.0, np.minimum(1.0, pv / np.where(rows > 0.0, rows, 1.0)), 1.0)
    return g * scale[:, None]


def prox_col_leq(gamma_bar, q) -> np.ndarray:
    g = _mass(gamma_bar)
    qv = _hist(q)
    cols = g.sum(axis=0)
    scale = np.where(cols > 0.0, np.minimum(1.0, qv / np.where(cols > 0.0, cols, 1.0)), 1.0)
    return g * scale[None, :]


def prox_total_mass(gamma_bar, eta: float) -> np.ndarray:
    """Uniformly rescale the whole matrix to total mass ``eta``."""
    g = _mass(gamma_bar)
    if eta < 0.0:
        raise ValidationError("total mass must be nonnegative")
    if eta == 0.0:
        return np.zeros_like(g)
    total = g.sum()
    if total <= 0.0:
        raise ValidationError("mass cannot be created: zero total with positive target")
    return g * (eta / total)


def prox_capacity(gamma_bar, cap) -> np.ndarray:
    g = _mass(gamma_bar)
    c = np.asarray(cap, dtype=float)
    if c.shape != g.shape:
        raise ValidationError("capacity shape mismatch")
    return np.minimum(g, c)


# ---------------------------------------------------------------------------
# parity band
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BandMultiplier:
    """Result of one per-column multiplier solve."""

    column_index: int
    value: float
    side: str  # "upper", "lower", or "inactive"


def solve_band_multiplier(column, v, target: float, column_index: int = 0) -> BandMultiplier:
    """Solve sum_i column_i v_i exp(-v_i x) = target for the tilt x.

    The left side is strictly decreasing in x, so the root is bracketed by
    exponential expansion from zero (the root is positive when the current
    signed sum exceeds the target, negative when it falls below), narrowed
    by bisection, and polished with a few Newton steps.
    """
    c = np.asarray(column, dtype=float)
    vv = np.asarray(v, dtype=float) if not isinstance(v, DisparityVector) else v.values
    if c.shape != vv.shape:
        raise ValidationError("column and disparity vector length mismatch")

    def f(x: float) -> float:
        # Bracket probes may overflow exp to inf; a zero weight then yields
        # nan, which compares False and keeps the expansion loop going.
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            return float((c * vv * np.exp(-vv * x)).sum()) - target

    def fprime(x: float) -> float:
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            return -float((c * vv * vv * np.exp(-vv * x)).sum())

    f0 = f(0.0)
    scale = float((c * np.abs(vv)).sum()) + abs(target) + 1e-300
    if abs(f0) <= 1e-14 * scale:
        return BandMultiplier(column_index, 0.0, "inactive")
    going_up = f0 > 0.0
    lo, hi = 0.0, 1.0
    if going_up:
        for _ in range(200):
            if f(hi) <= 0.0:
                break
            lo, hi = hi, hi * 2.0
        else:
            raise SolverError(
                "root not bracketed: the column needs mass on both signs "
                "of the disparity vector"
            )
    else:
        lo, hi = -1.0, 0.0
        for _ in range(200):
            if f(lo) >= 0.0:
                break
            lo, hi = lo * 2.0, lo
        else:
            raise SolverError(
                "root not bracketed: the column needs mass on both signs "
                "of the disparity vector"
            )
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(5):
        fx = f(x)
        if abs(fx) <= 1e-14 * scale:
            break
        fp = fprime(x)
        if fp == 0.0:
            break
        step = fx / fp
        if not np.isfinite(step):
            break
        x -= step
    side = "upper" if going_up else "lower"
    return BandMultiplier(column_index, float(x), side)


def prox_parity_band(gamma_bar, v, theta) -> np.ndarray:
    """Project onto the band -Theta_j <= [gamma^T V]_j <= Theta_j.

    Columns already inside the band and rows with a zero disparity entry
    pass through bit-exactly; each violating column gets an exponential
    tilt exp(-V_i nu_j) with nu_j from :func:`solve_band_multiplier`,
    targeting the nearer band face.
    """
    g = _mass(gamma_bar)
    vv = v.values if isinstance(v, DisparityVector) else np.asarray(v, dtype=float)
    th = theta.values if isinstance(theta, RepairBand) else np.asarray(theta, dtype=float)
    if th.ndim == 0:
        th = np.full(g.shape[1], float(th))
    signed = g.T @ vv
    active = np.abs(signed) > th + _BAND_ACTIVATION_SLACK
    if not active.any():
        return g.copy()
    out = g.copy()
    for j in np.flatnonzero(active):
        target = th[j] if signed[j] > 0.0 else -th[j]
        mult = solve_band_multiplier(g[:, j], vv, target, column_index=int(j))
        out[:, j] = g[:, j] * np.exp(-vv * mult.value)
    return out


# ---------------------------------------------------------------------------
# log-domain proxes (solver internals)
# ---------------------------------------------------------------------------


def _lse(a: np.ndarray, axis: int) -> np.ndarray:
    """Max-shifted log-sum-exp that tolerates all minus-infinity slices."""
    m = np.max(a, axis=axis, keepdims=True)
    ms = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(under="ignore", divide="ignore"):
        s = np.exp(a - ms).sum(axis=axis)
        out = np.squeeze(ms, axis=axis) + np.log(s)
    return np.where(np.isfinite(np.squeeze(m, axis=axis)), out, -np.inf)


def _log_prox_row_eq(lz: np.ndarray, lp: np.ndarray) -> np.ndarray:
    rows = _lse(lz, axis=1)
    if (~np.isfinite(rows) & np.isfinite(lp)).any():
        raise ValidationError("mass cannot be created: zero row with positive target")
    # a zero target on an already-zero row stays zero instead of 0/0
    with np.errstate(invalid="ignore"):
        shift = lp - rows
    shift = np.where(np.isnan(shift), -np.inf, shift)
    return lz + shift[:, None]


def _log_prox_col_eq(lz: np.ndarray, lq: np.ndarray) -> np.ndarray:
    cols = _lse(lz, axis=0)
    if (~np.isfinite(cols) & np.isfinite(lq)).any():
        raise ValidationError("mass cannot be created: zero column with positive target")
    with np.errstate(invalid="ignore"):
        shift = lq - cols
    shift = np.where(np.isnan(shift), -np.inf, shift)
    return lz + shift[None, :]


def _log_prox_row_leq(lz: np.ndarray, lp: np.ndarray) -> np.ndarray:
    shift = np.minimum(0.0, lp - _lse(lz, axis=1))
    return lz + np.where(np.isfinite(shift), shift, 0.0)[:, None]


def _log_prox_col_leq(lz: np.ndarray, lq: np.ndarray) -> np.ndarray:
    shift = np.minimum(0.0, lq - _lse(lz, axis=0))
    return lz + np.where(np.isfinite(shift), shift, 0.0)[None, :]


def _log_prox_total_mass(lz: np.ndarray, eta: float) -> np.ndarray:
    if eta == 0.0:
        return np.full_like(lz, -np.inf)
    total = _lse(lz.reshape(1, -1), axis=1)[0]
    if not np.isfinite(total):
        raise ValidationError("mass cannot be created: zero total with positive target")
    return lz + (np.log(eta) - total)


def _log_prox_capacity(lz: np.ndarray, lcap: np.ndarray) -> np.ndarray:
    return np.minimum(lz, lcap)


def _log_prox_parity_band(
    lz: np.ndarray,
    v: np.ndarray,
    theta: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> np.ndarray:
    """Vectorized band projection on log masses.

    Solving the multiplier equation directly on exponentiated masses breaks
    down when a column's scale or the target underflow against each other,
    so each column's equation is recast as a difference of log-sum-exps:

        phi(x) = logsumexp over positive-disparity rows of (a - w x + log w)
               - logaddexp(log target, logsumexp over negative rows)

    phi is strictly decreasing with slope bounded away from zero, which
    makes safeguarded Newton globally convergent at any scale.
    """
    vm = v != 0.0
    if not vm.any():
        return lz
    sub = lz[vm]
    vcol = v[vm][:, None]
    m0 = sub.max(axis=0)
    m0s = np.where(np.isfinite(m0), m0, 0.0)
    with np.errstate(under="ignore"):
        scaled = np.exp(sub - m0s[None, :])
    signed = (scaled * vcol).sum(axis=0)
    slack = theta * np.exp(-m0s) + _BAND_ACTIVATION_SLACK * np.abs(scaled).sum(axis=0).clip(min=1.0)
    active = np.abs(signed) > slack
    if not active.any():
        return lz
    cols = np.flatnonzero(active)
    sigma = np.sign(signed[cols])
    a = sub[:, cols] - m0s[None, cols]
    w = vcol * sigma[None, :]
    with np.errstate(divide="ignore"):
        ltheta = np.where(theta[cols] > 0.0, np.log(theta[cols].clip(min=1e-300)), -np.inf)
    ltheta = ltheta - m0s[cols]
    posm = w > 0.0
    negm = w < 0.0
    with np.errstate(divide="ignore"):
        lwpos = np.where(posm, np.log(np.where(posm, w, 1.0)), -np.inf)
        lwneg = np.where(negm, np.log(np.where(negm, -w, 1.0)), -np.inf)
    no_neg = ~np.isfinite(np.where(negm, a, -np.inf).max(axis=0))
    if (no_neg & ~np.isfinite(ltheta)).any():
        raise SolverError(
            "root not bracketed: a column needs mass on both signs "
            "of the disparity vector to reach a zero band"
        )

    def phi(x: np.ndarray):
        t = a - w * x[None, :]
        tp = np.where(posm, t + lwpos, -np.inf)
        tn = np.where(negm, t + lwneg, -np.inf)
        lpos = _lse(tp, axis=0)
        lneg = _lse(tn, axis=0)
        lden = np.logaddexp(ltheta, lneg)
        # expectation of w over each side, for the derivative
        mp = np.where(np.isfinite(lpos), lpos, 0.0)
        mn = np.where(np.isfinite(lneg), lneg, 0.0)
        with np.errstate(under="ignore"):
            epos = (np.exp(tp - mp[None, :]) * np.where(posm, w, 0.0)).sum(axis=0)
            eneg = (np.exp(tn - mn[None, :]) * np.where(negm, -w, 0.0)).sum(axis=0)
        wneg = np.where(np.isfinite(lneg), np.exp(lneg - lden), 0.0)
        dphi = -epos - wneg * eneg
        return lpos - lden, dphi

    x = np.zeros(cols.size)
    f0, fp0 = phi(x)
    lo = np.zeros(cols.size)
    hi = np.maximum(1.0, -4.0 * f0 / fp0)
    for _ in range(200):
        fh, _ = phi(hi)
        still_open = fh > 0.0
        if not still_open.any():
            break
        lo = np.where(still_open, hi, lo)
        hi = np.where(still_open, hi * 2.0, hi)
    else:
        raise SolverError("root not bracketed: band multiplier expansion failed")
    x = 0.5 * (lo + hi)
    converged = np.zeros(cols.size, dtype=bool)
    for _ in range(max_iter):
        fx, fpx = phi(x)
        lo = np.where(fx > 0.0, x, lo)
        hi = np.where(fx > 0.0, hi, x)
        converged = np.abs(fx) <= tol
        if converged.all():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - fx / fpx
        ok = np.isfinite(xn) & (xn > lo) & (xn < hi)
        x = np.where(converged, x, np.where(ok, xn, 0.5 * (lo + hi)))
    if not converged.all():
        raise SolverError("band multiplier iteration did not converge")
    out = lz.copy()
    tilt = vcol * (sigma * x)[None, :]
    block = out[np.ix_(vm, cols)]
    out[np.ix_(vm, cols)] = block - tilt
    return out


# ---------------------------------------------------------------------------
# constraint-set objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RowEq:
    """Row marginals fixed to a histogram."""

    p: Histogram

    def prox(self, gamma: np.ndarray) -> np.ndarray:
        return prox_row_eq(gamma, self.p)

    def log_prox(self, lz: np.ndarray) -> np.ndarray:
        return _log_prox_row_eq(lz, _log_hist(self.p))

    def residual(self, gamma: np.ndarray) -> float:
        return float(np.abs(gamma.sum(axis=1) - self.p.mass).sum())


@dataclass(frozen=True)
class ColEq:
    """Column marginals fixed to a histogram."""

    q: Histogram

    def prox(self, gamma: np.ndarray) -> np.ndarray:
        return prox_col_eq(gamma, self.q)

    def log_prox(self, lz: np.ndarray) -> np.ndarray:
        return _log_prox_col_eq(lz, _log_hist(self.q))

    def residual(self, gamma: np.ndarray) -> float:
        return float(np.abs(gamma.sum(axis=0) - self.q.mass).sum())


@dataclass(frozen=True)
class RowLeq:
    p: Histogram

    def prox(self, gamma: np.ndarray) -> np.ndarray:
        return prox_row_leq(gamma, self.p)

    def log_prox(self, lz: np.ndarray) -> np.ndarray:
        return _log_prox_row_leq(lz, _log_hist(self.p))

    def residual(self, gamma: np.ndarray) -> float:
        return float(np.maximum(gamma.sum(axis=1) - self.p.mass, 0.0).sum())


@dataclass(frozen=True)
class ColLeq:
    q: Histogram

    def prox(self, gamma: np.ndarray) -> np.ndarray:
        return prox_col_leq(gamma, self.q)

    def log_prox(self, lz: np.ndarray) -> np.ndarray:
        return _log_prox_col_leq(lz, _log_hist(self.q))

    def residual(self, gamma: np.ndarray) -> float:
        return float(np.maximum(gamma.sum(axis=0) - self.q.mass, 0.0).sum())


@dataclass(frozen=True)
class TotalMass:
    eta: float

    def prox(self, gamma: np.ndarray) -> np.ndarray:
        return prox_total_mass(gamma, self.eta)

    def log_prox(self, lz: np.ndarray) -> np.ndarray:
        return _log_prox_total_mass(lz, self.eta)

    def residual(self, gamma: np.ndarray) -> float:
        return float(abs(gamma.sum() - self.eta))


@dataclass(frozen=True)
class Capacity:
    cap: np.ndarray

    def prox(self, gamma: np.ndarray) -> np.ndarray:
        return prox_capacity(gamma, self.cap)

    def log_prox(self, lz: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return _log_prox_capacity(lz, np.log(np.asarray(self.cap, dtype=float)))

    def residual(self, gamma: np.ndarray) -> float:
        return float(np.maximum(gamma - self.cap, 0.0).sum())


@dataclass(frozen=True)
class ParityBand:
    """Signed column sums against V confined to [-Theta_j, Theta_j]."""

    v: DisparityVector
    theta: RepairBand

    def prox(self, gamma: np.ndarray) -> np.ndarray:
        return prox_parity_band(gamma, self.v, self.theta)

    def log_prox(self, lz: np.ndarray) -> np.ndarray:
        return _log_prox_parity_band(lz, self.v.values, self.theta.values)

    def residual(self, gamma: np.ndarray) -> float:
        signed = gamma.T @ self.v.values
        return float(np.maximum(np.abs(signed) - self.theta.values, 0.0).sum())


def _log_hist(p: Histogram) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(p.mass)
