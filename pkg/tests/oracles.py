"""Independent reference implementations used to validate the library.

Everything in this module is deliberately written against the mathematical
definitions rather than against the library code: the KL projections are
solved with a generic convex solver (cvxpy), and the tiny entropic transport
problems are minimized by dense parameter search. Test modules compare
library output to these oracles; the oracles never import the package under
test.
"""
from __future__ import annotations

import warnings

import numpy as np

try:
    import cvxpy as cp
except ImportError:  # pragma: no cover - test extra not installed
    cp = None

#: Solver options shared by all oracle problems. The targets are tighter
#: than the interior-point method can certify on these tiny instances, so
#: it polishes as far as floating point allows and then reports the
#: solution as inaccurate; the comparisons only need 1e-6.
_SOLVE_OPTS = {
    "solver": "CLARABEL",
    "tol_gap_abs": 1e-12,
    "tol_gap_rel": 1e-12,
    "tol_feas": 1e-12,
}


def kl_objective(gamma: np.ndarray, reference: np.ndarray) -> float:
    """KL divergence with the minus-one convention used throughout.

    Computes sum gamma * (log(gamma / reference) - 1) with 0 log 0 = 0.
    """
    gamma = np.asarray(gamma, dtype=float)
    reference = np.asarray(reference, dtype=float)
    pos = gamma > 0.0
    out = np.zeros_like(gamma)
    out[pos] = gamma[pos] * (np.log(gamma[pos] / reference[pos]) - 1.0)
    return float(out.sum())


def _solve(gamma_bar: np.ndarray, constraints_of) -> np.ndarray:
    if cp is None:  # pragma: no cover
        raise RuntimeError("cvxpy is required for the projection oracles")
    gamma_bar = np.asarray(gamma_bar, dtype=float)
    g = cp.Variable(gamma_bar.shape, nonneg=True)
    objective = cp.sum(cp.rel_entr(g, gamma_bar)) - cp.sum(g)
    problem = cp.Problem(cp.Minimize(objective), constraints_of(g))
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="Solution may be inaccurate")
        problem.solve(**_SOLVE_OPTS)
    if g.value is None:  # pragma: no cover
        raise RuntimeError(f"oracle solve failed: {problem.status}")
    return np.maximum(np.asarray(g.value, dtype=float), 0.0)


def project_row_eq(gamma_bar, p):
    return _solve(gamma_bar, lambda g: [cp.sum(g, axis=1) == p])


def project_col_eq(gamma_bar, q):
    return _solve(gamma_bar, lambda g: [cp.sum(g, axis=0) == q])


def project_row_leq(gamma_bar, p):
    return _solve(gamma_bar, lambda g: [cp.sum(g, axis=1) <= p])


def project_col_leq(gamma_bar, q):
    return _solve(gamma_bar, lambda g: [cp.sum(g, axis=0) <= q])


def project_total_mass(gamma_bar, eta):
    return _solve(gamma_bar, lambda g: [cp.sum(g) == eta])


def project_capacity(gamma_bar, cap):
    return _solve(gamma_bar, lambda g: [g <= cap])


def project_parity_band(gamma_bar, v, theta):
    v = np.asarray(v, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return _solve(gamma_bar, lambda g: [g.T @ v <= theta, g.T @ v >= -theta])


def entropic_coupling_2x2(p, q, cost, epsilon, grid=20001):
    """Brute-force entropic optimal transport on a 2x2 instance.

    The feasible set of Pi(P, Q) for 2x2 marginals is a segment parametrised
    by the top-left entry, so a dense scan plus local refinement recovers the
    minimizer of <C, gamma> - eps * E(gamma) to high accuracy.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    cost = np.asarray(cost, dtype=float)
    lo = max(0.0, p[0] + q[0] - 1.0)
    hi = min(p[0], q[0])

    def objective(a):
        gamma = np.array(
            [[a, p[0] - a], [q[0] - a, p[1] - (q[0] - a)]], dtype=float
        )
        ent = np.where(gamma > 0.0, gamma * (np.log(gamma.clip(min=1e-300)) - 1.0), 0.0)
        return float((cost * gamma).sum() + epsilon * ent.sum())

    span = np.linspace(lo, hi, grid)
    vals = np.array([objective(a) for a in span])
    best = int(np.argmin(vals))
    left = span[max(best - 1, 0)]
    right = span[min(best + 1, grid - 1)]
    for _ in range(80):
        third = (right - left) / 3.0
        m1, m2 = left + third, right - third
        if objective(m1) < objective(m2):
            right = m2
        else:
            left = m1
    a = 0.5 * (left + right)
    return np.array([[a, p[0] - a], [q[0] - a, p[1] - (q[0] - a)]], dtype=float)


def band_multiplier_reference(column, v, target):
    """Scalar multiplier equation solved with scipy's brentq, independently."""
    from scipy.optimize import brentq

    column = np.asarray(column, dtype=float)
    v = np.asarray(v, dtype=float)

    def f(x):
        with np.errstate(over="ignore", under="ignore"):
            return float((column * v * np.exp(-v * x)).sum() - target)

    lo, hi = 0.0, 1.0
    sign0 = np.sign(f(0.0))
    if sign0 == 0.0:
        return 0.0
    if sign0 > 0:
        while f(hi) > 0.0:
            hi *= 2.0
            if hi > 1e12:
                raise RuntimeError("reference bracket failed")
        return brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-15)
    lo = -1.0
    while f(lo) < 0.0:
        lo *= 2.0
        if lo < -1e12:
            raise RuntimeError("reference bracket failed")
    return brentq(f, lo, 0.0, xtol=1e-14, rtol=1e-15)
