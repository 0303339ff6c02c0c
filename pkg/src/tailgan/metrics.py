"""Evaluation metrics: extremal-coefficient dependence score and exact
2-Wasserstein distance.

The transport solver is exact (network simplex, no entropic smoothing).
Every returned plan is certified before release: marginals within 1e-9,
dual feasibility and complementary slackness within 1e-7 relative to
the largest cost magnitude, and strong duality. A plan that fails any
check raises instead of being returned.

Uniform weights are rescaled to integers via lcm(n_G, n_T) so the
simplex runs on exact integer-valued flows; general weights run in
float64 and rely on the certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lcm

import numpy as np
from scipy.spatial.distance import cdist

from ._netsimplex import solve_transport
from .angular import SUBSET_CAP, AngularSample, enumerate_subsets, extremal_coefficients
from .errors import NumericalError, ShapeError, ValidationError

WEIGHT_SUM_TOL = 1e-9
MARGINAL_TOL = 1e-9
DUAL_TOL = 1e-7
MAX_ITER_FLOOR = 20000
MAX_ITER_FACTOR = 200


@dataclass(frozen=True)
class TransportPlan:
    """Optimal transport plan between two weighted point clouds.

    pi : (n_G, n_T) ndarray
        Nonnegative mass-transfer matrix; row sums equal the source
        weights and column sums the target weights within 1e-9.
    objective : float
        Total cost sum(cost * pi).
    alpha, beta : ndarray
        Dual potentials certifying optimality:
        alpha[i] + beta[j] <= cost[i, j] with equality on the support.
    iterations : int
        Simplex pivots performed.
    """

    pi: np.ndarray
    objective: float
    alpha: np.ndarray
    beta: np.ndarray
    iterations: int


def _check_weights(w, n, name):
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n,):
        raise ShapeError(f"{name} must have shape ({n},), got {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0.0):
        raise ValidationError(f"{name} must be finite and nonnegative")
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise ValidationError(
            f"{name} must sum to 1 within {WEIGHT_SUM_TOL}, got sum {w.sum()!r}"
        )
    return w


def _certify(cost, plan, a, b, alpha, beta):
    """Raise NumericalError unless (plan, alpha, beta) certifies optimality."""
    row_err = np.abs(plan.sum(axis=1) - a).max()
    col_err = np.abs(plan.sum(axis=0) - b).max()
    if row_err > MARGINAL_TOL or col_err > MARGINAL_TOL:
        raise NumericalError(
            f"transport plan marginals off by {max(row_err, col_err):.3e} "
            f"(tolerance {MARGINAL_TOL})"
        )
    scale = max(1.0, float(np.abs(cost).max()))
    tol = DUAL_TOL * scale
    rc = cost - alpha[:, None] - beta[None, :]
    feas = float(rc.min())
    if feas < -tol:
        raise NumericalError(
            f"dual potentials infeasible: min reduced cost {feas:.3e} < -{tol:.3e}"
        )
    support = plan > 0.0
    if np.any(support):
        slack = float(np.abs(rc[support]).max())
        if slack > tol:
            raise NumericalError(
                f"complementary slackness violated by {slack:.3e} (tolerance {tol:.3e})"
            )
    primal = float((cost * plan).sum())
    dual = float(a @ alpha + b @ beta)
    if abs(primal - dual) > tol * max(1.0, abs(primal)):
        raise NumericalError(
            f"duality gap {abs(primal - dual):.3e} exceeds {tol:.3e} relative"
        )


def ot_solve(cost, a, b):
    """Exact solution of min sum(cost * pi) over plans with marginals a, b."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.size == 0:
        raise ShapeError(f"cost must be a nonempty 2-D matrix, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValidationError("cost matrix must be finite")
    n1, n2 = cost.shape
    a = _check_weights(a, n1, "a")
    b = _check_weights(b, n2, "b")

    ridx = np.flatnonzero(a > 0.0)
    cidx = np.flatnonzero(b > 0.0)
    sub = np.ascontiguousarray(cost[np.ix_(ridx, cidx)])
    asub = a[ridx]
    bsub = b[cidx]
    m1 = ridx.size
    m2 = cidx.size

    uniform = np.all(asub == asub[0]) and np.all(bsub == bsub[0])
    if uniform:
        L = lcm(m1, m2)
        supply = np.concatenate(
            [np.full(m1, L // m1, dtype=np.float64),
             np.full(m2, -(L // m2), dtype=np.float64)]
        )
        denom = float(L)
    else:
        supply = np.concatenate([asub, -bsub])
        denom = 1.0

    max_iters = max(MAX_ITER_FLOOR, MAX_ITER_FACTOR * (m1 + m2))
    flow, pot, status, iters = solve_transport(sub, supply, max_iters)
    if status == 1:
        raise NumericalError(f"transport solver hit the {max_iters}-pivot limit")
    if status == 2:
        raise NumericalError("transport solver found an unbounded cycle")
    if status == 3:
        raise NumericalError("transport solver left mass on artificial arcs")

    plan = np.zeros((n1, n2))
    plan[np.ix_(ridx, cidx)] = flow[: m1 * m2].reshape(m1, m2) / denom

    alpha = np.empty(n1)
    beta = np.empty(n2)
    alpha[ridx] = -pot[:m1]
    beta[cidx] = pot[m1 : m1 + m2]
    # Zero-weight rows/columns carry no mass; give them tight feasible duals.
    missing_r = np.flatnonzero(a == 0.0)
    missing_c = np.flatnonzero(b == 0.0)
    if missing_c.size:
        if ridx.size:
            beta[missing_c] = (cost[np.ix_(ridx, missing_c)] - alpha[ridx, None]).min(axis=0)
        else:
            beta[missing_c] = 0.0
    if missing_r.size:
        alpha[missing_r] = (cost[missing_r] - beta[None, :]).min(axis=1)

    _certify(cost, plan, a, b, alpha, beta)
    objective = float((cost * plan).sum())
    return TransportPlan(pi=plan, objective=objective, alpha=alpha, beta=beta,
                         iterations=int(iters))


def w2_distance(A, B):
    """2-Wasserstein distance between uniformly weighted point clouds."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[0] == 0 or B.shape[0] == 0:
        raise ShapeError("point sets must be nonempty 2-D arrays of shape (n, d)")
    if A.shape[1] != B.shape[1]:
        raise ShapeError(
            f"point sets must share a dimension, got {A.shape[1]} and {B.shape[1]}"
        )
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValidationError("point sets must be finite")
    cost = cdist(A, B, metric="sqeuclidean")
    a = np.full(A.shape[0], 1.0 / A.shape[0])
    b = np.full(B.shape[0], 1.0 / B.shape[0])
    plan = ot_solve(cost, a, b)
    return float(np.sqrt(max(plan.objective, 0.0)))


def coefficient_table(phi_G, phi_T, k, *, cap=SUBSET_CAP, seed=0):
    """Extremal coefficients of both samples over a shared subset list.

    Returns (subsets, theta_G, theta_T) where subsets is the (S, k)
    index array shared by the two coefficient vectors.
    """
    if not isinstance(phi_G, AngularSample) or not isinstance(phi_T, AngularSample):
        raise ValidationError("coefficient_table expects AngularSample inputs")
    if phi_G.d != phi_T.d:
        raise ShapeError(
            f"angular samples must share a dimension, got {phi_G.d} and {phi_T.d}"
        )
    subsets, _ = enumerate_subsets(phi_G.d, k, cap=cap, seed=seed)
    theta_G = extremal_coefficients(phi_G, subsets, phi_G.d)
    theta_T = extremal_coefficients(phi_T, subsets, phi_T.d)
    return subsets, theta_G, theta_T


def dependence_score(phi_G, phi_T, d, k, *, cap=SUBSET_CAP, seed=0):
    """Mean relative absolute error of extremal coefficients at subset size k."""
    if k not in (2, 3):
        raise ValidationError(f"k must be 2 or 3, got {k}")
    if not isinstance(phi_G, AngularSample) or not isinstance(phi_T, AngularSample):
        raise ValidationError("dependence_score expects AngularSample inputs")
    if phi_G.d != d or phi_T.d != d:
        raise ShapeError(
            f"angular samples must live on d={d}, got {phi_G.d} and {phi_T.d}"
        )
    _, theta_G, theta_T = coefficient_table(phi_G, phi_T, k, cap=cap, seed=seed)
    return float(np.mean(np.abs(1.0 - theta_G / theta_T)))
