"""Angular decomposition of standardized data and extremal coefficients.

A standardized observation splits into a radius (its L1 norm) and an
angle (the normalized vector on the unit simplex). Rows whose radius
clears the threshold n/k1 form the empirical angular measure that the
training loop consumes. Extremal coefficients integrate subset maxima
against that measure; the change-of-norm reweighting converts the
L1-angle representation into the equivalent weighted measure for
another norm.

Angular samples live on the closed simplex (vertex masses are legal
here, unlike in the Aitchison geometry, which requires interior
points).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._accel import HAS_NUMBA, jit
from .errors import ShapeError, ValidationError

__all__ = [
    "AngularSample",
    "polar_decompose",
    "polar_decompose_rows",
    "extreme_angles",
    "extremal_coefficient",
    "extremal_coefficients",
    "enumerate_subsets",
    "reweight_to_norm",
    "SUBSET_CAP",
]

SUBSET_CAP = 25_000
WEIGHT_TOL = 1e-12

_NORMS = ("l1", "l2", "linf")


def _row_norms(points, norm):
    if norm == "l1":
        return np.abs(points).sum(axis=1)
    if norm == "l2":
        return np.sqrt((points**2).sum(axis=1))
    if norm == "linf":
        return np.abs(points).max(axis=1)
    raise ValidationError(f"unknown norm {norm!r}; expected one of {_NORMS}")


@dataclass(frozen=True)
class AngularSample:
    """Weighted point cloud with unit norm per point (default: L1 simplex)."""

    points: np.ndarray  # (K, d), componentwise nonnegative
    weights: np.ndarray = None  # (K,), nonnegative, sums to 1; default uniform
    norm: str = "l1"

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 2:
            raise ShapeError(f"points must be (K, d) with K>=1, d>=2, got {points.shape}")
        if not np.isfinite(points).all() or (points < 0.0).any():
            raise ValidationError("angular points must be finite and nonnegative")
        weights = self.weights
        if weights is None:
            weights = np.full(points.shape[0], 1.0 / points.shape[0])
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (points.shape[0],):
            raise ShapeError(
                f"weights shape {weights.shape} does not match {points.shape[0]} points"
            )
        if (weights < 0.0).any():
            raise ValidationError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValidationError("weights must sum to 1 within 1e-12")
        if self.norm not in _NORMS:
            raise ValidationError(f"unknown norm {self.norm!r}; expected one of {_NORMS}")
        if np.abs(_row_norms(points, self.norm) - 1.0).max() > WEIGHT_TOL:
            raise ValidationError(f"every point must have unit {self.norm} norm within 1e-12")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]


# ---------------------------------------------------------------------------
# Polar decomposition and angle extraction
# ---------------------------------------------------------------------------


def polar_decompose(v):
    """Split a nonnegative vector into (radius, angle): R = sum, W = v/R."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"polar_decompose expects a vector, got shape {v.shape}")
    if (v < 0.0).any() or not np.isfinite(v).all():
        raise ValidationError("components must be nonnegative finite reals")
    r = v.sum()
    if r == 0.0:
        raise ValidationError("cannot decompose the zero vector")
    return float(r), v / r


def polar_decompose_rows(V):
    """Row-wise polar decomposition of a nonnegative matrix."""
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2:
        raise ShapeError(f"expected a matrix, got ndim={V.ndim}")
    if (V < 0.0).any() or not np.isfinite(V).all():
        raise ValidationError("components must be nonnegative finite reals")
    R = V.sum(axis=1)
    if (R == 0.0).any():
        raise ValidationError("cannot decompose zero rows")
    return R, V / R[:, None]


def extreme_angles(Vhat, k1):
    """Angles of the rows whose radius reaches the threshold n/k1.

    Returns (AngularSample with uniform weights, K) where K is the
    number of retained rows (radius >= n/k1, inclusive).
    """
    Vhat = np.asarray(Vhat, dtype=np.float64)
    if Vhat.ndim != 2:
        raise ShapeError(f"expected a matrix, got ndim={Vhat.ndim}")
    n = Vhat.shape[0]
    k1 = int(k1)
    if not 1 <= k1 <= n:
        raise ValidationError(f"k1 must be in [1, n]={n}, got {k1}")
    if (Vhat < 0.0).any():
        raise ValidationError("standardized data must be nonnegative")

    t = n / k1
    R = Vhat.sum(axis=1)
    mask = R >= t
    K = int(mask.sum())
    if K == 0:
        raise ValidationError(
            f"no rows reach the radial threshold n/k1 = {t:.6g}; increase k1"
        )
    W = Vhat[mask] / R[mask, None]
    return AngularSample(points=W, weights=np.full(K, 1.0 / K)), K


# ---------------------------------------------------------------------------
# Extremal coefficients
# ---------------------------------------------------------------------------


def _check_subset(J, d):
    J = tuple(int(j) for j in J)
    if len(set(J)) != len(J):
        raise ValidationError(f"subset {J} has repeated indices")
    if len(J) < 2:
        raise ValidationError(f"subsets need at least 2 indices, got {J}")
    if any(j < 0 or j >= d for j in J):
        raise ValidationError(f"subset {J} out of range for d={d}")
    return J


def extremal_coefficient(phi, J, d):
    """theta_J = d * sum_i weight_i * max_{j in J} point_ij, reported raw.

    The estimator may fall slightly outside [1, |J|]; no clipping is
    applied. Indices in J are 0-based.
    """
    if phi.d != d:
        raise ShapeError(f"sample dimension {phi.d} does not match d={d}")
    J = _check_subset(J, d)
    return float(d * (phi.weights @ phi.points[:, J].max(axis=1)))


def _subset_max_kernel(points, weights, subsets):
    """Loop form of the weighted subset-max accumulation (numba target)."""
    S = subsets.shape[0]
    K = points.shape[0]
    ksz = subsets.shape[1]
    out = np.zeros(S)
    for s in range(S):
        acc = 0.0
        for i in range(K):
            mx = points[i, subsets[s, 0]]
            for t in range(1, ksz):
                v = points[i, subsets[s, t]]
                if v > mx:
                    mx = v
            acc += weights[i] * mx
        out[s] = acc
    return out


_subset_max_jit = jit(_subset_max_kernel)


def _subset_max_numpy(points, weights, subsets):
    """Vectorized fallback with identical contract to the loop kernel."""
    out = np.empty(subsets.shape[0])
    for s, J in enumerate(subsets):
        out[s] = points[:, J].max(axis=1) @ weights
    return out


def subset_max_weighted(points, weights, subsets):
    """sum_i w_i max_{j in J} p_ij for every row J of ``subsets``."""
    if HAS_NUMBA:
        return _subset_max_jit(points, weights, subsets)
    return _subset_max_numpy(points, weights, subsets)


def extremal_coefficients(phi, subsets, d):
    """Batch extremal coefficients for an (S, k) array of index subsets."""
    if phi.d != d:
        raise ShapeError(f"sample dimension {phi.d} does not match d={d}")
    subsets = np.asarray(subsets, dtype=np.int64)
    if subsets.ndim != 2 or subsets.shape[1] < 2:
        raise ShapeError(f"subsets must be (S, k) with k>=2, got {subsets.shape}")
    if subsets.min() < 0 or subsets.max() >= d:
        raise ValidationError("subset indices out of range")
    return d * subset_max_weighted(phi.points, phi.weights, subsets)


def _unrank_combination(rank, d, k):
    """Lexicographic combination of given rank among C(d, k)."""
    out = []
    x = 0
    r = rank
    for i in range(k):
        while math.comb(d - 1 - x, k - 1 - i) <= r:
            r -= math.comb(d - 1 - x, k - 1 - i)
            x += 1
        out.append(x)
        x += 1
    return out


def enumerate_subsets(d, k, cap=SUBSET_CAP, seed=0):
    """All C(d, k) index subsets, or a seeded distinct subsample of ``cap``.

    Returns (subsets as an (S, k) int array in a deterministic order,
    exhaustive flag). The subsample path draws combination ranks without
    replacement and unranks them, so results are reproducible and free
    of duplicates.
    """
    if k < 2 or k > d:
        raise ValidationError(f"subset size must satisfy 2 <= k <= d, got k={k}, d={d}")
    total = math.comb(d, k)
    if total <= cap:
        subsets = np.array(list(itertools.combinations(range(d), k)), dtype=np.int64)
        return subsets, True
    rng = np.random.default_rng(seed)
    chosen = set()
    while len(chosen) < cap:
        draw = rng.integers(0, total, size=cap - len(chosen))
        chosen.update(int(r) for r in draw)
    ranks = sorted(chosen)[:cap]
    subsets = np.array([_unrank_combination(r, d, k) for r in ranks], dtype=np.int64)
    return subsets, False


# ---------------------------------------------------------------------------
# Change-of-norm reweighting
# ---------------------------------------------------------------------------


def reweight_to_norm(phi, target_norm):
    """Re-express an L1 angular sample as a weighted measure on the unit
    sphere of another norm.

    Each point is rescaled to unit target norm and its weight multiplied
    by the target norm of the original point (then renormalized). With
    uniform input weights this is exactly the rescaled-angle estimator;
    the L1 target is the identity.
    """
    if phi.norm != "l1":
        raise ValidationError("reweighting starts from an L1 angular sample")
    if target_norm not in _NORMS:
        raise ValidationError(f"unknown norm {target_norm!r}; expected one of {_NORMS}")
    if target_norm == "l1":
        return phi
    norms = _row_norms(phi.points, target_norm)
    new_weights = phi.weights * norms
    new_weights = new_weights / new_weights.sum()
    new_points = phi.points / norms[:, None]
    return AngularSample(points=new_points, weights=new_weights, norm=target_norm)
