"""Aitchison geometry of the open unit simplex.

Points are plain float64 arrays; functions accept a single composition
(1-d, length d) or a batch (2-d, one composition per row). The simplex
is open: components within 1e-300 of the boundary are rejected rather
than clamped, so degenerate inputs surface as errors instead of
silently projecting onto a face.

The centered log-ratio (clr) map sends the simplex isometrically onto
the zero-sum hyperplane of R^d; its inverse is softmax. Coordinates are
taken against a fixed orthonormal basis of that hyperplane, so the
simplex of dimension d is described by d-1 unconstrained reals.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, ValidationError

__all__ = [
    "check_simplex",
    "check_basis",
    "clr",
    "clr_inv",
    "orthonormal_basis",
    "to_coordinates",
    "from_coordinates",
    "add",
    "scale",
    "inner",
]

BOUNDARY_TOL = 1e-300
SUM_TOL = 1e-12


def _as_rows(w, name):
    a = np.asarray(w, dtype=np.float64)
    if a.ndim == 1:
        return a[None, :], True
    if a.ndim == 2:
        return a, False
    raise ShapeError(f"{name} must be a vector or a matrix of row vectors, got ndim={a.ndim}")


def check_simplex(w):
    """Validate open-simplex membership; returns the input as float64 rows.

    Raises ValidationError when any component is within 1e-300 of the
    boundary or a row does not sum to 1 within 1e-12.
    """
    rows, single = _as_rows(w, "simplex point")
    if rows.shape[1] < 2:
        raise ValidationError("simplex points need at least 2 components")
    if not np.isfinite(rows).all():
        raise ValidationError("simplex point has non-finite components")
    if (rows <= BOUNDARY_TOL).any():
        raise ValidationError(
            "point lies on (or within 1e-300 of) the simplex boundary; "
            "the angular measure is supported on the open simplex"
        )
    sums = rows.sum(axis=1)
    if np.abs(sums - 1.0).max() > SUM_TOL:
        raise ValidationError("simplex point components must sum to 1 within 1e-12")
    return rows, single


def clr(w):
    """Centered log-ratio: clr(w)_j = log(w_j / g(w)) with g the geometric mean."""
    rows, single = check_simplex(w)
    logw = np.log(rows)
    out = logw - logw.mean(axis=1, keepdims=True)
    return out[0] if single else out


def clr_inv(x):
    """Inverse clr (softmax), computed with max subtraction for overflow safety."""
    rows, single = _as_rows(x, "clr vector")
    if not np.isfinite(rows).all():
        raise ValidationError("clr_inv requires finite components")
    e = np.exp(rows - rows.max(axis=1, keepdims=True))
    out = e / e.sum(axis=1, keepdims=True)
    if (out <= BOUNDARY_TOL).any():
        raise ValidationError(
            "softmax output underflowed to the simplex boundary "
            "(input coordinates too extreme)"
        )
    return out[0] if single else out


def orthonormal_basis(d):
    """Orthonormal basis of the zero-sum hyperplane in R^d, as a d x (d-1) matrix.

    Column i (1-based) is sqrt(i/(i+1)) * (1/i, ..., 1/i, -1, 0, ..., 0)
    with i leading entries 1/i. Columns are orthonormal and sum to 0.
    """
    d = int(d)
    if d < 2:
        raise ValidationError(f"basis needs d >= 2, got d={d}")
    V = np.zeros((d, d - 1))
    for i in range(1, d):
        c = np.sqrt(i / (i + 1.0))
        V[:i, i - 1] = c / i
        V[i, i - 1] = -c
    return V


def check_basis(V, tol=1e-12):
    """Validate orthonormal columns that each sum to zero."""
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != V.shape[1] + 1:
        raise ShapeError(f"basis must be d x (d-1), got {V.shape}")
    gram_err = np.abs(V.T @ V - np.eye(V.shape[1])).max()
    sum_err = np.abs(V.sum(axis=0)).max()
    if gram_err > tol or sum_err > tol:
        raise ValidationError(
            f"basis fails orthonormality ({gram_err:.2e}) or zero-sum ({sum_err:.2e})"
        )
    return V


def to_coordinates(w, V):
    """Coordinates of w against the basis: V^T clr(w). Rows map to rows."""
    rows, single = check_simplex(w)
    V = np.asarray(V, dtype=np.float64)
    if V.shape[0] != rows.shape[1]:
        raise ShapeError(
            f"basis has {V.shape[0]} rows but points have {rows.shape[1]} components"
        )
    out = clr(rows) @ V
    return out[0] if single else out


def from_coordinates(c, V):
    """Simplex point with the given coordinates: softmax(V c). Rows map to rows."""
    rows, single = _as_rows(c, "coordinate vector")
    V = np.asarray(V, dtype=np.float64)
    if V.shape[1] != rows.shape[1]:
        raise ShapeError(
            f"basis has {V.shape[1]} columns but coordinates have {rows.shape[1]} entries"
        )
    out = clr_inv(rows @ V.T)
    return out[0] if single else out


def add(v, w):
    """Perturbation: componentwise product renormalized to the simplex."""
    rv, sv = check_simplex(v)
    rw, sw = check_simplex(w)
    if rv.shape != rw.shape:
        raise ShapeError(f"operand shapes differ: {rv.shape} vs {rw.shape}")
    prod = rv * rw
    out = prod / prod.sum(axis=1, keepdims=True)
    return out[0] if (sv and sw) else out


def scale(alpha, v):
    """Powering: componentwise power renormalized to the simplex."""
    rv, single = check_simplex(v)
    p = rv ** float(alpha)
    out = p / p.sum(axis=1, keepdims=True)
    return out[0] if single else out


def inner(v, w):
    """Aitchison inner product: the Euclidean inner product of the clr images."""
    cv = np.atleast_2d(clr(v))
    cw = np.atleast_2d(clr(w))
    if cv.shape != cw.shape:
        raise ShapeError(f"operand shapes differ: {cv.shape} vs {cw.shape}")
    out = (cv * cw).sum(axis=1)
    return out[0] if out.shape == (1,) else out
