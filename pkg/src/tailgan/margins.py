"""Marginal machinery: unit-Pareto rank standardization, generalized
Pareto maximum likelihood, and the piecewise tail quantile back-transform.

Standardization uses the empirical cdf with denominator n+1, so the
standardized values stay strictly inside the support and the largest
observation maps to n+1 rather than infinity.

The back-transform has two branches joined at y = 1 (the threshold):
below it, empirical order statistics; above it, the fitted generalized
Pareto tail formula.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import ShapeError, ValidationError

__all__ = [
    "pareto_standardize",
    "gpd_fit",
    "gpd_log_density",
    "gpd_quantile",
    "GpdFitSet",
    "fit_margins",
    "back_transform",
    "back_transform_column",
]

XI_MIN = -0.95
XI_MAX = 5.0
XI_ZERO_TOL = 1e-8  # below this |xi|, the xi -> 0 limit form is used


def pareto_standardize(X):
    """Map each margin to unit-Pareto scale via ranks: 1 / (1 - rank/(n+1)).

    Ties are broken by original row index (stable sort) and reported
    with a warning, since the underlying model assumes continuous
    margins. Every output lies in [(n+1)/n, n+1].
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"data matrix must be 2-d, got ndim={X.ndim}")
    n, d = X.shape
    if n < 2:
        raise ValidationError(f"need at least 2 rows to rank, got n={n}")
    if not np.isfinite(X).all():
        raise ValidationError("data matrix has non-finite entries")

    V = np.empty_like(X)
    tied = []
    for j in range(d):
        col = X[:, j]
        order = np.argsort(col, kind="stable")
        ranks = np.empty(n, dtype=np.int64)
        ranks[order] = np.arange(1, n + 1)
        if np.unique(col).size < n:
            tied.append(j)
        V[:, j] = (n + 1.0) / (n + 1.0 - ranks)
    if tied:
        warnings.warn(
            f"ties in column(s) {tied} broken by row index; "
            "margins are assumed continuous",
            UserWarning,
            stacklevel=2,
        )
    return V


# ---------------------------------------------------------------------------
# Generalized Pareto likelihood
# ---------------------------------------------------------------------------


def gpd_log_density(y, sigma, xi):
    """Pointwise GPD log density; -inf outside the support."""
    y = np.asarray(y, dtype=np.float64)
    if sigma <= 0.0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    if abs(xi) < XI_ZERO_TOL:
        out = -np.log(sigma) - y / sigma
        return np.where(y >= 0.0, out, -np.inf)
    t = xi * y / sigma
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.log(sigma) - (1.0 + 1.0 / xi) * np.log1p(t)
    return np.where((y >= 0.0) & (t > -1.0), out, -np.inf)


def gpd_quantile(p, sigma, xi):
    """Inverse cdf: sigma * ((1-p)^(-xi) - 1) / xi, with the xi -> 0 limit."""
    p = np.asarray(p, dtype=np.float64)
    if ((p < 0.0) | (p >= 1.0)).any():
        raise ValidationError("quantile levels must lie in [0, 1)")
    if abs(xi) < XI_ZERO_TOL:
        return -sigma * np.log1p(-p)
    return sigma * ((1.0 - p) ** (-xi) - 1.0) / xi


def _nll(s, xi, y):
    """Negative log likelihood at sigma = exp(s); +inf outside the support."""
    n = y.size
    if not (XI_MIN <= xi <= XI_MAX) or not np.isfinite(s):
        return np.inf
    sigma = np.exp(s)
    if abs(xi) < XI_ZERO_TOL:
        return n * s + y.sum() / sigma
    t = xi * y / sigma
    if t.min() <= -1.0:
        return np.inf
    return n * s + (1.0 + 1.0 / xi) * np.log1p(t).sum()


def gpd_fit(excesses):
    """Maximum-likelihood (sigma, xi) for positive threshold excesses.

    The likelihood is profiled over a shape grid on [-0.95, 5] (scale
    optimized per grid point on the log scale), then polished with
    Nelder-Mead in (log sigma, xi). The shape stays clamped to the grid
    interval throughout, which avoids the degenerate boundary solutions
    at xi -> -1.
    """
    y = np.asarray(excesses, dtype=np.float64).ravel()
    if y.size < 10:
        raise ValidationError(f"need at least 10 positive excesses, got {y.size}")
    if (y <= 0.0).any() or not np.isfinite(y).all():
        raise ValidationError("excesses must be positive finite reals")
    if y.max() == y.min():
        raise ValidationError("all excesses equal: degenerate likelihood")

    ymax = y.max()
    ymean = y.mean()

    def profile_sigma(xi):
        # Feasible scales: sigma > -xi*ymax when xi < 0, any positive otherwise.
        lo = np.log(-xi * ymax) + 1e-9 if xi < 0.0 else np.log(ymean) - 12.0
        hi = max(np.log(ymean) + 12.0, lo + 1.0)
        res = optimize.minimize_scalar(
            lambda s: _nll(s, xi, y), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-10},
        )
        return res.x, res.fun

    grid = np.concatenate(
        [np.linspace(XI_MIN, 1.0, 40), np.linspace(1.1, XI_MAX, 14)]
    )
    best = (np.inf, None, None)
    for xi in grid:
        s, f = profile_sigma(xi)
        if f < best[0]:
            best = (f, s, xi)

    res = optimize.minimize(
        lambda p: _nll(p[0], p[1], y),
        x0=np.array([best[1], best[2]]),
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000},
    )
    s_hat, xi_hat = (res.x if res.fun <= best[0] else (best[1], best[2]))
    xi_hat = float(np.clip(xi_hat, XI_MIN, XI_MAX))
    return float(np.exp(s_hat)), xi_hat


# ---------------------------------------------------------------------------
# Per-margin fit set and back-transform
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GpdFitSet:
    """Per-margin thresholds, GPD parameters, and sorted order statistics."""

    thresholds: np.ndarray  # (d,) u_j = the (n-k2)-th ascending order statistic
    sigma: np.ndarray  # (d,) fitted scales, all positive
    xi: np.ndarray  # (d,) fitted shapes
    sorted_columns: np.ndarray  # (n, d) each column ascending
    k2: int
    n: int

    def __post_init__(self):
        if (self.sigma <= 0.0).any():
            raise ValidationError("fitted scales must be positive")
        if (np.diff(self.sorted_columns, axis=0) < 0.0).any():
            raise ValidationError("sorted_columns must be nondecreasing")
        if self.sorted_columns.shape[0] != self.n:
            raise ShapeError("sorted_columns row count must equal n")
        expect = self.sorted_columns[self.n - self.k2 - 1, :]
        if not np.array_equal(self.thresholds, expect):
            raise ValidationError("thresholds must equal the (n-k2)-th order statistics")

    @property
    def d(self):
        return self.sorted_columns.shape[1]


def fit_margins(X, k2):
    """Fit every margin's GPD to the k2 largest excesses over u_j.

    u_j is the (n-k2)-th ascending order statistic of column j; excesses
    are the k2 top order statistics minus u_j, dropping zeros from ties.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"data matrix must be 2-d, got ndim={X.ndim}")
    n, d = X.shape
    k2 = int(k2)
    if not 1 <= k2 <= n - 1:
        raise ValidationError(f"k2 must be in [1, n-1], got k2={k2} for n={n}")

    sorted_columns = np.sort(X, axis=0)
    thresholds = sorted_columns[n - k2 - 1, :].copy()
    sigma = np.empty(d)
    xi = np.empty(d)
    for j in range(d):
        exc = sorted_columns[n - k2 :, j] - thresholds[j]
        exc = exc[exc > 0.0]
        if exc.size < 10:
            raise ValidationError(
                f"margin {j}: only {exc.size} positive excesses above the "
                f"threshold; increase k2 or provide more data"
            )
        sigma[j], xi[j] = gpd_fit(exc)
    return GpdFitSet(
        thresholds=thresholds,
        sigma=sigma,
        xi=xi,
        sorted_columns=sorted_columns,
        k2=k2,
        n=n,
    )


def back_transform_column(y, fits, j):
    """Tail quantile values for margin j at the standardized levels ``y``.

    y <= 1: the ceil(n - k2/y)-th ascending order statistic (floored at
    the sample minimum, capped at the maximum for index overflows).
    y > 1: u_j + sigma_j * (y^xi_j - 1)/xi_j, with the log limit when
    |xi_j| < 1e-8. Monotone nondecreasing over (0, inf).
    """
    y = np.asarray(y, dtype=np.float64)
    if (y <= 0.0).any():
        raise ValidationError("back_transform requires y > 0")
    n, k2 = fits.n, fits.k2
    col = fits.sorted_columns[:, j]
    u = fits.thresholds[j]
    sigma = fits.sigma[j]
    xi = fits.xi[j]

    out = np.empty_like(y)
    low = y <= 1.0
    if low.any():
        with np.errstate(over="ignore"):
            raw = np.ceil(n - k2 / y[low])
        idx = np.clip(raw, 1, n).astype(np.int64)
        out[low] = col[idx - 1]
    high = ~low
    if high.any():
        yh = y[high]
        if abs(xi) < XI_ZERO_TOL:
            out[high] = u + sigma * np.log(yh)
        else:
            out[high] = u + sigma * (yh**xi - 1.0) / xi
    return out


def back_transform(y, fits, j):
    """Scalar form of back_transform_column."""
    return float(back_transform_column(np.array([y], dtype=np.float64), fits, j)[0])
