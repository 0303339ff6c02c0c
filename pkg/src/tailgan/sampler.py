"""Tail sampling: generator angles, radial rejection, data-scale transform.

A proposal is a simplex angle drawn from the trained generator paired
with an independent unit-Pareto radius; the scaled point is kept when
some coordinate exceeds 1. Accepted rows are mapped to the original
data scale one margin at a time, order statistics below the threshold
level and the fitted tail quantile above it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .aitchison import from_coordinates
from .angular import AngularSample
from .errors import NumericalError, ShapeError, ValidationError
from .margins import back_transform_column
from .wgan import mlp_apply

PROPOSAL_BATCH = 4096
PROPOSAL_CAP_FACTOR = 10_000


def _check_generator_basis(params_g, V):
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != V.shape[1] + 1:
        raise ShapeError(f"basis must be (d, d-1), got {V.shape}")
    d = V.shape[0]
    out_dim = params_g[-1][0].shape[1]
    if out_dim != d - 1:
        raise ShapeError(
            f"generator emits {out_dim} coordinates but the basis expects {d - 1}"
        )
    return V, d, params_g[0][0].shape[0]


def sample_angles(params_g, V, count, seed):
    """Draw ``count`` simplex angles by pushing latents through the generator.

    Parameters
    ----------
    params_g : tuple of (weights, bias) pairs
        Trained generator layers.
    V : ndarray
        Orthonormal basis of the coordinate space, shape (d, d-1).
    count : int
        Number of angles to draw.
    seed : int
        Seed for the latent stream.

    Returns
    -------
    AngularSample
        ``count`` uniform-weight points on the open L1 simplex.
    """
    V, _, latent_dim = _check_generator_basis(params_g, V)
    count = int(count)
    if count < 1:
        raise ValidationError(f"count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, latent_dim))
    coords = mlp_apply(params_g, z)
    return AngularSample(points=from_coordinates(coords, V))


@dataclass(frozen=True)
class TailSample:
    """Accepted tail rows on the data scale plus sampling diagnostics.

    Every row exceeds at least one marginal threshold; the counts record
    how many coordinates of each margin used the order-statistic branch
    (standardized value <= 1) versus the fitted tail branch (> 1), and
    how many proposals were discarded before the last acceptance.
    """

    rows: np.ndarray
    thresholds: np.ndarray
    order_branch_counts: np.ndarray = field(repr=False)
    gpd_branch_counts: np.ndarray = field(repr=False)
    rejections: int = 0

    def __post_init__(self):
        rows = self.rows
        if rows.ndim != 2 or rows.shape[1] != self.thresholds.shape[0]:
            raise ShapeError(
                f"rows {rows.shape} do not match {self.thresholds.shape[0]} thresholds"
            )
        if not (rows > self.thresholds[None, :]).any(axis=1).all():
            raise ValidationError(
                "every sampled row must exceed at least one marginal threshold"
            )

    @property
    def proposals(self):
        return self.rows.shape[0] + self.rejections


def standardized_to_data(y_std, fits):
    """Map standardized tail points to the data scale margin by margin.

    Returns the transformed rows together with per-margin counts of the
    order-statistic branch (y <= 1) and the fitted tail branch (y > 1).
    """
    y_std = np.asarray(y_std, dtype=np.float64)
    if y_std.ndim != 2:
        raise ShapeError(f"standardized points must be 2-d, got ndim={y_std.ndim}")
    d = fits.d
    if y_std.shape[1] != d:
        raise ShapeError(
            f"standardized points have {y_std.shape[1]} margins, fits have {d}"
        )
    rows = np.empty_like(y_std)
    order_counts = np.empty(d, dtype=np.int64)
    gpd_counts = np.empty(d, dtype=np.int64)
    for j in range(d):
        yj = y_std[:, j]
        rows[:, j] = back_transform_column(yj, fits, j)
        order_counts[j] = int((yj <= 1.0).sum())
        gpd_counts[j] = int((yj > 1.0).sum())
    return rows, order_counts, gpd_counts


def sample_tail(params_g, V, fits, n_star, seed, k1):
    """Draw ``n_star`` tail rows on the data scale via rejection sampling.

    Proposals stream in fixed-size batches: a latent batch feeds the
    generator, an independent uniform batch becomes unit-Pareto radii
    through 1/(1-U), and a scaled point is accepted when some coordinate
    exceeds 1. The loop is sequential in stream order, so a given seed
    yields a reproducible prefix of accepted rows.

    Parameters
    ----------
    params_g : tuple of (weights, bias) pairs
        Trained generator layers.
    V : ndarray
        Orthonormal basis of the coordinate space, shape (d, d-1).
    fits : GpdFitSet
        Marginal thresholds and tail fits; ``fits.k2`` must not exceed
        ``k1``.
    n_star : int
        Number of accepted rows to return.
    seed : int
        Seed for the proposal stream.
    k1 : int
        Number of extreme angles the generator was trained on.

    Returns
    -------
    TailSample

    Raises
    ------
    ValidationError
        If ``fits.k2`` exceeds ``k1`` or ``n_star`` is not positive.
    NumericalError
        If 10000 * n_star proposals fail to produce n_star acceptances.
    """
    V, d, latent_dim = _check_generator_basis(params_g, V)
    if fits.d != d:
        raise ShapeError(f"fits cover {fits.d} margins but the basis expects {d}")
    n_star = int(n_star)
    if n_star < 1:
        raise ValidationError(f"n_star must be positive, got {n_star}")
    k1 = int(k1)
    if k1 < 1:
        raise ValidationError(f"k1 must be positive, got {k1}")
    if fits.k2 > k1:
        raise ValidationError(
            f"threshold exceedance count k2={fits.k2} exceeds the k1={k1} "
            f"extreme angles used in training; refit margins with k2 <= k1"
        )

    rng = np.random.default_rng(seed)
    cap = PROPOSAL_CAP_FACTOR * n_star
    tiny = np.nextafter(0.0, 1.0)
    accepted = []
    n_accepted = 0
    consumed = 0
    rejections = 0
    while n_accepted < n_star:
        if consumed >= cap:
            raise NumericalError(
                f"rejection sampling consumed {consumed} proposals but accepted "
                f"only {n_accepted} of {n_star} rows; the generator's angles "
                f"appear degenerate (acceptance probability below 1e-4)"
            )
        batch = min(PROPOSAL_BATCH, cap - consumed)
        z = rng.standard_normal((batch, latent_dim))
        angles = from_coordinates(mlp_apply(params_g, z), V)
        u = rng.random(batch)
        u = np.where(u == 0.0, tiny, u)
        radii = 1.0 / (1.0 - u)
        points = radii[:, None] * angles
        accept = (points > 1.0).any(axis=1)
        need = n_star - n_accepted
        cum = np.cumsum(accept)
        if cum[-1] >= need:
            last = int(np.searchsorted(cum, need))
            take = points[: last + 1][accept[: last + 1]]
            consumed += last + 1
            rejections += (last + 1) - need
        else:
            take = points[accept]
            consumed += batch
            rejections += batch - int(cum[-1])
        if take.shape[0]:
            accepted.append(take)
            n_accepted += take.shape[0]

    y_std = np.vstack(accepted)
    rows, order_counts, gpd_counts = standardized_to_data(y_std, fits)
    return TailSample(
        rows=rows,
        thresholds=fits.thresholds.copy(),
        order_branch_counts=order_counts,
        gpd_branch_counts=gpd_counts,
        rejections=rejections,
    )
