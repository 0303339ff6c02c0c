"""Rank standardization, GPD likelihood and MLE, order-statistic back-transform."""

import numpy as np
import pytest

from tailgan.errors import ShapeError, ValidationError
from tailgan.margins import (
    GpdFitSet,
    back_transform,
    back_transform_column,
    fit_margins,
    gpd_fit,
    gpd_log_density,
    gpd_quantile,
    pareto_standardize,
)


def gpd_sample(rng, n, sigma, xi):
    """Inverse-cdf draws: sigma * ((1-p)^(-xi) - 1)/xi."""
    p = rng.random(n)
    if xi == 0.0:
        return -sigma * np.log1p(-p)
    return sigma * ((1.0 - p) ** (-xi) - 1.0) / xi


# ---------------------------------------------------------------------------
# pareto_standardize
# ---------------------------------------------------------------------------


def test_standardize_hand_column():
    X = np.array([[3.0], [1.0], [4.0], [2.0]])
    V = pareto_standardize(X)
    assert np.allclose(V[:, 0], [2.5, 1.25, 5.0, 5.0 / 3.0], atol=1e-14)


def test_standardize_extremes_map_to_bounds():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(37, 3))
    V = pareto_standardize(X)
    n = 37
    for j in range(3):
        assert V[np.argmax(X[:, j]), j] == pytest.approx(n + 1.0)
        assert V[np.argmin(X[:, j]), j] == pytest.approx((n + 1.0) / n)
    assert (V >= (n + 1.0) / n).all() and (V <= n + 1.0).all()


def test_standardize_is_rank_permutation_without_ties():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 2))
    V = pareto_standardize(X)
    n = 50
    expected = np.sort((n + 1.0) / (n + 1.0 - np.arange(1, n + 1)))
    for j in range(2):
        assert np.allclose(np.sort(V[:, j]), expected, atol=0)


def test_standardize_ties_break_by_row_index_with_warning():
    X = np.array([[1.0], [1.0], [2.0]])
    with pytest.warns(UserWarning, match="ties"):
        V = pareto_standardize(X)
    assert np.allclose(V[:, 0], [4.0 / 3.0, 2.0, 4.0], atol=1e-14)


def test_standardize_validation():
    with pytest.raises(ValidationError):
        pareto_standardize(np.array([[1.0, 2.0]]))
    with pytest.raises(ShapeError):
        pareto_standardize(np.arange(4.0))
    with pytest.raises(ValidationError):
        pareto_standardize(np.array([[1.0], [np.nan]]))


# ---------------------------------------------------------------------------
# GPD density / quantile
# ---------------------------------------------------------------------------


def test_log_density_hand_value():
    assert gpd_log_density(1.0, 1.0, 1.0) == pytest.approx(-2.0 * np.log(2.0), abs=1e-12)


def test_log_density_support():
    assert gpd_log_density(-0.5, 1.0, 0.5) == -np.inf
    assert gpd_log_density(6.0, 1.0, -0.2) == -np.inf  # beyond sigma/|xi| = 5
    assert np.isfinite(gpd_log_density(4.9, 1.0, -0.2))


def test_log_density_zero_shape_is_exponential():
    y = np.array([0.3, 1.7])
    got = gpd_log_density(y, 2.0, 0.0)
    assert np.allclose(got, -np.log(2.0) - y / 2.0, atol=1e-12)


def test_quantile_forms():
    assert gpd_quantile(0.75, 2.0, 0.0) == pytest.approx(-2.0 * np.log(0.25), abs=1e-12)
    assert gpd_quantile(0.75, 1.0, 0.5) == pytest.approx((0.25**-0.5 - 1.0) / 0.5, abs=1e-12)
    with pytest.raises(ValidationError):
        gpd_quantile(1.0, 1.0, 0.5)


# ---------------------------------------------------------------------------
# gpd_fit
# ---------------------------------------------------------------------------


def test_fit_input_validation():
    with pytest.raises(ValidationError):
        gpd_fit(np.ones(5))
    with pytest.raises(ValidationError):
        gpd_fit(np.ones(20))  # all equal
    with pytest.raises(ValidationError):
        gpd_fit(np.r_[np.ones(10), -1.0])


@pytest.mark.parametrize(
    "sigma,xi,seed",
    [(2.0, 0.0, 101), (1.0, 0.5, 102), (1.0, -0.2, 103)],
)
def test_fit_recovers_parameters(sigma, xi, seed):
    rng = np.random.default_rng(seed)
    y = gpd_sample(rng, 10_000, sigma, xi)
    s_hat, xi_hat = gpd_fit(y)
    assert abs(s_hat - sigma) < 0.1
    assert abs(xi_hat - xi) < 0.05


def test_fit_is_local_optimum_against_random_restarts():
    rng = np.random.default_rng(7)
    y = gpd_sample(rng, 500, 1.5, 0.3)
    s_hat, xi_hat = gpd_fit(y)
    ll_hat = gpd_log_density(y, s_hat, xi_hat).sum()
    ymax = y.max()
    for _ in range(32):
        xi = rng.uniform(-0.95, 5.0)
        lo = -xi * ymax * (1.0 + 1e-9) if xi < 0 else 1e-3 * y.mean()
        hi = max(10.0 * y.mean(), 2.0 * lo + 1.0)
        sigma = rng.uniform(lo, hi) + 1e-12
        assert ll_hat >= gpd_log_density(y, sigma, xi).sum() - 1e-9


# ---------------------------------------------------------------------------
# GpdFitSet / fit_margins
# ---------------------------------------------------------------------------


def make_fits(col, k2, sigma, xi):
    col = np.sort(np.asarray(col, dtype=np.float64))
    n = col.size
    return GpdFitSet(
        thresholds=np.array([col[n - k2 - 1]]),
        sigma=np.array([sigma]),
        xi=np.array([xi]),
        sorted_columns=col[:, None],
        k2=k2,
        n=n,
    )


def test_fitset_invariants_enforced():
    col = np.arange(1.0, 21.0)
    with pytest.raises(ValidationError):
        GpdFitSet(
            thresholds=np.array([99.0]),
            sigma=np.array([1.0]),
            xi=np.array([0.0]),
            sorted_columns=col[:, None],
            k2=5,
            n=20,
        )
    with pytest.raises(ValidationError):
        make_fits(col, 5, -1.0, 0.0)


def test_fit_margins_thresholds_and_shapes():
    rng = np.random.default_rng(11)
    X = rng.pareto(2.0, size=(400, 3)) + 1.0
    fits = fit_margins(X, k2=60)
    assert fits.d == 3 and fits.n == 400 and fits.k2 == 60
    for j in range(3):
        assert fits.thresholds[j] == np.sort(X[:, j])[400 - 60 - 1]
        assert fits.sigma[j] > 0
    with pytest.raises(ValidationError):
        fit_margins(X, k2=0)
    with pytest.raises(ValidationError):
        fit_margins(X, k2=400)


def test_fit_margins_needs_enough_excesses():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(200, 1))
    with pytest.raises(ValidationError, match="excesses"):
        fit_margins(X, k2=5)


# ---------------------------------------------------------------------------
# back_transform
# ---------------------------------------------------------------------------


def test_back_transform_threshold_at_one():
    fits = make_fits(np.arange(1.0, 21.0), 5, 1.0, 0.5)
    assert back_transform(1.0, fits, 0) == fits.thresholds[0] == 15.0


def test_back_transform_gpd_branch_hand_value():
    fits = make_fits(np.arange(1.0, 21.0), 5, 1.0, 0.5)
    assert back_transform(4.0, fits, 0) == pytest.approx(15.0 + 2.0, abs=1e-12)


def test_back_transform_zero_shape_limit():
    fits = make_fits(np.arange(1.0, 21.0), 5, 2.0, 0.0)
    assert back_transform(np.e, fits, 0) == pytest.approx(15.0 + 2.0, abs=1e-12)
    fits_tiny = make_fits(np.arange(1.0, 21.0), 5, 2.0, 1e-12)
    assert back_transform(np.e, fits_tiny, 0) == pytest.approx(15.0 + 2.0, abs=1e-9)


def test_back_transform_order_statistic_branch():
    fits = make_fits(np.arange(1.0, 21.0), 5, 1.0, 0.5)
    # ceil(20 - 5/0.5) = 10 -> 10th order statistic
    assert back_transform(0.5, fits, 0) == 10.0
    # tiny y drives the index to the floor of 1 -> sample minimum
    assert back_transform(1e-12, fits, 0) == 1.0


def test_back_transform_index_clamped_to_n():
    fits = make_fits(np.arange(1.0, 21.0), 5, 1.0, 0.5)
    # y slightly above k2/n would give index n + 1 without the clamp
    y = np.nextafter(1.0, 0.0)
    assert back_transform(y, fits, 0) <= 20.0


def test_back_transform_monotone_and_continuous_at_seam():
    fits = make_fits(np.arange(1.0, 21.0) ** 1.3, 6, 1.7, 0.4)
    grid = np.linspace(0.01, 10.0, 2000)
    vals = back_transform_column(grid, fits, 0)
    assert (np.diff(vals) >= -1e-12).all()
    below = back_transform(1.0, fits, 0)
    above = back_transform(1.0 + 1e-12, fits, 0)
    assert above == pytest.approx(below, abs=1e-9)


def test_back_transform_rejects_nonpositive():
    fits = make_fits(np.arange(1.0, 21.0), 5, 1.0, 0.5)
    with pytest.raises(ValidationError):
        back_transform(0.0, fits, 0)
    with pytest.raises(ValidationError):
        back_transform(-1.0, fits, 0)
