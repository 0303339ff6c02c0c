"""Seeded synthetic benchmark data.

Rows follow a Gumbel (logistic) copula with dependence parameter
theta >= 1 and Pareto(alpha) margins on [1, inf). The copula is sampled
by the frailty construction: one positive-stable variate S per row
(stability index 1/theta, Laplace transform exp(-t^(1/theta))), iid
standard exponentials E_j per coordinate, and U_j = exp(-(E_j/S)^(1/theta)).
theta = 1 degenerates to S = 1, giving independent coordinates.

The implied extremal coefficient of any index subset J is |J|^(1/theta),
exposed here as the ground truth for dependence-score oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

_E_FLOOR = 1e-300  # exponential draws of exactly 0.0 would divide out


@dataclass(frozen=True)
class LogisticConfig:
    """Sampling recipe: dimension, Gumbel theta, Pareto alpha, rows, seed."""

    d: int
    theta: float
    alpha: float
    n: int
    seed: int

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise ValidationError(f"d must be a positive integer, got {self.d!r}")
        if not np.isfinite(self.theta) or self.theta < 1.0:
            raise ValidationError(f"theta must be >= 1, got {self.theta!r}")
        if not np.isfinite(self.alpha) or self.alpha <= 0.0:
            raise ValidationError(f"alpha must be > 0, got {self.alpha!r}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n!r}")


def positive_stable(index, rng, size):
    """Positive-stable variates with Laplace transform exp(-t**index).

    index must lie in (0, 1]; index = 1 returns the degenerate unit
    mass. Uses the classic sine-ratio construction from a uniform angle
    on (0, pi) and a unit exponential.
    """
    if not 0.0 < index <= 1.0:
        raise ValidationError(f"stability index must be in (0, 1], got {index!r}")
    if index == 1.0:
        return np.ones(size)
    angle = rng.uniform(0.0, np.pi, size)
    w = np.maximum(rng.exponential(1.0, size), _E_FLOOR)
    ratio = (1.0 - index) / index
    return (np.sin(index * angle) / np.sin(angle) ** (1.0 / index)) * (
        np.sin((1.0 - index) * angle) / w
    ) ** ratio


def sample_logistic(cfg):
    """n x d matrix: Gumbel(theta) copula with Pareto(alpha) margins."""
    if not isinstance(cfg, LogisticConfig):
        raise ValidationError("sample_logistic expects a LogisticConfig")
    rng = np.random.default_rng(cfg.seed)
    if cfg.theta == 1.0:
        s = np.ones(cfg.n)
    else:
        s = positive_stable(1.0 / cfg.theta, rng, cfg.n)
    e = np.maximum(rng.exponential(1.0, (cfg.n, cfg.d)), _E_FLOOR)
    g = (e / s[:, None]) ** (1.0 / cfg.theta)
    # survival 1 - U computed as -expm1(-g) to keep precision near U = 1
    survival = -np.expm1(-g)
    return survival ** (-1.0 / cfg.alpha)


def true_extremal_coefficient(theta, J_size):
    """Ground-truth extremal coefficient |J|^(1/theta) of the logistic model."""
    if not np.isfinite(theta) or theta < 1.0:
        raise ValidationError(f"theta must be >= 1, got {theta!r}")
    if not isinstance(J_size, (int, np.integer)) or J_size < 2:
        raise ValidationError(f"subset size must be an integer >= 2, got {J_size!r}")
    return float(J_size) ** (1.0 / float(theta))
