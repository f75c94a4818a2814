"""Closed-form geometric Brownian motion comparisons.

With ``alpha <= r(N) <= beta`` below ``k_plus``, the harvested abundance is
sandwiched between two GBMs driven by the same Brownian path; their mean
first-passage times to ``k_plus`` bracket the expected closure length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .exceptions import HypothesisError, ModelError
from .rates import NoiseSpec, Policy, RateBounds


@dataclass(frozen=True)
class HittingExpectation:
    """A mean hitting time, or ``value=None`` when no finite bound exists."""

    value: Optional[float]

    @property
    def bounded(self) -> bool:
        return self.value is not None

    def __str__(self):
        return "unbounded" if self.value is None else repr(self.value)


UNBOUNDED = HittingExpectation(None)


@dataclass(frozen=True)
class GBMPath:
    t: np.ndarray
    n: np.ndarray


def gbm_path(gamma: float, noise: NoiseSpec, n0: float, increments, dt: float) -> GBMPath:
    """Exact GBM ``n0 exp((gamma - sigma^2/2) t + sigma B(t))`` on the grid.

    ``B`` is the running sum of ``increments``; the returned arrays include
    the starting point, so they are one longer than ``increments``.
    """
    if not n0 > 0:
        raise ModelError(f"n0 must be positive, got {n0}")
    db = np.asarray(increments, dtype=float)
    b = np.concatenate([[0.0], np.cumsum(db)])
    t = dt * np.arange(b.size)
    drift = gamma - noise.half_variance
    return GBMPath(t, n0 * np.exp(drift * t + noise.sigma * b))


def expected_hitting_time(gamma: float, noise: NoiseSpec, policy: Policy) -> HittingExpectation:
    """Mean time for a GBM with rate ``gamma`` to climb from ``k_minus`` to ``k_plus``."""
    drift = gamma - noise.half_variance
    if drift <= 0:
        return UNBOUNDED
    return HittingExpectation(policy.log_ratio / drift)


def closure_expectation_bounds(bounds: RateBounds, noise: NoiseSpec,
                               policy: Policy) -> Tuple[float, HittingExpectation]:
    """Lower and upper bounds on the expected closure length.

    The upper bound is :data:`UNBOUNDED` when ``alpha <= sigma^2/2``.
    """
    lo = expected_hitting_time(bounds.beta, noise, policy)
    if not lo.bounded:
        raise HypothesisError(
            f"beta={bounds.beta} <= sigma^2/2={noise.half_variance}: no finite lower bound")
    return lo.value, expected_hitting_time(bounds.alpha, noise, policy)


def second_moment_bound(policy: Policy, bounds: RateBounds, k: float,
                        noise: NoiseSpec, t: float) -> float:
    """Gronwall bound ``(k_minus^2 + B k^2 t) exp(sigma^2 t)`` on ``E[N(t)^2]``."""
    if t < 0:
        raise ModelError(f"t must be non-negative, got {t}")
    return (policy.k_minus ** 2 + bounds.b_script * k * k * t) * math.exp(noise.sigma ** 2 * t)
