"""Noise-free pulse model: closure lengths, their bounds, and RK4 trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import integrate

from .exceptions import InfeasibleClosureError, ModelError
from .rates import (ConstantRate, GeneralizedLogistic, GrowthLaw, PiecewiseTable,
                    Policy, RateBounds)

QUAD_RTOL = 1e-10


@dataclass(frozen=True)
class DetTrajectory:
    """Sampled noise-free path.

    ``t``, ``n`` and ``event`` are parallel arrays; a pulse shows up as a row
    at ``k_plus`` with ``event == 1`` followed by a row at ``k_minus`` with
    the same time.  ``events`` lists the pulse times.
    """

    t: np.ndarray
    n: np.ndarray
    event: np.ndarray
    events: Tuple[float, ...]

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(np.asarray(self.events))


def _min_rate_on(law: GrowthLaw, lo: float, hi: float) -> float:
    if isinstance(law, GeneralizedLogistic):
        return law.rate(hi)
    if isinstance(law, ConstantRate):
        return law.r
    if isinstance(law, PiecewiseTable):
        inner = law._y[(law._x > lo) & (law._x < hi)]
        return float(min(law.rate(lo), law.rate(hi), *inner))
    raise TypeError(f"unsupported growth law {type(law).__name__}")


def det_closure_length(law: GrowthLaw, policy: Policy, method: str = "auto") -> float:
    """Time to grow from ``k_minus`` to ``k_plus`` without noise.

    ``method`` is ``"auto"`` (closed form when one exists), ``"closed"`` or
    ``"quad"`` (adaptive quadrature of ``1 / (N r(N))``).
    """
    lo, hi = policy.k_minus, policy.k_plus
    if _min_rate_on(law, lo, hi) <= 0:
        raise InfeasibleClosureError(
            f"r(N) <= 0 somewhere on [{lo}, {hi}]; the closure never ends")
    has_closed = isinstance(law, ConstantRate) or (
        isinstance(law, GeneralizedLogistic) and law.is_plain_logistic)
    if method == "closed" and not has_closed:
        raise ModelError(f"no closed form for {law!r}")
    if method not in ("auto", "closed", "quad"):
        raise ModelError(f"unknown method {method!r}")
    if method != "quad" and has_closed:
        if isinstance(law, ConstantRate):
            return policy.log_ratio / law.r
        K = law.K
        return math.log(hi * (K - lo) / (lo * (K - hi))) / law.r0
    points = None
    if isinstance(law, PiecewiseTable):
        points = [x for x in law.abundance if lo < x < hi] or None
    value, _ = integrate.quad(lambda n: 1.0 / (n * law.rate(n)), lo, hi,
                              epsabs=0.0, epsrel=QUAD_RTOL, limit=500, points=points)
    return float(value)


def det_length_bounds(policy: Policy, bounds: RateBounds) -> Tuple[float, float]:
    """``(ln(K+/K-)/beta, ln(K+/K-)/alpha)``; ``hi`` is ``inf`` when alpha <= 0."""
    if not bounds.beta > 0:
        raise InfeasibleClosureError(f"beta={bounds.beta} <= 0: abundance never grows")
    lo = policy.log_ratio / bounds.beta
    hi = policy.log_ratio / bounds.alpha if bounds.alpha > 0 else math.inf
    return lo, hi


def _scalar_rate(law: GrowthLaw):
    """Plain-float ``r`` for the integrator loop (numpy scalars are slow)."""
    if isinstance(law, ConstantRate):
        r = float(law.r)
        return lambda n: r
    if isinstance(law, GeneralizedLogistic):
        r0, K, mu, nu = law.r0, law.K, law.mu, law.nu
        if law.is_plain_logistic:
            return lambda n: r0 * (1.0 - n / K)

        def rate(n):
            x = 1.0 - (n / K) ** mu
            return r0 * math.copysign(abs(x) ** nu, x)
        return rate
    return law.rate


def _rk4(f, n, h):
    k1 = f(n)
    k2 = f(n + 0.5 * h * k1)
    k3 = f(n + 0.5 * h * k2)
    k4 = f(n + h * k3)
    return n + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def det_trajectory(law: GrowthLaw, policy: Policy, n0: float, dt: float,
                   t_max: float) -> DetTrajectory:
    """Integrate ``N' = r(N) N`` with fixed-step RK4 and pulse resets.

    The step that would cross ``k_plus`` is shortened by bisection until the
    crossing time is pinned to ``dt * 1e-6``; integration restarts from
    ``k_minus`` at that time.
    """
    if not 0 < n0 <= policy.k_plus:
        raise ModelError(f"n0 must lie in (0, k_plus], got {n0}")
    if not dt > 0 or not t_max > 0:
        raise ModelError("dt and t_max must be positive")
    k_plus, k_minus = policy.k_plus, policy.k_minus
    rate = _scalar_rate(law)

    def f(n):
        return rate(n) * n

    ts, ns, es, events = [0.0], [n0], [0], []
    t, n = 0.0, n0
    if n0 >= k_plus:
        ts[-1], es[-1] = 0.0, 1
        ts.append(0.0), ns.append(k_minus), es.append(0)
        events.append(0.0)
        n = k_minus
    anchor, j = t, 0
    tol = dt * 1e-6
    while True:
        t = anchor + j * dt
        if t + dt > t_max + 1e-9 * dt:
            break
        nxt = _rk4(f, n, dt)
        if nxt < k_plus:
            n = nxt
            j += 1
            ts.append(anchor + j * dt), ns.append(n), es.append(0)
            continue
        a, b = 0.0, dt
        while b - a > tol:
            mid = 0.5 * (a + b)
            if _rk4(f, n, mid) >= k_plus:
                b = mid
            else:
                a = mid
        tc = t + b
        events.append(tc)
        ts += [tc, tc]
        ns += [k_plus, k_minus]
        es += [1, 0]
        n, anchor, j = k_minus, tc, 0
    return DetTrajectory(np.array(ts), np.array(ns), np.array(es, dtype=np.int8),
                         tuple(events))
