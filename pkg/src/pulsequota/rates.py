"""Per-capita growth laws, their extrema, and the H1/H2 hypothesis checks.

Three law families are supported:

* :class:`GeneralizedLogistic`: ``r0 * (1 - (N/K)**mu)**nu``
* :class:`ConstantRate`: the Malthusian case ``r(N) = r``
* :class:`PiecewiseTable`: linear interpolation between tabulated points

All types are frozen dataclasses; every function here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import _kernel
from .exceptions import HypothesisError, ModelError

DEFAULT_RESOLUTION = 4096


@dataclass(frozen=True)
class GeneralizedLogistic:
    r0: float
    K: float
    mu: float = 1.0
    nu: float = 1.0

    def __post_init__(self):
        if not self.r0 > 0:
            raise ModelError(f"r0 must be positive, got {self.r0}")
        if not self.K > 0:
            raise ModelError(f"K must be positive, got {self.K}")
        if not (self.mu >= 1 and self.nu >= 1):
            raise ModelError(f"exponents must be >= 1, got mu={self.mu}, nu={self.nu}")

    @property
    def is_plain_logistic(self) -> bool:
        return self.mu == 1 and self.nu == 1

    def rate(self, n):
        x = 1.0 - (np.asarray(n, dtype=float) / self.K) ** self.mu
        out = self.r0 * np.sign(x) * np.abs(x) ** self.nu
        return float(out) if np.ndim(out) == 0 else out

    def kernel_args(self):
        """``(kind, params, table_x, table_y)`` for the compiled stepper."""
        params = (float(self.r0), float(self.K), float(self.mu), float(self.nu))
        kind = _kernel.LAW_PLAIN_LOGISTIC if self.is_plain_logistic else _kernel.LAW_LOGISTIC
        return kind, params, _EMPTY, _EMPTY


@dataclass(frozen=True)
class ConstantRate:
    r: float

    def __post_init__(self):
        if not math.isfinite(self.r):
            raise ModelError(f"rate must be finite, got {self.r}")

    def rate(self, n):
        if np.ndim(n) == 0:
            return float(self.r)
        return np.full(np.shape(n), float(self.r))

    def kernel_args(self):
        return _kernel.LAW_CONSTANT, (float(self.r),), _EMPTY, _EMPTY


@dataclass(frozen=True)
class PiecewiseTable:
    """Rates tabulated at strictly increasing abundances, linearly interpolated.

    Evaluation outside ``[abundance[0], abundance[-1]]`` raises.
    """

    abundance: tuple
    rates: tuple
    _x: np.ndarray = field(init=False, repr=False, compare=False)
    _y: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x = np.asarray(self.abundance, dtype=float)
        y = np.asarray(self.rates, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ModelError("table needs at least two (abundance, rate) pairs")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ModelError("table entries must be finite")
        if np.any(np.diff(x) <= 0):
            raise ModelError("table abundances must be strictly increasing")
        if x[0] < 0:
            raise ModelError("table abundances must be non-negative")
        object.__setattr__(self, "abundance", tuple(float(v) for v in x))
        object.__setattr__(self, "rates", tuple(float(v) for v in y))
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "_x", x)
        object.__setattr__(self, "_y", y)

    @classmethod
    def from_pairs(cls, pairs):
        xs, ys = zip(*pairs)
        return cls(tuple(xs), tuple(ys))

    @property
    def support(self):
        return self._x[0], self._x[-1]

    def covers(self, lo, hi) -> bool:
        return self._x[0] <= lo and hi <= self._x[-1]

    def rate(self, n):
        arr = np.asarray(n, dtype=float)
        if np.any(arr < self._x[0]) or np.any(arr > self._x[-1]):
            raise ModelError(
                f"abundance outside table range [{self._x[0]}, {self._x[-1]}]")
        out = np.interp(arr, self._x, self._y)
        return float(out) if np.ndim(out) == 0 else out

    def kernel_args(self):
        return _kernel.LAW_TABLE, (0.0,), self._x, self._y


_EMPTY = np.zeros(0)
_EMPTY.setflags(write=False)

GrowthLaw = Union[GeneralizedLogistic, ConstantRate, PiecewiseTable]


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0

    def __post_init__(self):
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ModelError(f"sigma must be a finite non-negative number, got {self.sigma}")

    @property
    def half_variance(self) -> float:
        """The noise threshold sigma**2 / 2."""
        return 0.5 * self.sigma * self.sigma


@dataclass(frozen=True)
class Policy:
    """Harvest threshold ``k_plus`` and quota ``q``; ``k_minus = k_plus - q``."""

    k_plus: float
    q: float
    k_minus: float = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.k_plus) and math.isfinite(self.q)):
            raise ModelError("policy levels must be finite")
        if not 0 < self.q < self.k_plus:
            raise ModelError(f"need 0 < q < k_plus, got q={self.q}, k_plus={self.k_plus}")
        object.__setattr__(self, "k_minus", self.k_plus - self.q)

    @property
    def log_ratio(self) -> float:
        return math.log(self.k_plus / self.k_minus)

    def check_against(self, law: GrowthLaw) -> None:
        """Raise unless the threshold sits below the law's carrying capacity."""
        report = check_h1(law)
        if report.holds and not self.k_plus < report.k:
            raise ModelError(
                f"k_plus={self.k_plus} must lie below the carrying capacity K={report.k}")
        if isinstance(law, PiecewiseTable) and not law.covers(0.0, self.k_plus):
            raise ModelError(f"table must cover [0, k_plus={self.k_plus}]")


@dataclass(frozen=True)
class RateBounds:
    alpha: float
    beta: float
    b_script: float


@dataclass(frozen=True)
class H1Report:
    holds: bool
    k: Optional[float] = None


@dataclass(frozen=True)
class H2Report:
    holds: bool
    k0_max: Optional[float] = None
    threshold: float = 0.0


def eval_rate(law: GrowthLaw, n: float) -> float:
    """Per-capita growth rate ``r(n)``."""
    if not n >= 0:
        raise ModelError(f"abundance must be non-negative, got {n}")
    return float(law.rate(float(n)))


def _table_extrema(law: PiecewiseTable, lo: float, hi: float):
    # piecewise linear: extrema sit on the knots or the interval ends
    inner = law._y[(law._x > lo) & (law._x < hi)]
    vals = np.concatenate([[law.rate(lo), law.rate(hi)], inner])
    return float(vals.min()), float(vals.max())


def rate_bounds(law: GrowthLaw, k_plus: float,
                resolution: int = DEFAULT_RESOLUTION) -> RateBounds:
    """Infimum/supremum of ``r`` over ``[0, k_plus]`` and supremum over ``(0, K)``."""
    if resolution < 2:
        raise ModelError(f"resolution must be >= 2, got {resolution}")
    if not k_plus > 0:
        raise ModelError(f"k_plus must be positive, got {k_plus}")
    if isinstance(law, ConstantRate):
        return RateBounds(law.r, law.r, law.r)
    if isinstance(law, GeneralizedLogistic):
        # decreasing on [0, inf) for mu, nu >= 1
        return RateBounds(law.rate(k_plus), law.r0, law.r0)
    if isinstance(law, PiecewiseTable):
        if not law.covers(0.0, k_plus):
            raise ModelError(f"table must cover [0, k_plus={k_plus}]")
        alpha, beta = _table_extrema(law, 0.0, k_plus)
        h1 = check_h1(law, resolution)
        top = h1.k if h1.holds else law.support[1]
        _, b_script = _table_extrema(law, law.support[0], top)
        return RateBounds(alpha, beta, max(b_script, beta))
    raise TypeError(f"unsupported growth law {type(law).__name__}")


def check_h1(law: GrowthLaw, resolution: int = DEFAULT_RESOLUTION) -> H1Report:
    """Locate the unique sign change of ``r`` (the carrying capacity), if any."""
    if resolution < 2:
        raise ModelError(f"resolution must be >= 2, got {resolution}")
    if isinstance(law, GeneralizedLogistic):
        return H1Report(True, law.K)
    if isinstance(law, ConstantRate):
        return H1Report(False)
    if isinstance(law, PiecewiseTable):
        return _table_h1(law)
    raise TypeError(f"unsupported growth law {type(law).__name__}")


def _table_h1(law: PiecewiseTable) -> H1Report:
    x, y = law._x, law._y
    if y[0] <= 0:
        return H1Report(False)
    nonpos = np.nonzero(y <= 0)[0]
    if nonpos.size == 0:
        return H1Report(False)
    i = nonpos[0]
    if y[i] == 0:
        k = float(x[i])
        rest = y[i + 1:]
    else:
        # zero of the segment (x[i-1], x[i])
        k = float(x[i - 1] + (x[i] - x[i - 1]) * y[i - 1] / (y[i - 1] - y[i]))
        rest = y[i:]
    if np.any(rest >= 0):
        return H1Report(False)
    return H1Report(True, k)


def check_h2(law: GrowthLaw, noise: NoiseSpec, policy: Policy,
             resolution: int = DEFAULT_RESOLUTION) -> H2Report:
    """Noise-compensation condition: some ``K0`` in ``(k_minus, k_plus)``
    with ``inf r([0, K0]) > sigma**2 / 2``.

    ``k0_max`` is the supremum of admissible ``K0``, capped at ``k_plus``.
    """
    thr = noise.half_variance
    if isinstance(law, ConstantRate):
        if law.r > thr:
            return H2Report(True, policy.k_plus, thr)
        return H2Report(False, None, thr)
    if not check_h1(law, resolution).holds:
        raise HypothesisError("H2 is only defined for laws satisfying H1")
    if isinstance(law, GeneralizedLogistic):
        if law.r0 <= thr:
            return H2Report(False, None, thr)
        root = law.K * (1.0 - (thr / law.r0) ** (1.0 / law.nu)) ** (1.0 / law.mu)
        return _h2_verdict(root, policy, thr)
    if isinstance(law, PiecewiseTable):
        if not law.covers(0.0, policy.k_plus):
            raise ModelError(f"table must cover [0, k_plus={policy.k_plus}]")
        return _h2_verdict(_table_first_drop(law, thr, policy.k_plus), policy, thr)
    raise TypeError(f"unsupported growth law {type(law).__name__}")


def _h2_verdict(root, policy: Policy, thr: float) -> H2Report:
    if root is None or not root > policy.k_minus:
        return H2Report(False, None, thr)
    return H2Report(True, min(root, policy.k_plus), thr)


def _table_first_drop(law: PiecewiseTable, thr: float, upto: float):
    """First abundance in [0, upto] where the interpolated rate reaches thr.

    The running minimum of r is non-increasing, so this is the supremum of
    K0 with min r([0, K0]) > thr.  Returns ``upto``'s successor (inf) when
    never reached, ``None`` when r(0) <= thr.
    """
    x, y = law._x, law._y
    if law.rate(0.0) <= thr:
        return None
    prev_x, prev_y = 0.0, law.rate(0.0)
    for xi, yi in zip(x, y):
        if xi <= 0.0:
            continue
        if yi <= thr:
            return prev_x + (xi - prev_x) * (prev_y - thr) / (prev_y - yi)
        if xi >= upto:
            break
        prev_x, prev_y = xi, yi
    return math.inf
