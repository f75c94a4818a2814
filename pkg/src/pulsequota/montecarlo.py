"""Seeded ensembles: closure-length statistics checked against the GBM bounds.

Closure lengths are pooled across paths and across successive closures of a
path; every closure after a reset starts from ``k_minus`` with fresh
increments, so they share one distribution.  A first closure started from
``n0 != k_minus`` is left out.  Censored closures never enter the mean.

Pooling every closure up to a fixed horizon under-weights long closures
(the one straddling ``t_max`` is dropped), which biases the mean low by
roughly ``E[residual] / t_max``.  Set ``SimConfig.max_closures`` with a
generous ``t_max`` for unbiased estimates.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analytics import closure_expectation_bounds
from .exceptions import HypothesisError, ModelError
from .rates import (ConstantRate, GeneralizedLogistic, GrowthLaw, NoiseSpec, Policy,
                    check_h1, check_h2, rate_bounds)
from .sde import PathRun, SimConfig, _check_path_inputs, run_path

logger = logging.getLogger(__name__)

Z95 = 1.959963984540054


@dataclass(frozen=True)
class EnsembleSummary:
    paths: int
    closures_observed: int
    censored: int
    mean_length: Optional[float]
    std_error: Optional[float]
    ci95: Optional[Tuple[float, float]]
    bound_lo: Optional[float]
    bound_hi: Optional[float]  # None: no finite upper bound
    lo_satisfied: Optional[bool]
    hi_satisfied: Optional[bool]  # None: not applicable
    envelope_violation_rate: float
    envelope_steps: int
    clamp_activations: int
    yield_rate: Optional[float]
    per_path_mean: Optional[float] = None
    h2_holds: bool = True
    inconclusive: bool = False

    @property
    def bounds_ok(self) -> bool:
        return self.lo_satisfied is not False and self.hi_satisfied is not False

    def as_dict(self) -> Dict:
        d = asdict(self)
        d["ci95"] = list(self.ci95) if self.ci95 is not None else None
        return d


@dataclass(frozen=True)
class Scenario:
    """Everything a single ensemble run needs; the unit a sweep varies."""

    law: GrowthLaw
    policy: Policy
    noise: NoiseSpec
    sim: SimConfig
    paths: int = 1000
    n0: Optional[float] = None  # None: start at k_minus

    def start(self) -> float:
        return self.policy.k_minus if self.n0 is None else self.n0


def _map_paths(fn, count: int, workers: Optional[int]) -> List:
    workers = (os.cpu_count() or 1) if workers is None else max(1, int(workers))
    if workers == 1 or count == 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map preserves path order regardless of completion order
        return list(pool.map(fn, range(count)))


def _pooled_stats(lengths: Sequence[float]):
    n = len(lengths)
    mean = math.fsum(lengths) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in lengths) / (n - 1)
    return mean, math.sqrt(var / n)


def run_ensemble(law: GrowthLaw, policy: Policy, noise: NoiseSpec, config: SimConfig,
                 n0: Optional[float] = None, paths: int = 1000, *,
                 workers: Optional[int] = None, stream_offset: int = 0,
                 bounds_override: Optional[Tuple[float, Optional[float]]] = None
                 ) -> EnsembleSummary:
    """Simulate ``paths`` harvested paths and summarise closure lengths.

    The expected-closure bounds are checked at two standard errors:
    ``bound_lo <= mean + 2 se`` and ``mean - 2 se <= bound_hi`` (the latter
    only when the upper bound is finite).  ``bounds_override`` replaces the
    computed ``(lo, hi)`` pair.
    """
    if paths < 1:
        raise ModelError(f"paths must be >= 1, got {paths}")
    n0 = policy.k_minus if n0 is None else n0
    _check_path_inputs(law, policy, n0)
    if not isinstance(law, ConstantRate) and not check_h1(law).holds:
        raise HypothesisError("growth law fails H1")
    h2 = check_h2(law, noise, policy)
    if not h2.holds:
        logger.warning("H2 fails for sigma=%s; closure expectations may be infinite",
                       noise.sigma)
    rb = rate_bounds(law, policy.k_plus)
    if bounds_override is not None:
        bound_lo, bound_hi = bounds_override
    else:
        try:
            bound_lo, hi = closure_expectation_bounds(rb, noise, policy)
            bound_hi = hi.value
        except HypothesisError:
            bound_lo = bound_hi = None

    def one(i: int) -> PathRun:
        return run_path(law, policy, noise, config, n0, i, stream_offset=stream_offset,
                        envelope=(rb.alpha, rb.beta))

    runs = _map_paths(one, paths, workers)
    return _summarise(runs, policy, bound_lo, bound_hi, h2.holds)


def _summarise(runs: List[PathRun], policy: Policy, bound_lo, bound_hi,
               h2_holds: bool) -> EnsembleSummary:
    lengths: List[float] = []
    path_means: List[float] = []
    censored = 0
    clamps = env_steps = env_viol = 0
    for run in runs:  # fixed path order
        used = [rec.length for rec in run.closures() if not rec.censored and rec.from_reset]
        censored += int(run.censored_length is not None)
        lengths.extend(used)
        if used:
            path_means.append(math.fsum(used) / len(used))
        clamps += run.clamps
        env_steps += run.env_steps
        env_viol += run.env_violations
    env_rate = env_viol / env_steps if env_steps else 0.0
    common = dict(paths=len(runs), closures_observed=len(lengths), censored=censored,
                  bound_lo=bound_lo, bound_hi=bound_hi, envelope_violation_rate=env_rate,
                  envelope_steps=env_steps, clamp_activations=clamps, h2_holds=h2_holds)
    if not lengths:
        return EnsembleSummary(mean_length=None, std_error=None, ci95=None,
                               lo_satisfied=None, hi_satisfied=None, yield_rate=None,
                               inconclusive=True, **common)
    mean, se = _pooled_stats(lengths)
    lo_ok = None if bound_lo is None else bound_lo <= mean + 2.0 * se
    hi_ok = None if bound_hi is None else mean - 2.0 * se <= bound_hi
    return EnsembleSummary(
        mean_length=mean, std_error=se, ci95=(mean - Z95 * se, mean + Z95 * se),
        lo_satisfied=lo_ok, hi_satisfied=hi_ok, yield_rate=policy.q / mean,
        per_path_mean=math.fsum(path_means) / len(path_means), **common)


def long_run_average_no_harvest(law: GeneralizedLogistic, noise: NoiseSpec,
                                config: SimConfig, n0: float,
                                burn_in_fraction: float = 0.1) -> Tuple[float, float]:
    """Time average of one unharvested logistic path over ``[burn_in, t_max]``.

    Returns ``(average, K (1 - sigma^2 / (2 r0)))``.
    """
    if not (isinstance(law, GeneralizedLogistic) and law.is_plain_logistic):
        raise ModelError("long-run average target is only known for the plain logistic law")
    if not law.r0 > noise.half_variance:
        raise HypothesisError(
            f"r0={law.r0} <= sigma^2/2={noise.half_variance}: the population dies out")
    if not 0 <= burn_in_fraction < 1:
        raise ModelError(f"burn_in_fraction must lie in [0, 1), got {burn_in_fraction}")
    if not n0 > 0:
        raise ModelError(f"n0 must be positive, got {n0}")
    burn_in = burn_in_fraction * config.t_max
    # align the averaging window with the step grid
    start = math.ceil(burn_in / config.dt - 1e-9) * config.dt
    run = run_path(law, None, noise, config, n0, 0, avg_from=start - 1e-9 * config.dt)
    average = run.integral / (run.final_t - start)
    target = law.K * (1.0 - noise.half_variance / law.r0)
    return average, target


def abundance_at(law: GrowthLaw, policy: Policy, noise: NoiseSpec, config: SimConfig,
                 t: float, paths: int, n0: Optional[float] = None, *,
                 workers: Optional[int] = None) -> np.ndarray:
    """Harvested abundance at time ``t`` (on the step grid) across ``paths`` paths."""
    n0 = policy.k_minus if n0 is None else n0
    _check_path_inputs(law, policy, n0)
    cfg = replace(config, t_max=t, max_closures=None)
    runs = _map_paths(lambda i: run_path(law, policy, noise, cfg, n0, i), paths, workers)
    return np.array([run.final_n for run in runs])


SWEEP_AXES = ("sigma", "q", "k_plus", "dt", "paths")


def _vary(base: Scenario, axis: str, value) -> Scenario:
    if axis == "sigma":
        return replace(base, noise=NoiseSpec(float(value)))
    if axis == "q":
        return replace(base, policy=Policy(base.policy.k_plus, float(value)))
    if axis == "k_plus":
        return replace(base, policy=Policy(float(value), base.policy.q))
    if axis == "dt":
        return replace(base, sim=replace(base.sim, dt=float(value)))
    if axis == "paths":
        if int(value) != value or value < 1:
            raise ModelError(f"paths must be a positive integer, got {value}")
        return replace(base, paths=int(value))
    raise ModelError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


def sweep(base: Scenario, axis: str, values: Sequence, *, paired: bool = False,
          workers: Optional[int] = None) -> List[EnsembleSummary]:
    """One ensemble per value of ``axis``.

    Value ``i`` draws from stream offset ``i``, so the first entry reproduces
    the base run and the rest are independent.  ``paired=True`` uses offset 0
    throughout (common random numbers, e.g. for ``dt`` convergence studies
    with ``SimConfig.base_dt`` set).
    """
    if axis not in SWEEP_AXES:
        raise ModelError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    scenarios = [_vary(base, axis, v) for v in values]  # validate everything first
    out = []
    for i, sc in enumerate(scenarios):
        n0 = sc.start()
        if base.n0 is not None and axis in ("q", "k_plus"):
            n0 = min(base.n0, sc.policy.k_plus)
        out.append(run_ensemble(sc.law, sc.policy, sc.noise, sc.sim, n0, sc.paths,
                                workers=workers, stream_offset=0 if paired else i))
    return out
