"""Pulse-quota fishery model: noise-free and stochastic closure lengths.

The abundance follows ``dN = r(N) N dt + sigma N dB`` and is cut back from
``k_plus`` to ``k_minus = k_plus - q`` whenever it reaches ``k_plus``.
"""

__version__ = "0.1.0"

from .analytics import (UNBOUNDED, GBMPath, HittingExpectation, closure_expectation_bounds,
                        expected_hitting_time, gbm_path, second_moment_bound)
from .deterministic import DetTrajectory, det_closure_length, det_length_bounds, det_trajectory
from .exceptions import ConfigError, HypothesisError, InfeasibleClosureError, ModelError
from .montecarlo import (EnsembleSummary, Scenario, abundance_at, long_run_average_no_harvest,
                         run_ensemble, sweep)
from .rates import (ConstantRate, GeneralizedLogistic, H1Report, H2Report, NoiseSpec,
                    PiecewiseTable, Policy, RateBounds, check_h1, check_h2, eval_rate,
                    rate_bounds)
from .sde import (BrownianIncrements, ClosureRecord, CrossingDecision, SimConfig,
                  StochTrajectory, detect_crossing, em_step, simulate_path)

__all__ = [
    "__version__", "UNBOUNDED", "GBMPath", "HittingExpectation",
    "closure_expectation_bounds", "expected_hitting_time", "gbm_path",
    "second_moment_bound", "DetTrajectory", "det_closure_length", "det_length_bounds",
    "det_trajectory", "ConfigError", "HypothesisError", "InfeasibleClosureError",
    "ModelError", "EnsembleSummary", "Scenario", "abundance_at",
    "long_run_average_no_harvest", "run_ensemble", "sweep", "ConstantRate",
    "GeneralizedLogistic", "H1Report", "H2Report", "NoiseSpec", "PiecewiseTable", "Policy",
    "RateBounds", "check_h1", "check_h2", "eval_rate", "rate_bounds", "BrownianIncrements",
    "ClosureRecord", "CrossingDecision", "SimConfig", "StochTrajectory", "detect_crossing",
    "em_step", "simulate_path",
]
