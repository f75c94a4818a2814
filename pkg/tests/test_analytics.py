import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import mean_passage_time
from pulsequota.analytics import (UNBOUNDED, closure_expectation_bounds, expected_hitting_time,
                                  gbm_path, second_moment_bound)
from pulsequota.exceptions import HypothesisError, ModelError
from pulsequota.rates import GeneralizedLogistic, NoiseSpec, Policy, rate_bounds

POLICY = Policy(6000.0, 5000.0)
NOISE = NoiseSpec(1 / 3)


def test_hitting_time_malthusian_value():
    e = expected_hitting_time(1 / 9, NOISE, POLICY)
    assert e.bounded and e.value == pytest.approx(18 * math.log(6))
    assert str(e) == repr(e.value)


def test_hitting_time_agrees_with_scale_speed_oracle():
    for gamma, sigma in [(1 / 9, 1 / 3), (0.5, 0.2), (0.3, 0.7)]:
        e = expected_hitting_time(gamma, NoiseSpec(sigma), POLICY)
        ref = mean_passage_time(lambda n: gamma, sigma, 1000.0, 6000.0)
        assert e.value == pytest.approx(ref, rel=1e-7)


def test_unbounded_when_drift_not_positive():
    assert expected_hitting_time(1 / 27, NOISE, POLICY) is UNBOUNDED or \
        not expected_hitting_time(1 / 27, NOISE, POLICY).bounded
    assert str(expected_hitting_time(1 / 18, NOISE, POLICY)) == "unbounded"


def test_closure_bounds_logistic_setup():
    rb = rate_bounds(GeneralizedLogistic(1 / 9, 9000.0), 6000.0)
    lo, hi = closure_expectation_bounds(rb, NOISE, POLICY)
    assert lo == pytest.approx(18 * math.log(6))
    assert not hi.bounded


def test_closure_bounds_need_beta_above_threshold():
    rb = rate_bounds(GeneralizedLogistic(1 / 20, 9000.0), 6000.0)
    with pytest.raises(HypothesisError):
        closure_expectation_bounds(rb, NOISE, POLICY)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.06, 1.0), st.floats(0.06, 1.0))
def test_bounds_ordered(a, b):
    alpha, beta = sorted((a, b))
    lo = expected_hitting_time(beta, NOISE, POLICY)
    hi = expected_hitting_time(alpha, NOISE, POLICY)
    assert lo.value <= hi.value


def test_gbm_path_closed_form():
    rng = np.random.default_rng(3)
    dt = 0.01
    db = rng.normal(0, math.sqrt(dt), 500)
    path = gbm_path(0.2, NOISE, 10.0, db, dt)
    assert path.n[0] == 10.0 and path.t[0] == 0.0 and path.n.size == 501
    # multiplicative recursion gives the same process
    step = np.exp((0.2 - NOISE.half_variance) * dt + NOISE.sigma * db)
    assert np.allclose(path.n[1:], 10.0 * np.cumprod(step), rtol=1e-12)
    with pytest.raises(ModelError):
        gbm_path(0.2, NOISE, 0.0, db, dt)


def test_second_moment_bound_at_ten():
    rb = rate_bounds(GeneralizedLogistic(1 / 9, 9000.0), 6000.0)
    c10 = second_moment_bound(POLICY, rb, 9000.0, NOISE, 10.0)
    # (1000^2 + 81e6 * 10 / 9) * exp(10/9)
    assert c10 == pytest.approx(9.1e7 * math.exp(10 / 9))
    assert c10 == pytest.approx(2.764e8, rel=1e-3)
    assert second_moment_bound(POLICY, rb, 9000.0, NOISE, 0.0) == 1e6
    with pytest.raises(ModelError):
        second_moment_bound(POLICY, rb, 9000.0, NOISE, -1.0)
