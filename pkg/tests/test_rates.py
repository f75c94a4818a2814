import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import grid_extrema
from pulsequota import _kernel as K
from pulsequota.exceptions import HypothesisError, ModelError
from pulsequota.rates import (ConstantRate, GeneralizedLogistic, NoiseSpec, PiecewiseTable,
                              Policy, check_h1, check_h2, eval_rate, rate_bounds)

LOGISTIC = GeneralizedLogistic(1 / 9, 9000.0)
POLICY = Policy(6000.0, 5000.0)
NOISE = NoiseSpec(1 / 3)


def kernel_rate(law, n):
    kind, params, tx, ty = law.kernel_args()
    return K.RATE_FUNCTIONS[kind](params, tx, ty, float(n))


def test_logistic_rate_values():
    assert eval_rate(LOGISTIC, 0.0) == pytest.approx(1 / 9)
    assert eval_rate(LOGISTIC, 4500.0) == pytest.approx(1 / 18)
    assert eval_rate(LOGISTIC, 9000.0) == 0.0
    assert eval_rate(LOGISTIC, 6000.0) == pytest.approx(1 / 27)


def test_generalized_logistic_keeps_sign_above_capacity():
    law = GeneralizedLogistic(0.5, 100.0, mu=2.0, nu=2.0)
    assert law.rate(50.0) == pytest.approx(0.5 * 0.75 ** 2)
    assert law.rate(200.0) == pytest.approx(-0.5 * 9.0)


def test_eval_rate_rejects_negative_abundance():
    with pytest.raises(ModelError):
        eval_rate(LOGISTIC, -1.0)


@pytest.mark.parametrize("kwargs", [dict(r0=0, K=1), dict(r0=1, K=-1), dict(r0=1, K=1, mu=0.5)])
def test_logistic_validation(kwargs):
    with pytest.raises(ModelError):
        GeneralizedLogistic(**kwargs)


def test_policy_levels():
    assert POLICY.k_minus == 1000.0
    assert POLICY.log_ratio == pytest.approx(math.log(6))
    for k_plus, q in [(6000, 0), (6000, 6000), (6000, -1), (math.inf, 1)]:
        with pytest.raises(ModelError):
            Policy(k_plus, q)


def test_policy_must_sit_below_capacity():
    with pytest.raises(ModelError):
        Policy(9500.0, 5000.0).check_against(LOGISTIC)
    POLICY.check_against(LOGISTIC)


def test_rate_bounds_logistic():
    rb = rate_bounds(LOGISTIC, 6000.0)
    assert rb.alpha == pytest.approx(1 / 27)
    assert rb.beta == pytest.approx(1 / 9)
    assert rb.b_script == pytest.approx(1 / 9)


def test_rate_bounds_constant():
    rb = rate_bounds(ConstantRate(0.2), 10.0)
    assert (rb.alpha, rb.beta, rb.b_script) == (0.2, 0.2, 0.2)


def test_rate_bounds_resolution_validated():
    with pytest.raises(ModelError):
        rate_bounds(LOGISTIC, 6000.0, resolution=1)


tables = st.lists(st.floats(-1.0, 1.0, allow_nan=False), min_size=2, max_size=12).map(
    lambda ys: PiecewiseTable(tuple(np.linspace(0.0, 100.0, len(ys))), tuple(ys)))


@settings(max_examples=60, deadline=None)
@given(tables, st.floats(1.0, 100.0))
def test_table_bounds_match_brute_force_grid(law, k_plus):
    rb = rate_bounds(law, k_plus)
    lo, hi = grid_extrema(law.rate, 0.0, k_plus, points=2001)
    # the grid can only miss extrema, never overshoot them
    assert rb.alpha <= lo + 1e-12 and rb.beta >= hi - 1e-12
    fine_lo, fine_hi = grid_extrema(
        law.rate, 0.0, k_plus, points=1 + 1000 * (len(law.abundance) - 1))
    knots = [x for x in law.abundance if x <= k_plus] + [k_plus]
    exact = [law.rate(x) for x in knots]
    assert rb.alpha == pytest.approx(min(exact + [fine_lo]))
    assert rb.beta == pytest.approx(max(exact + [fine_hi]))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(1.0, 1e4), st.floats(1.0, 4.0), st.floats(1.0, 4.0),
       st.floats(0.0, 2.0))
def test_kernel_rate_agrees_with_python_rate(r0, k, mu, nu, frac):
    law = GeneralizedLogistic(r0, k, mu, nu)
    n = frac * k
    assert kernel_rate(law, n) == pytest.approx(law.rate(n), rel=1e-12, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(tables, st.floats(0.0, 1.0))
def test_kernel_table_rate_agrees_with_numpy(law, frac):
    n = frac * 100.0
    assert kernel_rate(law, n) == pytest.approx(law.rate(n), rel=1e-12, abs=1e-15)


def test_kernel_plain_logistic_specialisation():
    assert LOGISTIC.kernel_args()[0] == K.LAW_PLAIN_LOGISTIC
    assert kernel_rate(LOGISTIC, 3000.0) == pytest.approx(LOGISTIC.rate(3000.0))


def test_table_rejects_out_of_range_and_bad_knots():
    law = PiecewiseTable((0.0, 10.0), (1.0, -1.0))
    with pytest.raises(ModelError):
        law.rate(11.0)
    with pytest.raises(ModelError):
        PiecewiseTable((0.0, 0.0), (1.0, 2.0))
    with pytest.raises(ModelError):
        PiecewiseTable((0.0,), (1.0,))


def test_h1():
    assert check_h1(LOGISTIC).holds and check_h1(LOGISTIC).k == 9000.0
    assert not check_h1(ConstantRate(0.1)).holds
    assert check_h1(PiecewiseTable((0.0, 10.0, 20.0), (1.0, 0.5, -0.5))).k == pytest.approx(15.0)
    assert not check_h1(PiecewiseTable((0.0, 10.0), (1.0, 0.5))).holds
    # sign comes back: not a single crossing
    assert not check_h1(PiecewiseTable((0.0, 10.0, 20.0), (1.0, -1.0, 1.0))).holds


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(1.0, 1e4), st.floats(1.0, 4.0), st.floats(1.0, 4.0))
def test_h1_sign_change_property(r0, k, mu, nu):
    law = GeneralizedLogistic(r0, k, mu, nu)
    rep = check_h1(law)
    assert law.rate(0.5 * rep.k) > 0 and law.rate(1.5 * rep.k) < 0


def test_h2_logistic():
    rep = check_h2(LOGISTIC, NOISE, POLICY)
    assert rep.holds
    assert rep.k0_max == pytest.approx(4500.0)
    assert rep.threshold == pytest.approx(1 / 18)
    assert not check_h2(LOGISTIC, NoiseSpec(1.0), POLICY).holds


def test_h2_k0_max_capped_at_threshold():
    rep = check_h2(LOGISTIC, NoiseSpec(0.0), POLICY)
    assert rep.holds and rep.k0_max == 6000.0


def test_h2_needs_root_above_k_minus():
    # root K (1 - 0.9) = 900 lies below k_minus = 1000
    law = GeneralizedLogistic(1.0, 9000.0)
    assert not check_h2(law, NoiseSpec(math.sqrt(1.8)), POLICY).holds


def test_h2_table_and_constant():
    law = PiecewiseTable((0.0, 100.0, 200.0), (0.2, 0.0, -0.2))
    rep = check_h2(law, NoiseSpec(math.sqrt(0.2)), Policy(80.0, 60.0))  # threshold 0.1
    assert rep.holds and rep.k0_max == pytest.approx(50.0)
    assert check_h2(ConstantRate(1 / 9), NOISE, POLICY).holds
    assert not check_h2(ConstantRate(1 / 27), NOISE, POLICY).holds
    with pytest.raises(HypothesisError):
        check_h2(PiecewiseTable((0.0, 100.0), (0.2, 0.1)), NOISE, Policy(80.0, 60.0))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.0, 1.5))
def test_h2_root_is_where_rate_meets_threshold(r0, sigma):
    law = GeneralizedLogistic(r0, 1000.0)
    noise = NoiseSpec(sigma)
    rep = check_h2(law, noise, Policy(900.0, 899.0))
    if rep.holds:
        k0 = rep.k0_max
        assert min(law.rate(np.linspace(0, k0 * (1 - 1e-9), 101))) > noise.half_variance
    else:
        assert law.rate(1.0) <= noise.half_variance * (1 + 1e-9)
