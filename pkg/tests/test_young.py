import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orliczkit.errors import ConfigError
from orliczkit.young import (Conjugate, ExpMinusLinear, PiecewiseLinearConvex, Power, Scaled,
                             conjugate, delta2_index, validate, young_from_config)

from oracles import exp_inverse, power_inverse

POWERS = st.floats(1.2, 6.0)
POSITIVE = st.floats(1e-6, 1e6)


def test_power_defaults_to_x_p_over_p():
    phi = Power(3)
    assert phi(2.0) == pytest.approx(8 / 3)
    assert phi.inverse(8 / 3) == pytest.approx(2.0, rel=1e-14)


@pytest.mark.parametrize("p", [1.0, 0.5, -2])
def test_power_rejects_small_exponent(p):
    with pytest.raises(ConfigError):
        Power(p)


def test_exp_minus_linear_small_and_large():
    phi = ExpMinusLinear()
    assert phi(1e-6) == pytest.approx(0.5e-12 + 1e-18 / 6, rel=1e-12)
    assert phi(2.0) == pytest.approx(math.exp(2) - 3, rel=1e-14)
    assert math.isinf(phi(800.0))
    value, saturated = phi.eval_checked(800.0)
    assert saturated and math.isinf(value)


@pytest.mark.parametrize("y", [1e-300, 1e-12, 1e-5, 1e-3, 0.1, 1.0, 7.5, 40.0, 1e4, 1e100, 1e300])
def test_exp_inverse_against_lambert_w(y):
    assert ExpMinusLinear().inverse(y) == pytest.approx(exp_inverse(y), rel=1e-12)


@given(POWERS, POSITIVE)
def test_power_inverse_round_trip(p, y):
    phi = Power(p)
    x = phi.inverse(y)
    assert x == pytest.approx(float(power_inverse(p, y)), rel=1e-12)
    assert phi(x) == pytest.approx(y, rel=1e-10)


@given(st.floats(1e-8, 600.0))
def test_exp_inverse_round_trip(x):
    phi = ExpMinusLinear()
    assert phi.inverse(phi(x)) == pytest.approx(x, rel=1e-12)


def test_piecewise_evaluation_and_tail_rules():
    pts = [[0, 0], [1, 1], [2, 3]]
    lin = PiecewiseLinearConvex(pts, "linear")
    assert lin(0.5) == pytest.approx(0.5)
    assert lin(1.5) == pytest.approx(2.0)
    # slopes 1, 2 then 3, 4, ... on unit-width segments
    assert lin(3.0) == pytest.approx(6.0)
    assert lin(4.0) == pytest.approx(10.0)
    const = PiecewiseLinearConvex(pts, "constant")
    assert const(4.0) == pytest.approx(7.0)
    geo = PiecewiseLinearConvex(pts, "geometric")
    assert geo(4.0) == pytest.approx(3 + 4 + 8)
    assert lin.inverse(lin(3.7)) == pytest.approx(3.7, rel=1e-10)


def test_piecewise_config_errors():
    with pytest.raises(ConfigError):
        PiecewiseLinearConvex([[0, 0]])
    with pytest.raises(ConfigError):
        PiecewiseLinearConvex([[1, 0], [2, 1]])
    with pytest.raises(ConfigError):
        PiecewiseLinearConvex([[0, 0], [2, 1], [1, 3]])


def test_scaled():
    phi = Scaled(Power(2), a=3.0, b=2.0)
    assert phi(1.0) == pytest.approx(2 * 9 / 2)
    assert phi.inverse(phi(0.7)) == pytest.approx(0.7)


@pytest.mark.parametrize("phi", [Power(2), Power(3.5), ExpMinusLinear(),
                                 PiecewiseLinearConvex([[0, 0], [1, 0.5], [2, 2]]),
                                 Scaled(Power(2), 2.0, 0.5)])
def test_validate_accepts_young_functions(phi):
    assert all(d.passed for d in validate(phi)), [d for d in validate(phi) if not d.passed]


def test_validate_reports_nonconvex_piecewise():
    bad = PiecewiseLinearConvex([[0, 0], [1, 2], [2, 3]], "constant")
    diags = {d.check: d for d in validate(bad)}
    assert not diags["midpoint_convex"].passed
    assert diags["midpoint_convex"].point == pytest.approx(1.0, abs=0.05)


def test_validate_reports_decreasing_piecewise():
    bad = PiecewiseLinearConvex([[0, 0], [1, 2], [2, 1]], "constant")
    diags = {d.check: d for d in validate(bad)}
    assert not diags["nondecreasing"].passed
    assert not diags["midpoint_convex"].passed


@pytest.mark.parametrize("p,q", [(1.5, 3.0), (2.0, 2.0), (3.0, 1.5), (4.0, 4 / 3)])
def test_conjugate_of_power(p, q):
    psi = conjugate(Power(p))
    y = np.geomspace(1e-3, 1e3, 40)
    np.testing.assert_allclose(psi(y), y ** q / q, rtol=1e-8)


def test_conjugate_of_exp_minus_linear():
    # sup_x (xy − e^x + x + 1) = (1+y)log(1+y) − y
    psi = Conjugate(ExpMinusLinear())
    y = np.geomspace(1e-3, 1e3, 30)
    np.testing.assert_allclose(psi(y), (1 + y) * np.log1p(y) - y, rtol=1e-8)


@settings(max_examples=60, deadline=None)
@given(st.floats(1.3, 5.0), st.floats(1e-3, 1e2), st.floats(1e-3, 1e2))
def test_youngs_inequality(p, x, y):
    phi = Power(p)
    assert x * y <= phi(x) + conjugate(phi)(y) * (1 + 1e-10) + 1e-14


@settings(max_examples=40, deadline=None)
@given(POWERS, st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(0, 1))
def test_power_is_convex_and_increasing(p, a, b, lam):
    phi = Power(p)
    mid = lam * a + (1 - lam) * b
    assert phi(mid) <= lam * phi(a) + (1 - lam) * phi(b) + 1e-12 * max(phi(a), phi(b))
    assert phi(max(a, b)) >= phi(min(a, b))


def test_delta2():
    assert delta2_index(Power(3)).satisfies_delta2
    assert delta2_index(Power(3)).sup_ratio == pytest.approx(8.0)
    assert not delta2_index(ExpMinusLinear()).satisfies_delta2


@pytest.mark.parametrize("phi", [Power(2.5), Power(2, c=1.0), ExpMinusLinear(),
                                 PiecewiseLinearConvex([[0, 0], [1, 1], [2, 3]], "geometric"),
                                 Scaled(Power(3), 2.0, 4.0), Conjugate(Power(3))])
def test_config_round_trip(phi):
    again = young_from_config(phi.to_config())
    x = np.array([0.01, 0.5, 2.0, 7.0])
    np.testing.assert_allclose(again(x), phi(x), rtol=1e-12)


def test_config_errors_name_the_field():
    with pytest.raises(ConfigError, match="phi1"):
        young_from_config({"kind": "power"}, "phi1")
    with pytest.raises(ConfigError, match="kind"):
        young_from_config({"kind": "cosh"}, "phi1")
