import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orliczkit.measure import MeasurableFunction, MeasureSpace, space_from_config
from orliczkit.orlicz import (indicator_norm, luxemburg_norm, luxemburg_norm_discrete, modular,
                              weighted_modular)
from orliczkit.young import ExpMinusLinear, PiecewiseLinearConvex, Power

from oracles import exp_phi, luxemburg_bruteforce, power_phi

PHIS = [(Power(2), power_phi(2)), (Power(3), power_phi(3)), (ExpMinusLinear(), exp_phi)]


@pytest.mark.parametrize("phi,ref", PHIS)
def test_discrete_norm_against_brentq(phi, ref):
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = rng.integers(1, 12)
        v = rng.normal(size=n) * rng.uniform(0.1, 5)
        w = rng.uniform(0.05, 4, size=n)
        assert luxemburg_norm_discrete(phi, v, w) == pytest.approx(
            luxemburg_bruteforce(ref, v, w), rel=1e-8)


def test_norm_of_zero_and_vectorized_rows():
    phi = Power(2)
    v = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, 0.0]])
    out = luxemburg_norm_discrete(phi, v, np.array([1.0, 0.5]))
    assert out[0] == 0.0
    assert out[1] == pytest.approx(math.sqrt((1 + 2.0) / 2))
    assert out[2] == pytest.approx(3 / math.sqrt(2))
    per_row = luxemburg_norm_discrete(phi, v, np.array([[1.0], [2.0], [4.0]]))
    assert per_row[2] == pytest.approx(3 * math.sqrt(4 / 2))


def test_power_norm_is_scaled_lp_norm():
    # N_{x^p/p}(f) = p^{-1/p} ‖f‖_p on counting measure
    mu = space_from_config({"tail": {"weight": "1", "horizon": 16}})
    f = MeasurableFunction.from_expr(mu, "1/j")
    assert luxemburg_norm(Power(2), f, mu) == pytest.approx(math.sqrt(math.pi ** 2 / 12), rel=1e-8)


def test_interval_norm_closed_form():
    # ∫_0^1 (t/k)^2/2 dt = 1/(6k²) = 1
    mu = space_from_config({"interval": {"lo": 0, "hi": 1}})
    f = MeasurableFunction.from_expr(mu, "t")
    assert luxemburg_norm(Power(2), f, mu) == pytest.approx(1 / math.sqrt(6), rel=1e-8)


def test_infinite_norm_outside_the_space():
    mu = space_from_config({"tail": {"weight": "1", "horizon": 8}})
    f = MeasurableFunction.from_expr(mu, "1/sqrt(j)")
    assert math.isinf(luxemburg_norm(Power(2), f, mu))


def test_indicator_norm_closed_form():
    assert indicator_norm(Power(2), 4.0) == pytest.approx(1 / math.sqrt(2 / 4))


def test_weighted_modular_zero_weight_kills_saturation():
    mu = MeasureSpace(None, [1.0, 1.0])
    f = MeasurableFunction.on_atoms(mu, [1e6, 1.0])
    h = MeasurableFunction.on_atoms(mu, [0.0, 2.0])
    assert weighted_modular(ExpMinusLinear(), f, h, mu) == pytest.approx(2 * (math.e - 2))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=1, max_size=10), st.floats(0.01, 100))
def test_homogeneity(vals, c):
    phi = ExpMinusLinear()
    w = np.ones(len(vals))
    if not np.any(np.abs(vals) > 1e-6):
        return
    a = luxemburg_norm_discrete(phi, np.array(vals) * c, w)
    b = luxemburg_norm_discrete(phi, np.array(vals), w)
    assert a == pytest.approx(c * b, rel=1e-7)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=8, max_size=8),
       st.lists(st.floats(-10, 10), min_size=8, max_size=8))
def test_triangle_inequality(f, g):
    phi = PiecewiseLinearConvex([[0, 0], [1, 0.5], [2, 2]], "linear")
    w = np.linspace(0.5, 2, 8)
    f, g = np.array(f), np.array(g)
    n = lambda v: luxemburg_norm_discrete(phi, v, w)
    assert n(f + g) <= (n(f) + n(g)) * (1 + 1e-8) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=10))
def test_unit_modular_at_norm(vals):
    phi = Power(3)
    mu = MeasureSpace(None, np.linspace(0.5, 3, len(vals)))
    f = MeasurableFunction.on_atoms(mu, vals)
    k = luxemburg_norm(phi, f, mu)
    assert modular(phi, f, mu, scale=1 / k) == pytest.approx(1.0, abs=1e-7)
