import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orliczkit.errors import ConfigError, DomainError
from orliczkit.measure import (Interval, MeasurableFunction, MeasureSpace, TailRule,
                               adaptive_gk15, integrate, space_from_config, tail_limsup)

from oracles import quad


def counting(horizon=8, weight="1"):
    return space_from_config({"tail": {"weight": weight, "horizon": horizon}})


def test_space_config_mixed():
    mu = space_from_config({"interval": {"lo": 0, "hi": 2},
                            "atoms": [{"id": 1, "w": 0.5}, {"id": 2, "w": 3}],
                            "tail": {"weight": "1/j^2"}})
    assert mu.interval.length == 2.0
    assert mu.n_atoms == 2 and mu.has_tail
    np.testing.assert_allclose(mu.atom_weights([1, 2, 3, 4]), [0.5, 3.0, 1 / 9, 1 / 16])


@pytest.mark.parametrize("cfg,where", [
    ({"atoms": [{"id": 1, "w": -1}]}, "space.atoms[0].w"),
    ({"atoms": [{"id": 2, "w": 1}]}, "space.atoms[0]"),
    ({"atoms": [{"w": 1}], "tail": {"horizon": 3}}, "space.tail"),
    ({"tail": {"weight": "1"}}, "space.tail"),
    ({"interval": {"lo": 1}}, "space.interval"),
])
def test_space_config_errors_carry_field(cfg, where):
    with pytest.raises(ConfigError) as exc:
        space_from_config(cfg)
    assert exc.value.context == where


def test_empty_space_rejected():
    with pytest.raises(ConfigError):
        MeasureSpace()


def test_tail_weights_must_be_positive():
    with pytest.raises(ConfigError):
        MeasureSpace(None, [1.0], TailRule(lambda j: 1.0 - j / 100.0))


def test_gk15_matches_quad():
    fns = [(np.sin, 0, 3), (lambda t: np.sqrt(t), 0, 1), (lambda t: np.exp(-t * t), -2, 5)]
    for fn, a, b in fns:
        val, err, ok = adaptive_gk15(fn, a, b)
        assert ok
        assert val == pytest.approx(quad(fn, a, b), abs=1e-11)


def test_integrate_interval_with_breakpoint():
    mu = space_from_config({"interval": {"lo": 0, "hi": 1}})
    f = MeasurableFunction.interval_indicator(mu, 0.2, 0.45, 3.0)
    assert integrate(f, mu).value == pytest.approx(0.75, abs=1e-12)


def test_tail_sum_of_inverse_squares():
    mu = counting(8)
    f = MeasurableFunction.from_expr(mu, "1/j^2")
    res = integrate(f, mu)
    assert res.converged
    assert res.value == pytest.approx(math.pi ** 2 / 6, rel=1e-9)


def test_tail_sum_telescoping_weights():
    mu = counting(4, "1/(j*(j+1))")
    res = integrate(MeasurableFunction.constant(mu, 1.0), mu)
    assert res.converged
    assert abs(res.value - 1.0) <= res.abs_error


def test_harmonic_tail_diverges():
    mu = counting(8)
    assert not integrate(MeasurableFunction.from_expr(mu, "1/j"), mu).converged


def test_late_growth_is_not_missed():
    # zero for a long stretch, then it grows: the look-ahead must catch it
    mu = counting(8)
    f = MeasurableFunction.from_expr(mu, "max(j - 5000, 0)")
    assert not integrate(f, mu).converged


def test_tail_limsup_values():
    mu = counting(8)
    lim = lambda e: tail_limsup(MeasurableFunction.from_expr(mu, e), mu).value
    assert lim("1 + 1/j") == pytest.approx(1.0, abs=1e-4)
    assert lim("1/j") == 0.0
    assert math.isinf(lim("j^2/(j+1)"))
    # declared limits win over probing
    f = MeasurableFunction.from_expr(mu, {"atoms": "j", "tail_limit": 5})
    assert tail_limsup(f, mu).value == 5.0


def test_function_channels_and_missing_parts():
    mu = space_from_config({"interval": {"lo": 0, "hi": 1}, "atoms": [{"w": 1}, {"w": 2}]})
    f = MeasurableFunction.from_expr(mu, {"interval": "t", "atoms": "10*j"})
    np.testing.assert_allclose(f.atom_values, [10, 20])
    with pytest.raises(ConfigError):
        MeasurableFunction.from_expr(mu, {"atoms": "j"})
    with pytest.raises(DomainError):
        MeasurableFunction.atom_indicator(mu, [3])


def test_truncated_space():
    mu = counting(4, "1/j")
    fin = mu.truncated(10)
    assert fin.n_atoms == 10 and not fin.has_tail
    np.testing.assert_allclose(fin.weights, 1 / np.arange(1, 11))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=20),
       st.lists(st.floats(0.01, 5.0), min_size=20, max_size=20))
def test_atom_integral_is_weighted_sum(vals, weights):
    mu = MeasureSpace(None, weights)
    f = MeasurableFunction.on_atoms(mu, vals)
    want = float(np.dot(vals, weights[: len(vals)]))
    assert integrate(f, mu).value == pytest.approx(want, rel=1e-12, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.5, 4.0), st.floats(0.1, 10.0))
def test_tail_power_sums(p, c):
    mu = counting(16)
    from scipy.special import zeta
    res = integrate(MeasurableFunction.from_expr(mu, f"{c!r}/j^{p!r}"), mu)
    assert res.converged
    assert res.value == pytest.approx(c * zeta(p), rel=1e-6)
