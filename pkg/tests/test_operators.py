import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orliczkit.errors import ConfigError, DomainError
from orliczkit.measure import MeasurableFunction, MeasureSpace, integrate, space_from_config
from orliczkit.operators import (Branch, Transformation, apply_composition,
                                 change_of_variables_check, operator_from_config, radon_nikodym)
from orliczkit.orlicz import modular, weighted_modular
from orliczkit.young import Power

from oracles import quad

COUNTING = {"tail": {"weight": "1", "horizon": 32}}
UNIT = {"interval": {"lo": 0, "hi": 1}}


def _atoms_brute_h(amap, n_target, scan):
    """μ(φ⁻¹(A_j)) on counting measure by direct counting over 1..scan."""
    img = np.array([amap(j) for j in range(1, scan + 1)])
    return np.array([np.sum(img == j) for j in range(1, n_target + 1)], dtype=float)


@pytest.mark.parametrize("expr,pyfn", [("ceil(j/2)", lambda j: math.ceil(j / 2)),
                                       ("j + 1", lambda j: j + 1),
                                       ("2*j", lambda j: 2 * j),
                                       ("ceil(j/3) + 4", lambda j: math.ceil(j / 3) + 4)])
def test_rn_derivative_by_counting(expr, pyfn):
    mu = space_from_config(COUNTING)
    op = operator_from_config({"op": "comp", "atom_map": expr}, mu)
    h = op.weight(mu)
    want = _atoms_brute_h(pyfn, 200, 2000)
    got = h.at_atoms(np.arange(1, 201))
    np.testing.assert_allclose(got, want)


def test_injective_map_has_indicator_h():
    mu = space_from_config(COUNTING)
    h = operator_from_config({"op": "comp", "atom_map": "3*j + 1"}, mu).weight(mu)
    vals = h.at_atoms(np.arange(1, 500))
    assert set(np.unique(vals)) <= {0.0, 1.0}
    np.testing.assert_array_equal(vals[3::3], 1.0)


def test_total_mass_on_finite_space():
    w = [0.5, 1.0, 2.0, 3.0]
    mu = MeasureSpace(None, w)
    t = Transformation(lambda j: np.minimum(j + 1, 4))
    h = radon_nikodym(t, mu).h
    assert float(np.sum(h.atom_values * mu.weights)) == pytest.approx(sum(w))


def test_map_leaving_finite_space_rejected():
    mu = MeasureSpace(None, [1.0, 1.0])
    with pytest.raises(ConfigError):
        operator_from_config({"op": "comp", "atom_map": "j + 1"}, mu)


def test_interval_density_of_square_map():
    mu = space_from_config(UNIT)
    op = operator_from_config({"op": "comp", "interval_map": [
        {"lo": 0, "hi": 1, "map": "t^2", "derivative": "2*t"}]}, mu)
    h = op.weight(mu)
    s = np.array([0.01, 0.25, 0.6, 0.99])
    np.testing.assert_allclose(h.on_interval(s), 1 / (2 * np.sqrt(s)), rtol=1e-9)


def test_declared_h_is_validated():
    mu = space_from_config(UNIT)
    base = {"op": "comp", "interval_map": [{"lo": 0, "hi": 1, "map": "t^2", "derivative": "2*t"}]}
    operator_from_config(dict(base, h={"interval": "1/(2*sqrt(t))"}), mu)
    with pytest.raises(ConfigError):
        operator_from_config(dict(base, h={"interval": "1"}), mu)


def test_branch_rejects_vanishing_derivative():
    with pytest.raises(DomainError):
        Branch(-1, 1, lambda t: t ** 3, lambda t: 3 * t ** 2 * np.sign(t))


def test_branch_inverse_by_bisection():
    br = Branch(0, 1, lambda t: t ** 3 + t, lambda t: 3 * t ** 2 + 1)
    t = np.array([1e-9, 0.3, 0.97])
    np.testing.assert_allclose(br.inverse(t ** 3 + t), t, rtol=1e-12)


def test_unknown_operator_names_field():
    mu = space_from_config(COUNTING)
    with pytest.raises(ConfigError) as exc:
        operator_from_config({"op": "shift"}, mu)
    assert exc.value.context == "operator.op"


def test_change_of_variables_doubling_atoms():
    mu = space_from_config(COUNTING)
    op = operator_from_config({"op": "comp", "atom_map": "2*j"}, mu)
    f = MeasurableFunction.from_expr(mu, "1/j + exp(-j)")
    phi = Power(2)
    lhs = modular(phi, op.apply(f, mu), mu)
    # direct: Σ_j Φ(f(2j))
    j = np.arange(1, 2_000_001, dtype=float)
    direct = float(np.sum((1 / (2 * j) + np.exp(-2 * j)) ** 2 / 2))
    assert lhs == pytest.approx(direct, rel=1e-6)
    assert change_of_variables_check(op.transformation, phi, f, mu, op.weight(mu)) < 1e-9


def test_change_of_variables_square_map_against_quad():
    mu = space_from_config(UNIT)
    op = operator_from_config({"op": "comp", "interval_map": [
        {"lo": 0, "hi": 1, "map": "t^2", "derivative": "2*t", "inverse": "sqrt(s)"}]}, mu)
    f = MeasurableFunction.from_expr(mu, "1 + t - t^2")
    phi = Power(3)
    rhs = weighted_modular(phi, f, op.weight(mu), mu)
    direct = quad(lambda t: (1 + t ** 2 - t ** 4) ** 3 / 3, 0, 1)
    assert rhs == pytest.approx(direct, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6),
       st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.floats(-3, 3))
def test_operators_are_linear(a, b, c):
    mu = MeasureSpace(None, np.linspace(1, 2, 6))
    f, g = MeasurableFunction.on_atoms(mu, a), MeasurableFunction.on_atoms(mu, b)
    combo = MeasurableFunction.on_atoms(mu, np.array(a) + c * np.array(b))
    mult = operator_from_config({"op": "mult", "u": "j - 3.5"}, mu)
    comp = operator_from_config({"op": "comp", "atom_map": "7 - j"}, mu)
    for op in (mult, comp):
        lhs = op.apply(combo, mu).atom_values
        rhs = op.apply(f, mu).atom_values + c * op.apply(g, mu).atom_values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 5))
def test_change_of_variables_affine_maps(a, b):
    mu = space_from_config(COUNTING)
    op = operator_from_config({"op": "comp", "atom_map": f"{a}*j + {b}"}, mu)
    f = MeasurableFunction.from_expr(mu, "1/j^2")
    assert change_of_variables_check(op.transformation, Power(2), f, mu, op.weight(mu)) < 1e-9
