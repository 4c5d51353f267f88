import math

import numpy as np
import pytest

from orliczkit.analysis import boundedness_certificate
from orliczkit.measure import MeasureSpace, space_from_config
from orliczkit.operators import operator_from_config
from orliczkit.oracle import (LABEL, operator_norm_estimate, truncation_distance,
                              truncation_distances, witness_separation)
from orliczkit.young import Power

from oracles import power_mult_norm

COUNTING = {"tail": {"weight": "1", "horizon": 64}}


@pytest.fixture(scope="module")
def counting():
    return space_from_config(COUNTING)


def mult(u, mu):
    return operator_from_config({"op": "mult", "u": u}, mu)


def test_same_phi_norm_is_sup(counting):
    est = operator_norm_estimate(Power(2), Power(2), mult("1 + 1/j", counting), counting)
    assert est.label == LABEL
    assert est.lower == pytest.approx(2.0, rel=1e-9)


def test_growth_estimate_against_holder(counting):
    est = operator_norm_estimate(Power(3), Power(2), mult("j^2/(j+1)", counting), counting,
                                 trunc_atoms=128)
    j = np.arange(1, 129)
    exact = power_mult_norm(j ** 2 / (j + 1), 3, 2)
    assert est.lower <= exact * (1 + 1e-9)
    assert est.lower >= 0.9 * exact


def test_truncation_same_phi_exact(counting):
    op = mult("1 + 1/j", counting)
    d = truncation_distances(Power(2), Power(2), op, counting, (50, 100, 200))
    for k, v in d.items():
        assert v == pytest.approx(1 + 1 / (k + 1), rel=1e-9)


def test_truncation_decay_against_holder(counting):
    op = mult("1/j^2", counting)
    d = truncation_distances(Power(3), Power(2), op, counting, (50, 100))
    for k, v in d.items():
        j = np.arange(k + 1, k + 129)
        exact = power_mult_norm(1.0 / j ** 2, 3, 2)
        assert v <= exact * (1 + 1e-9)
        assert v >= 0.5 * exact
    assert d[50] >= d[100]


def test_truncation_is_monotone_even_when_search_is_noisy(counting):
    op = mult("1/j + 1/(1 + abs(j - 120))", counting)
    d = truncation_distances(Power(2), Power(2), op, counting, (10, 60, 110, 200))
    vals = [d[k] for k in sorted(d)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_full_truncation_of_finite_space_is_zero():
    mu = MeasureSpace(None, [1.0, 2.0, 3.0])
    assert truncation_distance(Power(2), Power(2), mult("j", mu), mu, 3) == 0.0


def test_zero_operator(counting):
    assert operator_norm_estimate(Power(2), Power(2), mult("0", counting), counting).lower == 0.0


def test_seeded_determinism(counting):
    op = mult("1/j^2", counting)
    a = operator_norm_estimate(Power(3), Power(2), op, counting, samples=50, seed=3)
    b = operator_norm_estimate(Power(3), Power(2), op, counting, samples=50, seed=3)
    assert a.lower == b.lower
    np.testing.assert_array_equal(a.maximizer.atom_values, b.maximizer.atom_values)


def test_lower_bound_never_exceeds_certificate(counting):
    for u, p1, p2 in [("1 + 1/j", 2, 2), ("1/j^2", 3, 2), ("2 - 1/j", 2.5, 2.5)]:
        op = mult(u, counting)
        cert = boundedness_certificate(Power(p1), Power(p2), op, counting)
        est = operator_norm_estimate(Power(p1), Power(p2), op, counting, samples=60)
        assert est.lower <= cert.bound * (1 + 1e-9)


def test_composition_preimage_model(counting):
    # ceil(j/2): every atom has two preimages, ‖C‖ = 2^{1/2} for Φ = x²/2
    op = operator_from_config({"op": "comp", "atom_map": "ceil(j/2)"}, counting)
    est = operator_norm_estimate(Power(2), Power(2), op, counting)
    assert est.lower == pytest.approx(math.sqrt(2), rel=1e-9)


def test_witness_separation_far_tail(counting):
    ws = witness_separation(Power(2), Power(2), mult("1 + 1/j", counting), counting,
                            list(range(1000, 1010)), 10)
    assert ws.min_pairwise >= 0.70
    assert ws.min_image_norm == pytest.approx(1.001, abs=1e-3)


def test_witness_separation_interval_identity():
    mu = space_from_config({"interval": {"lo": 0, "hi": 1}})
    ws = witness_separation(Power(2), Power(2), mult("1", mu), mu, ("interval", 0.0, 1.0), 8)
    assert ws.min_image_norm == pytest.approx(1.0, rel=1e-6)
    assert ws.min_pairwise == pytest.approx(math.sqrt(2), rel=1e-6)
