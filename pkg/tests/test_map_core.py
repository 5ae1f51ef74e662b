import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from linresp.errors import (AboveCriticalValue, AmbiguousSide, InvalidMap, NotExpanding,
                            OutOfDomain)
from linresp.map_core import (OrbitClass, classify_map, conjugate_map, critical_orbit, expansion_constants,
                              is_good, itinerary_distance_bound, map_from_dict, polynomial_map,
                              shared_itinerary_length, smooth_tent, tent)

from conftest import GOLDEN


def test_evaluation_examples(tent2, tent19):
    assert tent2.evaluate(0.25) == 0.5
    assert tent2.evaluate(0.5, 1, "left") == 2.0
    assert tent2.evaluate(0.5, 1, "right") == -2.0
    assert tent19.evaluate(0.9) == pytest.approx(0.19, abs=1e-15)


def test_evaluation_errors(tent2):
    with pytest.raises(OutOfDomain):
        tent2.evaluate(1.5)
    with pytest.raises(AmbiguousSide):
        tent2.evaluate(0.5, 1)
    with pytest.raises(AboveCriticalValue):
        tent(1.5).inverse(0.9, +1)


def test_inverse_examples(tent2, tent_golden):
    assert tent2.inverse(0.5, +1) == 0.25
    assert tent2.inverse(0.5, -1) == 0.75
    assert tent_golden.inverse(GOLDEN / 2, +1) == pytest.approx(0.5, abs=1e-15)


def test_critical_orbits():
    pts = critical_orbit(tent(2.0), 4).points
    np.testing.assert_allclose(pts, [0.5, 1.0, 0.0, 0.0, 0.0])
    g = critical_orbit(tent(GOLDEN), 3)
    np.testing.assert_allclose(g.points[1:3], [0.809017, 0.309017], atol=1e-6)
    assert g.points[3] == 0.5 and g.hit_index == 3
    r = critical_orbit(tent(math.sqrt(2.0)), 4).points
    np.testing.assert_allclose(r[1:4], [0.707107, 0.414214, 0.585786], atol=1e-6)
    assert r[4] == pytest.approx(r[3], abs=1e-12)


def test_classification(tent2, tent_golden, tent19):
    g = classify_map(tent_golden)
    assert (g.kind, g.n1, g.N_f, g.M_f) == ("periodic", 3, 3, 3)
    t = classify_map(tent2)
    assert (t.kind, t.n0, t.n1, t.N_f) == ("preperiodic", 2, 1, 2)
    assert classify_map(tent19).kind == "none"


def test_good_maps(tent_golden):
    ok, info = is_good(tent_golden, classify_map(tent_golden))
    assert ok and info["period_products"][0] == pytest.approx(GOLDEN**3)
    root2 = tent(math.sqrt(2.0))
    assert is_good(root2, classify_map(root2))[0]


def test_weak_periodic_cycle_is_not_good():
    # product of slopes along a 2-cycle is 1.44 < 2
    ok, _ = is_good(tent(1.2), OrbitClass("periodic", n0=1, n1=2))
    assert not ok


def test_expansion_constants(tent2, tent_golden):
    e = expansion_constants(tent2)
    assert (e.lambda_hat, e.Lambda_hat) == (0.5, 2.0)
    e = expansion_constants(tent_golden)
    assert e.lambda_hat == pytest.approx(1 / GOLDEN) and e.Lambda_hat == pytest.approx(GOLDEN)
    e = expansion_constants(smooth_tent(1.9, 0.4))
    assert e.lambda_hat == pytest.approx(1 / 1.7)
    with pytest.raises(NotExpanding):
        expansion_constants(polynomial_map(0, 1, 0.5, [0, 0.9], [0.9, -0.9]))


def test_itinerary_bound_examples():
    assert itinerary_distance_bound(0.5, 0.0, 10) == pytest.approx(2**-10)
    assert itinerary_distance_bound(0.5, 0.01, 0) == pytest.approx(1.02)


def test_itinerary_bound_holds_for_close_tents():
    f, g = tent(2.0), tent(1.99)
    delta = float(np.max(np.abs(f(np.linspace(0, 1, 1001)) - g(np.linspace(0, 1, 1001)))))
    xs = np.linspace(0.013, 0.987, 400)
    for x in xs:
        for y in (x + 1e-4, x - 1e-4):
            n = shared_itinerary_length(f, g, x, y, 8)
            if n > 8:
                assert abs(x - y) <= itinerary_distance_bound(0.5, delta, 8)


def test_validation_failures():
    with pytest.raises(InvalidMap):
        polynomial_map(0, 1, 0.5, [0.1, 2.0], [2.0, -2.0])
    with pytest.raises(InvalidMap):
        map_from_dict({"family": "logistic"})
    with pytest.raises(InvalidMap):
        map_from_dict({"a": 0})


def test_dict_round_trip(tent19):
    again = map_from_dict(tent19.to_dict())
    x = np.linspace(0, 1, 101)
    np.testing.assert_array_equal(again(x), tent19(x))


def test_conjugated_map_commutes(tent19):
    coeffs = [0, 0.5, -1.5, 1.0]
    ft = conjugate_map(tent19, coeffs, 0.03)
    h = lambda x: x + 0.03 * np.polyval(coeffs[::-1], x)
    x = np.linspace(0, 1, 1000)
    assert np.max(np.abs(h(tent19(x)) - ft(h(x)))) < 1e-12


@given(st.floats(1.2, 2.0), st.floats(0.0, 1.0))
def test_inverse_branches_undo_the_map(slope, u):
    f = tent(slope)
    y = u * f.critical_value
    for sign in (+1, -1):
        assert float(f(f.inverse(y, sign))) == pytest.approx(y, abs=1e-12)


@given(st.floats(1.1, 2.0), st.integers(1, 25))
def test_cumulative_derivative_lower_bound(slope, K):
    orbit = critical_orbit(tent(slope), K)
    n = len(orbit.cum_derivs)
    k = np.arange(n)
    assert np.all(np.abs(orbit.cum_derivs) >= slope ** k * (1 - 1e-12))
