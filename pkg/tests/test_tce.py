import numpy as np
import pytest
from hypothesis import given, strategies as st

from linresp.errors import DegenerateBump, MissingDecomposition
from linresp.map_core import critical_orbit, jump_anchors, tent
from linresp.response_lab import odd_bump, tent_slope_family
from linresp.tce import (abelian_projection, beta_closed, composed, default_bump, defect_of,
                         horizontal_projection, horizontality, orbit_derivative, solve_tce,
                         twisted_residuals)

half = lambda y: 0.5 * np.asarray(y, dtype=float)


def off_critical(fmap, n, seed=0):
    x = np.random.default_rng(seed).uniform(fmap.a, fmap.b, n)
    return x[x != fmap.c]


def test_coboundary_is_recovered(tent19):
    # v = b∘f - f' b has the bounded solution b itself; b(c) = 0 so the side at c is moot
    b = odd_bump(tent19)
    v = lambda x: b(tent19(x)) - tent19.derivative(x, 1, "left") * b(x)
    sol = solve_tce(tent19, v)
    x = off_critical(tent19, 500)
    np.testing.assert_allclose(sol(x), b(x), atol=1e-9)


def test_hand_orbit_sums(tent2):
    sol = solve_tce(tent2, composed(half, tent2))
    assert sol(np.array([1.0]))[0] == 0.0
    assert sol(np.array([0.0]))[0] == 0.0


def test_residual_within_tail_bound(tent19):
    X = lambda y: 0.3 * y - 0.7 * y ** 2 + y ** 3
    sol = solve_tce(tent19, composed(X, tent19), depth=40)
    x = off_critical(tent19, 1000)
    assert np.max(sol.residual(x)) <= sol.residual_bound


def test_preperiodic_example(tent2, dec2):
    rep = horizontality(tent2, half, decomposition=dec2)
    assert rep.defect == pytest.approx(0.5, abs=1e-12)
    assert rep.J == pytest.approx(-0.5, abs=1e-3)
    assert rep.J_closed == pytest.approx(-0.5, abs=1e-3)
    assert rep.alpha_c1 == 0.0


def test_zero_field(tent19, dec19):
    rep = horizontality(tent19, lambda y: np.zeros_like(np.asarray(y, dtype=float)),
                        decomposition=dec19)
    assert rep.defect == 0.0 and rep.J == 0.0


def test_vanishing_on_cycle(tent_golden):
    an = jump_anchors(tent_golden)
    pts = critical_orbit(tent_golden, 3).points[1:4]
    X = lambda y: np.prod([np.asarray(y, dtype=float) - p for p in pts], axis=0)
    assert defect_of(tent_golden, X, an) == pytest.approx(0.0, abs=1e-15)


def test_missing_decomposition(tent2):
    with pytest.raises(MissingDecomposition):
        horizontality(tent2, half)


def test_projection_removes_defect(tent2, tent19):
    for f in (tent2, tent19):
        an = jump_anchors(f, kmax=60) if f is tent19 else jump_anchors(f)
        Xh, coef = horizontal_projection(f, lambda y: np.asarray(y) ** 2, anchors=an)
        assert abs(defect_of(f, Xh, an)) <= 1e-10
        Xhh, coef2 = horizontal_projection(f, Xh, anchors=an)
        assert coef2 == pytest.approx(0.0, abs=1e-10)


def test_degenerate_bump(tent2):
    with pytest.raises(DegenerateBump):
        horizontal_projection(tent2, half, bump=lambda y: np.zeros_like(np.asarray(y)))


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_projection_is_linear(a, b):
    f = tent(2.0)
    X1, X2 = (lambda y: np.asarray(y) ** 2), (lambda y: np.sin(np.asarray(y)))
    P = lambda X: horizontal_projection(f, X)[0]
    lhs = P(lambda y: a * X1(y) + b * X2(y))
    rhs = lambda y: a * P(X1)(y) + b * P(X2)(y)
    y = np.linspace(0, 1, 33)
    np.testing.assert_allclose(lhs(y), rhs(y), atol=1e-12)


def test_two_bump_projection(tent_golden):
    an = jump_anchors(tent_golden)
    pts = an.points
    bumps = [default_bump(tent_golden, 0.08, pts[0]), default_bump(tent_golden, 0.08, pts[1])]
    Xh, _ = abelian_projection(tent_golden, lambda y: np.asarray(y, dtype=float), bumps, an)
    rep = horizontality(tent_golden, Xh, an, want_J=False)
    assert abs(rep.defect) < 1e-12 and abs(rep.abelian2) < 1e-12
    with pytest.raises(DegenerateBump):
        abelian_projection(tent_golden, half, [bumps[0], bumps[0]], an)


def test_first_orbit_derivative(tent19):
    orbit = critical_orbit(tent19, 40)
    X = lambda y: np.cos(np.asarray(y, dtype=float))
    assert beta_closed(X, orbit.points[1:], orbit.slopes[1:], 1) == float(X(orbit.points[1]))


def test_twisted_recursion(tent19):
    orbit = critical_orbit(tent19, 40)
    X = lambda y: 1.0 - 2.0 * np.asarray(y, dtype=float)
    assert np.max(twisted_residuals(X, orbit.points[1:], orbit.slopes[1:], 31)) <= 1e-12


def test_orbit_derivative_converges_linearly(tent19):
    fam = tent_slope_family(1.9, 0.01)
    rep = orbit_derivative(tent19, fam.map_at, fam.X, 5, t_values=(1e-3, 5e-4, 2.5e-4))
    assert rep.errors[0] > rep.errors[1] > rep.errors[2]
    assert all(1.6 < r < 2.4 for r in rep.linear_ratio)
    assert rep.within_bound
