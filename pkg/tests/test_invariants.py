"""Property tests for invariants that cut across modules."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linresp.jumpspace import Grid, JumpFunction, b0_norm, relocate_jumps, transfer_density
from linresp.map_core import (OrbitClass, classify_map, itinerary_distance_bound, jump_anchors,
                              shared_itinerary_length, smooth_tent, sup_distance, tent)
from linresp.susceptibility import Observable, polynomial, psi1, series
from linresp.tce import abelian_projection, composed, default_bump, horizontality, solve_tce
from linresp.transfer import derivative_jumps

SQUARE = polynomial([0.0, 0.0, 1.0])
TENT = tent(1.9)
TENT_ANCHORS = jump_anchors(TENT, OrbitClass("none"), kmax=12)
SMOOTH = smooth_tent(1.9, 0.3)
SMOOTH_ANCHORS = jump_anchors(SMOOTH, OrbitClass("none"), kmax=30)
slopes = st.floats(1.3, 2.0)


@given(slopes, st.floats(0.001, 0.999))
def test_inverse_of_image(s, x):
    f = tent(s)
    if x == f.c:
        return
    sign = 1 if x < f.c else -1
    y = float(f(x))
    assert float(f(f.inverse(y, sign))) == pytest.approx(y, abs=1e-12)
    assert float(f.inverse(y, sign)) == pytest.approx(x, abs=1e-10)


@settings(max_examples=10)
@given(st.sampled_from([(1 + 5 ** 0.5) / 2, 2.0, 2 ** 0.5]))
def test_classification_stable_under_tighter_tolerance(s):
    a, b = classify_map(tent(s)), classify_map(tent(s), tol=0.5e-9)
    assert (a.kind, a.n0, a.n1) == (b.kind, b.n0, b.n1)


@given(st.floats(1.6, 2.0), st.floats(0.0, 0.02), st.floats(0.01, 0.99), st.floats(-1e-3, 1e-3),
       st.integers(1, 12))
def test_itinerary_bound(s, ds, x, dx, n):
    f, g = tent(s), tent(max(s - ds, 1.5))
    y = min(max(x + dx, 0.0), 1.0)
    if shared_itinerary_length(f, g, x, y, n) > n:
        bound = itinerary_distance_bound(1.0 / f.evaluate(0.1, 1), sup_distance(f, g), n)
        assert abs(x - y) <= bound + 1e-12


@given(st.lists(st.floats(-5, 5), min_size=12, max_size=12), st.floats(1.8, 1.99))
def test_relocation_is_an_isometry(u, s):
    an = TENT_ANCHORS
    g = Grid(0.0, 1.0, 64)
    phi = JumpFunction(g, np.cos(g.nodes), np.array(u), an)
    target = jump_anchors(tent(s), OrbitClass("none"), kmax=12)
    assert b0_norm(relocate_jumps(phi, target)) == b0_norm(phi)


@given(st.integers(2, 10), st.floats(-3, 3))
def test_single_jump_transport(k, u):
    f, an = TENT, TENT_ANCHORS
    g = Grid(0.0, 1.0, 64)
    jumps = np.zeros(12)
    jumps[k - 2] = u
    out = transfer_density(f, JumpFunction(g, np.zeros(65), jumps, an))
    assert out.jumps[k - 1] == u / an.slopes[k - 2]


@settings(max_examples=5)
@given(which=st.sampled_from(["tent19", "smooth"]))
def test_decomposition_consistency(which, dec19):
    if which == "tent19":
        f, dec = tent(1.9), dec19
    else:
        from linresp.transfer import density_of
        f, dec = SMOOTH, density_of(SMOOTH, 4096)
    g = dec.rho0.grid
    an = dec.anchors
    x = np.random.default_rng(7).uniform(0.001, 0.999, 3000)
    x = x[np.min(np.abs(x[:, None] - an.points[None, :]), axis=1) > 2 * g.h]
    dreg = float(np.max(np.abs(np.diff(dec.rho_reg.values)))) / g.h
    assert np.max(np.abs(dec.rho0(x) - dec.density(x))) <= 5 * g.h * max(dreg, 1.0)
    assert b0_norm(transfer_density(f, dec.density) - dec.density) <= 10 * g.h


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1), st.floats(-1, 1))
def test_derivative_jump_recursion_is_exact(gl, gr, sl, sr):
    f = SMOOTH
    an = SMOOTH_ANCHORS
    s = -np.cumprod(np.concatenate([[1.0], 1 / an.slopes[:-1]]))
    sp, E, Ep = derivative_jumps(f, an, s, (gl, gr), (sl, sr))
    for k in range(29):
        assert Ep[k + 1] == pytest.approx(sp[k] / an.slopes[k] ** 2, rel=1e-12, abs=1e-300)
        assert sp[k + 1] == pytest.approx(Ep[k + 1] - E[k + 1], rel=1e-12, abs=1e-14)


@settings(max_examples=15)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.integers(5, 30))
def test_tce_depth_surrogate(co, n):
    f = tent(1.9)
    X = polynomial([0.0] + co)
    v = composed(X, f)
    a, b = solve_tce(f, v, depth=n), solve_tce(f, v, depth=n + 10)
    x = np.random.default_rng(n).uniform(0, 1, 200)
    assert np.max(np.abs(a(x) - b(x))) <= a.tail_bound + 1e-15


@settings(max_examples=15)
@given(co=st.lists(st.floats(-1, 1), min_size=2, max_size=2))
def test_closed_form_weighted_jump(co, tent_golden, dec_golden):
    X = polynomial([0.0] + co)
    r = horizontality(tent_golden, X, decomposition=dec_golden)
    assert abs(r.J - r.J_closed) <= 1e-6 * max(1.0, abs(r.J))


@settings(max_examples=10)
@given(t=st.floats(0.0, 0.05))
def test_conjugacy_commutes(t, conj19):
    assert conj19.conjugacy_defect(t) <= 1e-12


def test_conjugacy_direction_vanishes_at_critical_point(conj19):
    assert conj19.alpha(conj19.base.c) == 0.0


@settings(max_examples=8)
@given(k=st.floats(-5, 5))
def test_psi1_ignores_constants(k, conj19, dec19):
    a = psi1(conj19.base, dec19, conj19.X, conj19.dX, SQUARE).psi1
    b = psi1(conj19.base, dec19, conj19.X, conj19.dX, polynomial([k, 0.0, 1.0])).psi1
    assert b == pytest.approx(a, abs=1e-8)


def test_series_is_summable_inside_the_disc(conj19, dec19):
    ser = series(conj19.base, dec19, conj19.X, SQUARE, 120)
    terms = np.abs(ser.kappa) * 0.9 ** np.arange(120)
    keep = np.nonzero(terms > 1e-15)[0]
    rate = np.exp(np.polyfit(keep, np.log(terms[keep]), 1)[0])
    assert rate <= 0.95


def test_vanishing_second_moment_gives_linear_approach(tent_golden, dec_golden):
    an = dec_golden.anchors
    b1, b2 = default_bump(tent_golden), default_bump(tent_golden, center=an.points[1])
    X0 = polynomial([0.0, 1.0])
    Xh, coef = abelian_projection(tent_golden, X0, [b1, b2], an)
    dXh = lambda y: X0.derivative(y) - coef[0] * b1.derivative(y) - coef[1] * b2.derivative(y)
    X = Observable(Xh, dXh)
    p = psi1(tent_golden, dec_golden, X, dXh, SQUARE).psi1
    ser = series(tent_golden, dec_golden, X, SQUARE, 150)
    steps = 2.0 ** -np.arange(3, 9)
    gaps = [abs(ser.value(1 - h) - p) for h in steps]
    order = np.polyfit(np.log(steps), np.log(gaps), 1)[0]
    assert order >= 0.9
