import numpy as np
import pytest
from hypothesis import given, strategies as st

from linresp.errors import AnchorMismatch, LengthMismatch, NonExpandingMultiplier
from linresp.jumpspace import (AtomicMeasure, Grid, b0_norm, compress_jumps, expand_jumps,
                               integral, multiply, pair, relocate_jumps, smooth_function,
                               transfer_density, transfer_primitive, weak_norm, zero_function)
from linresp.map_core import jump_anchors, tent
from linresp.jumpspace import JumpFunction

N = 512


@pytest.fixture(scope="module")
def anchors2(tent2):
    return jump_anchors(tent2)


@pytest.fixture(scope="module")
def grid():
    return Grid(0.0, 1.0, N)


def tent2_density(grid, anchors, eta=0.05):
    return JumpFunction(grid, np.zeros(grid.n + 1), np.array([-1.0, 1.0]), anchors, eta)


def test_materialize(grid, anchors2):
    rho = tent2_density(grid, anchors2)
    assert rho(0.5) == 1.0
    assert rho(1.5) == 0.0
    assert rho(1.0) == 0.5


def test_strong_norm_examples(grid, anchors2):
    rho = tent2_density(grid, anchors2, eta=0.1)
    assert b0_norm(rho) == pytest.approx(1.21)
    assert b0_norm(zero_function(grid, anchors2)) == 0.0


def test_weak_norm_with_vanishing_regular_part(grid, anchors2, tent2):
    rho = tent2_density(grid, anchors2, eta=0.1)
    assert weak_norm(rho, 0, tent2) == pytest.approx(1.21)
    assert weak_norm(rho, np.inf) == pytest.approx(1.21)


def test_density_is_fixed_by_transfer(grid, anchors2, tent2):
    rho = tent2_density(grid, anchors2)
    img = transfer_density(tent2, rho)
    np.testing.assert_allclose(img.jumps, [-1.0, 1.0], atol=1e-14)
    assert np.max(np.abs(img.values)) < 1e-12


def test_transfer_of_constant(grid, anchors2, tent2):
    # the value 1 on (0, 1) comes out as the jump -1 at c_1 = 1, so the regular part is 0
    one = smooth_function(grid, anchors2, lambda x: 1.0)
    img = transfer_density(tent2, one)
    assert img.jumps[0] == pytest.approx(-1.0)
    x = np.linspace(0.01, 0.99, 50)
    np.testing.assert_allclose(img(x), 1.0, atol=1e-12)
    assert np.max(np.abs(img.values[:-1])) < 1e-12


def test_signed_transfer_of_identity(grid, anchors2, tent2):
    img = transfer_primitive(tent2, smooth_function(grid, anchors2, lambda x: x))
    x = np.linspace(0.01, 0.99, 99)
    np.testing.assert_allclose(img(x), x - 1.0, atol=1e-12)


def test_zero_maps_to_zero(grid, anchors2, tent2):
    z = zero_function(grid, anchors2)
    for op in (transfer_density, transfer_primitive):
        out = op(tent2, z)
        assert not np.any(out.values) and not np.any(out.jumps)


def test_signed_transfer_differentiates(tent19):
    # derivative of the signed transfer of x^2 equals the density transfer of 2x
    an = jump_anchors(tent19, kmax=40)
    g = Grid(0.0, 1.0, 4096)
    lhs = transfer_primitive(tent19, smooth_function(g, an, lambda x: x * x))
    rhs = transfer_density(tent19, smooth_function(g, an, lambda x: 2 * x))
    x = np.linspace(0.02, 0.93, 400)
    x = x[np.min(np.abs(x[:, None] - an.points[None, :]), axis=1) > 3e-3]
    d = (lhs(x + 1e-4) - lhs(x - 1e-4)) / 2e-4
    assert np.max(np.abs(d - rhs(x))) < 1e-3


def test_anchor_mismatch(grid, anchors2, tent19):
    with pytest.raises(AnchorMismatch):
        transfer_density(tent19, tent2_density(grid, anchors2))
    with pytest.raises(AnchorMismatch):
        tent2_density(grid, anchors2) + zero_function(grid, jump_anchors(tent19, kmax=2))


def test_relocation(grid, anchors2):
    rho = tent2_density(grid, anchors2)
    assert relocate_jumps(rho, anchors2) is not rho
    np.testing.assert_array_equal(relocate_jumps(rho, anchors2).jumps, rho.jumps)
    other = jump_anchors(tent(1.98), kmax=2)
    moved = relocate_jumps(rho, other)
    assert b0_norm(moved) == pytest.approx(b0_norm(rho), abs=1e-14)
    with pytest.raises(LengthMismatch):
        relocate_jumps(rho, jump_anchors(tent(1.98), kmax=3))


def test_expand_geometric():
    v = expand_jumps([1.0], 1, 1, [2.0], length=60)
    np.testing.assert_allclose(v[:3], [0.5, 0.25, 0.125])
    assert compress_jumps(v, 1, 1)[0] == pytest.approx(1.0, abs=1e-15)


def test_expand_tent2_saltus():
    v = expand_jumps([-1.0, 1.0], 2, 1, [2.0], length=60)
    np.testing.assert_allclose(v[:4], [-1.0, 0.5, 0.25, 0.125])
    np.testing.assert_allclose(compress_jumps(v, 2, 1), [-1.0, 1.0], atol=1e-15)
    assert not np.any(expand_jumps([0.0, 0.0], 2, 1, [2.0]))
    with pytest.raises(NonExpandingMultiplier):
        expand_jumps([1.0], 1, 1, [0.5])


def test_pairing_examples(grid, anchors2, dec_golden):
    assert integral(tent2_density(grid, anchors2)) == pytest.approx(1.0, abs=1e-14)
    assert pair(AtomicMeasure([(0.5, -2.0)]), lambda x: x) == -1.0
    assert integral(dec_golden.density) == pytest.approx(1.0, abs=1e-6)


def test_multiply_matches_pointwise(dec19):
    rho = dec19.density
    prod = multiply(rho, np.cos)
    x = np.random.default_rng(0).uniform(0, 1, 500)
    np.testing.assert_allclose(prod(x), rho(x) * np.cos(x), atol=1e-9)


coeff = st.floats(-3, 3)


@given(coeff, coeff, st.lists(coeff, min_size=2, max_size=2),
       st.lists(coeff, min_size=2, max_size=2))
def test_transfer_is_linear(a, b, u, v):
    g, an, f = Grid(0.0, 1.0, 64), jump_anchors(tent(2.0)), tent(2.0)
    p = JumpFunction(g, np.sin(3 * g.nodes), np.array(u), an)
    q = JumpFunction(g, g.nodes ** 2, np.array(v), an)
    lhs = transfer_density(f, a * p + b * q)
    rhs = a * transfer_density(f, p) + b * transfer_density(f, q)
    np.testing.assert_allclose(lhs.values, rhs.values, atol=1e-10)
    np.testing.assert_allclose(lhs.jumps, rhs.jumps, atol=1e-10)


@given(st.lists(coeff, min_size=2, max_size=2), st.floats(0, 5))
def test_transfer_preserves_mass(u, k):
    f = tent(2.0)
    g, an = Grid(0.0, 1.0, 2048), jump_anchors(f)
    p = JumpFunction(g, np.cos(k * g.nodes), np.array(u), an)
    assert integral(transfer_density(f, p)) == pytest.approx(integral(p), abs=1e-6)


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.floats(1.05, 4.0))
def test_expand_compress_round_trip(w, mu):
    back = compress_jumps(expand_jumps(w, 2, 2, [mu, -mu]), 2, 2)
    np.testing.assert_allclose(back, w, atol=1e-12)
