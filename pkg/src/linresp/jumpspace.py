"""Functions of bounded variation with jumps pinned to the postcritical orbit.

An element is stored as a continuous piecewise-linear *regular* part on a
uniform grid plus jump heights ``u_k`` at anchor points ``c_k``.  The
represented function is ``reg + sum_k u_k H_{c_k}`` with the step
``H_u = -1`` left of ``u``, ``0`` right of ``u`` and ``-1/2`` at ``u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AnchorMismatch, LengthMismatch, NonExpandingMultiplier
from .map_core import Anchors, OrbitClass

GAUSS_X, GAUSS_W = np.polynomial.legendre.leggauss(4)


@dataclass(frozen=True)
class Grid:
    a: float
    b: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid needs at least two cells")

    @property
    def h(self):
        return (self.b - self.a) / self.n

    @property
    def nodes(self):
        return np.linspace(self.a, self.b, self.n + 1)

    def cell_of(self, x):
        idx = np.floor((np.asarray(x, dtype=float) - self.a) / self.h).astype(int)
        return np.clip(idx, 0, self.n - 1)

    def gauss_points(self, lo=None, hi=None):
        """Four Gauss points per cell; returns ``(points, weights)`` of shape ``(n, 4)``."""
        lo = self.nodes[:-1] if lo is None else lo
        hi = self.nodes[1:] if hi is None else hi
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        pts = mid[:, None] + half[:, None] * GAUSS_X[None, :]
        return pts, half[:, None] * GAUSS_W[None, :]

    def to_dict(self):
        return {"a": self.a, "b": self.b, "N": self.n}


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Piecewise-linear function from node values.

    Left of ``a`` it continues with its first value, right of ``b`` it is 0.
    ``cell_means`` optionally keeps exact cell averages (e.g. Ulam output).
    """

    grid: Grid
    values: np.ndarray
    cell_means: np.ndarray | None = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        g = self.grid
        out = np.interp(x, g.nodes, self.values)
        return np.where(x > g.b, 0.0, out)

    def variation(self):
        return float(np.sum(np.abs(np.diff(self.values))))

    def sup(self):
        return float(np.max(np.abs(self.values)))

    def integral(self):
        v = self.values
        return float(self.grid.h * (v.sum() - 0.5 * (v[0] + v[-1])))

    def l1(self):
        """Exact L1 norm of the piecewise-linear interpolant on ``[a, b]``."""
        v0, v1 = self.values[:-1], self.values[1:]
        same = v0 * v1 >= 0
        tot = np.where(same, 0.5 * np.abs(v0 + v1),
                       0.5 * (v0**2 + v1**2) / np.where(same, 1.0, np.abs(v0) + np.abs(v1)))
        return float(self.grid.h * tot.sum())


def heaviside(x, u, tol=0.0):
    x = np.asarray(x, dtype=float)
    return np.where(x < u - tol, -1.0, np.where(x > u + tol, 0.0, -0.5))


def step_sum(x, points, heights, tol=0.0):
    """``sum_k heights[k] * H_{points[k]}(x)`` for many ``x`` at once."""
    x = np.asarray(x, dtype=float)
    if len(points) == 0:
        return np.zeros_like(x)
    order = np.argsort(points)
    p, w = points[order], heights[order]
    # suffix sums: total weight of anchors strictly above x (beyond tol)
    tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    above = np.searchsorted(p, x + tol, side="right")
    near_lo = np.searchsorted(p, x - tol, side="left")
    near = tail[near_lo] - tail[above]
    return -tail[above] - 0.5 * near


@dataclass(frozen=True, eq=False)
class JumpFunction:
    grid: Grid
    values: np.ndarray
    jumps: np.ndarray
    anchors: Anchors
    eta: float = 0.05

    @property
    def regular(self):
        return GridFunction(self.grid, self.values)

    def saltus(self, x):
        return step_sum(x, self.anchors.points, self.jumps, self.anchors.tol)

    def __call__(self, x):
        return self.regular(x) + self.saltus(x)

    def one_sided(self, x, side):
        """Limit from the left (``side=-1``) or right (``+1``) at ``x``."""
        p = self.anchors.points
        tol = self.anchors.tol
        steps = np.where(p > x + tol, -1.0, np.where(p < x - tol, 0.0, -1.0 if side < 0 else 0.0))
        return float(self.regular(x) + np.dot(steps, self.jumps))

    def _check(self, other):
        if self.grid != other.grid or not self.anchors.same_as(other.anchors):
            raise AnchorMismatch("operands live on different grids or anchors")

    def __add__(self, other):
        self._check(other)
        return replace(self, values=self.values + other.values, jumps=self.jumps + other.jumps)

    def __sub__(self, other):
        self._check(other)
        return replace(self, values=self.values - other.values, jumps=self.jumps - other.jumps)

    def __mul__(self, scalar):
        return replace(self, values=self.values * scalar, jumps=self.jumps * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def to_dict(self):
        return {"grid": self.grid.to_dict(), "values": [float(v) for v in self.values],
                "jumps": [{"k": k + 1, "height": float(u)} for k, u in enumerate(self.jumps)],
                "eta": self.eta}


def jump_function_from_dict(data, anchors):
    g = data["grid"]
    grid = Grid(float(g["a"]), float(g["b"]), int(g["N"]))
    jumps = np.zeros(len(anchors))
    for item in data["jumps"]:
        jumps[int(item["k"]) - 1] = float(item["height"])
    return JumpFunction(grid, np.asarray(data["values"], dtype=float), jumps, anchors,
                        float(data.get("eta", 0.05)))


def zero_function(grid, anchors, eta=0.05):
    return JumpFunction(grid, np.zeros(grid.n + 1), np.zeros(len(anchors)), anchors, eta)


def smooth_function(grid, anchors, func, eta=0.05):
    """Continuous function sampled at the nodes, no jumps."""
    return JumpFunction(grid, np.asarray(func(grid.nodes), dtype=float) * np.ones(grid.n + 1),
                        np.zeros(len(anchors)), anchors, eta)


def multiply(phi, func):
    """Product of a jump function with a continuous callable, kept in jump form.

    Jumps scale by ``func(c_k)``; the regular part absorbs
    ``u_k (func(x) - func(c_k)) H_{c_k}(x)``, which is continuous.
    """
    x = phi.grid.nodes
    fx = np.asarray(func(x), dtype=float) * np.ones_like(x)
    fa = np.asarray(func(phi.anchors.points), dtype=float) * np.ones(len(phi.anchors))
    p, tol = phi.anchors.points, phi.anchors.tol
    H = heaviside(x[:, None], p[None, :], tol)
    extra = ((fx[:, None] - fa[None, :]) * H) @ phi.jumps
    return replace(phi, values=fx * phi.values + extra, jumps=phi.jumps * fa)


def saltus_only(phi):
    return replace(phi, values=np.zeros_like(phi.values))


def regular_only(phi):
    return replace(phi, jumps=np.zeros_like(phi.jumps))


def relocate_jumps(phi, target):
    """Move the jumps to new anchor points, keeping regular part and heights."""
    if len(target) != len(phi.anchors):
        raise LengthMismatch(f"{len(phi.anchors)} jumps cannot move to {len(target)} anchors")
    return replace(phi, anchors=target)


# -- norms --------------------------------------------------------------------

def jump_norm(jumps, eta):
    if len(jumps) == 0:
        return 0.0
    k = np.arange(1, len(jumps) + 1)
    return float(np.max((1.0 + eta) ** k * np.abs(jumps)))


def b0_norm(phi):
    """Variation of the regular part (including its drop to 0 at b) plus the weighted sup of jumps."""
    var = phi.regular.variation() + abs(phi.values[-1])
    return var + jump_norm(phi.jumps, phi.eta)


def critical_preimages(fmap, depth, cap=1 << 16):
    """All points ``y`` in ``[a, b]`` with ``f^l(y) = c`` for some ``l <= depth``."""
    level = np.array([fmap.c])
    found = [level]
    top = fmap.critical_value
    for _ in range(depth):
        level = level[(level <= top) & (level >= fmap.a)]
        if level.size == 0 or level.size > cap:
            break
        level = np.concatenate([fmap.inverse(level, +1), fmap.inverse(level, -1)])
        found.append(level)
    pts = np.concatenate(found)
    return pts[(pts >= fmap.a) & (pts <= fmap.b)]


def weak_norm(phi, j, fmap=None):
    """Weak norm: sup of the regular part for ``j = inf``; else an L1 / preimage-set mix."""
    sal = jump_norm(phi.jumps, phi.eta)
    if j == math.inf:
        return phi.regular.sup() + sal
    pts = critical_preimages(fmap, int(j))
    return 0.5 * phi.regular.l1() + 0.5 * float(np.max(np.abs(phi.regular(pts)))) + sal


# -- pairing ------------------------------------------------------------------

@dataclass(frozen=True)
class AtomicMeasure:
    atoms: list = field(default_factory=list)
    density: GridFunction | None = None


def _integrate_cells(grid, test):
    """Integral of ``test`` over each cell (4-point Gauss)."""
    pts, wts = grid.gauss_points()
    return np.sum(np.asarray(test(pts)) * wts, axis=1)


def _primitive(grid, test, x):
    """``int_a^x test`` for points ``x`` in ``[a, b]``."""
    x = np.clip(np.asarray(x, dtype=float), grid.a, grid.b)
    cum = np.concatenate([[0.0], np.cumsum(_integrate_cells(grid, test))])
    i = grid.cell_of(x)
    lo = grid.a + i * grid.h
    pts, wts = grid.gauss_points(lo, x)
    return cum[i] + np.sum(np.asarray(test(pts)) * wts, axis=1)


def pair(phi, test):
    """``int_a^b phi * test``; test is a callable or a GridFunction."""
    if isinstance(phi, AtomicMeasure):
        total = sum(w * float(test(loc)) for loc, w in phi.atoms)
        if phi.density is not None:
            total += pair_regular(phi.density, test)
        return float(total)
    total = pair_regular(phi.regular, test)
    if np.any(phi.jumps != 0):
        prim = _primitive(phi.grid, test, phi.anchors.points)
        total -= float(np.dot(phi.jumps, prim))
    return float(total)


def pair_regular(gf, test):
    grid = gf.grid
    pts, wts = grid.gauss_points()
    return float(np.sum(gf(pts) * np.asarray(test(pts)) * wts))


def integral(phi):
    return pair(phi, lambda x: np.ones_like(x))


# -- transfer operators on the jump space -------------------------------------

def _check_anchors(fmap, anchors):
    if anchors.c != fmap.c:
        raise AnchorMismatch("anchors belong to a different critical point")
    if abs(anchors.points[0] - fmap.critical_value) > 1e-9 * fmap.width:
        raise AnchorMismatch("first anchor is not the critical value")
    k = min(len(anchors), 6)
    for i in range(k):
        j = anchors.successor[i]
        if j >= 0 and abs(float(fmap(anchors.points[i])) - anchors.points[j]) > 1e-8 * fmap.width:
            raise AnchorMismatch("anchors are not the critical orbit of this map")


def _pullbacks(fmap, phi, weighted):
    """Nodal values of the transfer of ``phi`` below ``f(c)``, and the mask used."""
    x = phi.grid.nodes
    top = fmap.critical_value
    inside = x < top - phi.anchors.tol
    xi = x[inside]
    yp, ym = fmap.inverse(xi, +1), fmap.inverse(xi, -1)
    vp, vm = phi(yp), phi(ym)
    if weighted:
        img = vp / np.abs(fmap.derivative(yp, 1)) + vm / np.abs(fmap.derivative(ym, 1))
    else:
        img = vp - vm
    out = np.zeros_like(x)
    out[inside] = img
    return out, inside


def _finish(phi, img, inside, w):
    x = phi.grid.nodes
    reg = np.zeros_like(x)
    reg[inside] = img[inside] - step_sum(x[inside], phi.anchors.points, w, phi.anchors.tol)
    return replace(phi, values=reg, jumps=w)


def transfer_density(fmap, phi):
    """Density transfer operator: sum over preimages weighted by ``1/|f'|``."""
    an = phi.anchors
    _check_anchors(fmap, an)
    img, inside = _pullbacks(fmap, phi, weighted=True)
    w = np.zeros(len(an))
    move = (an.successor >= 0) & ~an.at_critical
    np.add.at(w, an.successor[move], phi.jumps[move] / an.slopes[move])
    dl = abs(fmap.evaluate(fmap.c, 1, "left"))
    dr = abs(fmap.evaluate(fmap.c, 1, "right"))
    w[0] -= phi.one_sided(fmap.c, -1) / dl + phi.one_sided(fmap.c, +1) / dr
    return _finish(phi, img, inside, w)


def transfer_primitive(fmap, phi):
    """Unweighted signed transfer: value at the increasing preimage minus the decreasing one."""
    an = phi.anchors
    _check_anchors(fmap, an)
    img, inside = _pullbacks(fmap, phi, weighted=False)
    w = np.zeros(len(an))
    move = (an.successor >= 0) & ~an.at_critical
    np.add.at(w, an.successor[move], phi.jumps[move])
    w[0] += phi.one_sided(fmap.c, +1) - phi.one_sided(fmap.c, -1)
    return _finish(phi, img, inside, w)


# -- finite / infinite jump vectors ---------------------------------------------

def cycle_multipliers(fmap, anchors):
    """Derivative of ``f^{n1}`` at each point of the postcritical cycle."""
    oc = anchors.orbit_class
    n0, n1 = oc.n0, oc.n1
    cyc = anchors.points[n0 - 1:n0 - 1 + n1]
    out = []
    for j in range(n1):
        x, d = cyc[j], 1.0
        for _ in range(n1):
            d *= float(fmap.derivative(x, 1))
            x = float(fmap(x))
        out.append(d)
    return np.array(out)


def expand_jumps(w, n0, n1, multipliers, length=None):
    """Spread a finite (Markov) jump vector along the unrolled orbit.

    Entry ``n0 + j + l*n1`` (1-based) receives ``w[n0+j] mu_j^{-l} (1 - 1/mu_j)``.
    """
    w = np.asarray(w, dtype=float)
    mu = np.asarray(multipliers, dtype=float)
    if n0 < 1 or n1 < 1 or len(mu) != n1:
        raise ValueError("need n0 >= 1, n1 >= 1 and one multiplier per cycle point")
    if np.any(np.abs(mu) <= 1.0):
        raise NonExpandingMultiplier("cycle multiplier of modulus <= 1")
    if length is None:
        reps = int(math.ceil(40 * math.log(10) / math.log(np.min(np.abs(mu))))) + 1
        length = n0 - 1 + n1 * reps
    v = np.zeros(length)
    v[:n0 - 1] = w[:n0 - 1]
    i = np.arange(n0 - 1, length)
    j, ell = (i - (n0 - 1)) % n1, (i - (n0 - 1)) // n1
    v[i] = w[n0 - 1 + j] * mu[j] ** (-ell.astype(float)) * (1.0 - 1.0 / mu[j])
    return v


def compress_jumps(v, n0, n1):
    """Inverse of :func:`expand_jumps`: sum each residue class of the cycle."""
    v = np.asarray(v, dtype=float)
    w = np.zeros(n0 - 1 + n1)
    w[:n0 - 1] = v[:n0 - 1]
    i = np.arange(n0 - 1, len(v))
    np.add.at(w, n0 - 1 + (i - (n0 - 1)) % n1, v[i])
    return w


def markov_class(n0, n1):
    kind = "periodic" if n0 == 1 else "preperiodic"
    return OrbitClass(kind, n0=n0, n1=n1)
