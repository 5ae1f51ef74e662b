"""Piecewise expanding unimodal maps, critical orbits and their classification."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .errors import (
    AboveCriticalValue,
    AmbiguousSide,
    InvalidMap,
    NotExpanding,
    NotHomeomorphism,
    OrbitHitsCritical,
    OutOfDomain,
)

# an orbit point closer than this (relative to b - a) to c counts as c itself
HIT_TOL = 1e-12
INVERSE_TOL = 1e-13
SAMPLE_MARGIN = 1.01
INFINITE = math.inf


def _solve_monotone(func, dfunc, y, lo, hi, increasing, max_iter=60, tol=INVERSE_TOL):
    """Vectorised bisection followed by a safeguarded Newton polish."""
    y = np.asarray(y, dtype=float)
    lo = np.full(y.shape, float(lo))
    hi = np.full(y.shape, float(hi))
    sign = 1.0 if increasing else -1.0
    n_bisect = max_iter - 6
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        above = sign * (func(mid) - y) > 0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        if np.all(hi - lo < tol):
            break
    x = 0.5 * (lo + hi)
    for _ in range(6):
        d = dfunc(x)
        step = (func(x) - y) / np.where(d == 0, np.inf, d)
        x_new = np.clip(x - step, lo, hi)
        done = np.all(np.abs(x_new - x) < 0.1 * tol)
        x = x_new
        if done:
            break
    return x


class Branch:
    """One monotone piece of a unimodal map on ``[lo, hi]``.

    Subclasses provide values and derivatives; the default inverse brackets
    the root on the branch interval extended outward (away from ``c``) by a
    quarter of its length, which is the validated extension neighbourhood.
    """

    lo: float
    hi: float
    increasing: bool
    linear = False

    def __call__(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, order=1):
        raise NotImplementedError

    def _bracket(self):
        ext = 0.25 * (self.hi - self.lo)
        return (self.lo - ext, self.hi) if self.increasing else (self.lo, self.hi + ext)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        lo, hi = self._bracket()
        ylo, yhi = float(self(lo)), float(self(hi))
        ymin, ymax = min(ylo, yhi), max(ylo, yhi)
        if np.any(y < ymin - 1e-12) or np.any(y > ymax + 1e-12):
            raise OutOfDomain("value outside the range of the extended branch")
        return _solve_monotone(self, lambda x: self.derivative(x, 1), y, lo, hi, self.increasing)


class PolyBranch(Branch):
    """Polynomial branch; ``coeffs`` are in ascending order."""

    def __init__(self, coeffs, lo, hi):
        self.poly = Polynomial(np.asarray(coeffs, dtype=float))
        self.lo, self.hi = float(lo), float(hi)
        self._derivs = [self.poly] + [self.poly.deriv(k) for k in (1, 2, 3)]
        mid = 0.5 * (self.lo + self.hi)
        self.increasing = bool(self._derivs[1](mid) > 0)
        self.linear = self.poly.degree() <= 1

    def derivative(self, x, order=1):
        return self._derivs[order](np.asarray(x, dtype=float))

    def inverse(self, y):
        if self.linear:
            c0, c1 = (list(self.poly.coef) + [0.0])[:2]
            return (np.asarray(y, dtype=float) - c0) / c1
        return super().inverse(y)

    @property
    def coeffs(self):
        return [float(v) for v in self.poly.coef]


class Conjugator:
    """Near-identity change of coordinates ``h_t(x) = x + t * bump(x)``."""

    def __init__(self, bump_coeffs, t):
        self.bump = Polynomial(np.asarray(bump_coeffs, dtype=float))
        self.dbump = self.bump.deriv(1)
        self.d2bump = self.bump.deriv(2)
        self.t = float(t)

    def check(self, a, b, samples=2001):
        xs = np.linspace(a, b, samples)
        if np.min(1.0 + self.t * self.dbump(xs)) <= 0:
            raise NotHomeomorphism(f"h_t is not monotone for t={self.t}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x + self.t * self.bump(x)

    def d1(self, x):
        return 1.0 + self.t * self.dbump(np.asarray(x, dtype=float))

    def d2(self, x):
        return self.t * self.d2bump(np.asarray(x, dtype=float))

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        x = y.copy()
        for _ in range(50):
            step = (self(x) - y) / self.d1(x)
            x = x - step
            if np.all(np.abs(step) < 1e-16 * (1 + np.abs(x))):
                break
        return x


class ConjugatedBranch(Branch):
    """The branch ``h o g o h^{-1}`` of a conjugated map."""

    def __init__(self, base, conj):
        self.base, self.conj = base, conj
        self.lo, self.hi = float(conj(base.lo)), float(conj(base.hi))
        self.increasing = base.increasing

    def derivative(self, x, order=1):
        h = self.conj
        z = h.inverse(x)
        g = self.base(z)
        if order == 0:
            return h(g)
        dz = 1.0 / h.d1(z)
        g1 = self.base.derivative(z, 1)
        if order == 1:
            return h.d1(g) * g1 * dz
        if order == 2:
            g2 = self.base.derivative(z, 2)
            d2z = -h.d2(z) * dz**3
            return h.d2(g) * (g1 * dz) ** 2 + h.d1(g) * (g2 * dz**2 + g1 * d2z)
        eps = 1e-4 * (self.hi - self.lo)
        return (self.derivative(x + eps, 2) - self.derivative(x - eps, 2)) / (2 * eps)

    def inverse(self, y):
        h = self.conj
        return h(self.base.inverse(h.inverse(y)))


class ShiftedBranch(Branch):
    """The branch ``g + scale * p`` for a polynomial ``p``."""

    def __init__(self, base, coeffs, scale):
        self.base = base
        self.extra = Polynomial(np.asarray(coeffs, dtype=float))
        self.scale = float(scale)
        self.lo, self.hi = base.lo, base.hi
        self.increasing = base.increasing

    def derivative(self, x, order=1):
        x = np.asarray(x, dtype=float)
        extra = self.extra.deriv(order) if order else self.extra
        return self.base.derivative(x, order) + self.scale * extra(x)


@dataclass(frozen=True)
class UnimodalMap:
    """Continuous map of ``[a, b]`` with branches meeting at the critical point ``c``."""

    a: float
    b: float
    c: float
    left: Branch
    right: Branch
    name: str = ""

    @property
    def critical_value(self):
        return float(self.left(self.c))

    @property
    def width(self):
        return self.b - self.a

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= self.c, self.left(x), self.right(x))

    def derivative(self, x, order=1, side="auto"):
        """Vectorised derivative; at ``x == c`` a side must be given."""
        x = np.asarray(x, dtype=float)
        at_c = x == self.c
        if order >= 1 and side == "auto" and np.any(at_c):
            raise AmbiguousSide("derivative at the critical point needs a side")
        if side == "left":
            use_left = x <= self.c
        elif side == "right":
            use_left = x < self.c
        else:
            use_left = x < self.c
        return np.where(use_left, self.left.derivative(x, order), self.right.derivative(x, order))

    def evaluate(self, x, order=0, side="auto"):
        """Scalar value of f or a one-sided derivative, with domain checks."""
        x = float(x)
        tol = 1e-14 * self.width
        if x < self.a - tol or x > self.b + tol:
            raise OutOfDomain(f"x={x} outside [{self.a}, {self.b}]")
        if order == 0:
            return float(self(x))
        if x == self.c:
            if side == "auto":
                raise AmbiguousSide("derivative at the critical point needs a side")
            branch = self.left if side == "left" else self.right
            return float(branch.derivative(x, order))
        return float(self.derivative(x, order))

    def inverse(self, y, sign):
        """Inverse branch: ``sign=+1`` lands in ``[a, c]``, ``-1`` in ``[c, b]``."""
        y = np.asarray(y, dtype=float)
        if np.any(y > self.critical_value + 1e-12 * self.width):
            raise AboveCriticalValue("value above f(c)")
        y = np.minimum(y, self.critical_value)
        branch = self.left if sign > 0 else self.right
        x = branch.inverse(y)
        # the top of both branches is c itself
        return np.where(y == self.critical_value, self.c, x)

    def iterate(self, x, n):
        x = np.asarray(x, dtype=float)
        for _ in range(n):
            x = self(x)
        return x

    def validate(self, tol=1e-10, samples=4001):
        if not self.a < self.c < self.b:
            raise InvalidMap("need a < c < b")
        if abs(self(self.a) - self.a) > tol * self.width or abs(self(self.b) - self.a) > tol * self.width:
            raise InvalidMap("need f(a) = f(b) = a")
        if abs(self.left(self.c) - self.right(self.c)) > tol * self.width:
            raise InvalidMap("branches do not meet at c")
        if self.critical_value > self.b + tol * self.width:
            raise InvalidMap("f(c) exceeds b")
        xl = np.linspace(self.a, self.c, samples)
        xr = np.linspace(self.c, self.b, samples)
        dl, dr = self.left.derivative(xl, 1), self.right.derivative(xr, 1)
        if np.any(dl <= 0) or np.any(dr >= 0):
            raise InvalidMap("branches are not strictly monotone")
        if min(np.min(np.abs(dl)), np.min(np.abs(dr))) <= 1.0:
            raise NotExpanding("inf |f'| <= 1")
        return self

    def to_dict(self):
        if isinstance(self.left, PolyBranch) and isinstance(self.right, PolyBranch):
            return {"a": self.a, "b": self.b, "c": self.c,
                    "left": {"poly": self.left.coeffs}, "right": {"poly": self.right.coeffs}}
        raise InvalidMap("only polynomial maps serialise")


def polynomial_map(a, b, c, left_coeffs, right_coeffs, name=""):
    return UnimodalMap(float(a), float(b), float(c), PolyBranch(left_coeffs, a, c),
                       PolyBranch(right_coeffs, c, b), name).validate()


def tent(slope):
    """``x -> slope * min(x, 1 - x)`` on ``[0, 1]``."""
    s = float(slope)
    return polynomial_map(0.0, 1.0, 0.5, [0.0, s], [s, -s], name=f"tent({s!r})")


def skew_tent(s_plus, s_minus):
    """Slopes ``s_plus`` on the left, ``-s_minus`` on the right, f(0)=f(1)=0."""
    sp, sm = float(s_plus), float(s_minus)
    c = sm / (sp + sm)
    return polynomial_map(0.0, 1.0, c, [0.0, sp], [sm, -sm], name=f"skew_tent({sp!r},{sm!r})")


def smooth_tent(slope, bend):
    """Tent with quadratic branches: slopes range over ``slope -/+ bend/2``."""
    s, e = float(slope), float(bend)
    # left: s x + e x (1/2 - x); right: s (1 - x) + e (1 - x)(x - 1/2)
    left = [0.0, s + 0.5 * e, -e]
    right = [s - 0.5 * e, -s + 1.5 * e, -e]
    return polynomial_map(0.0, 1.0, 0.5, left, right, name=f"smooth_tent({s!r},{e!r})")


def conjugate_map(fmap, bump_coeffs, t):
    """``h_t o f o h_t^{-1}`` with ``h_t(x) = x + t * bump(x)``; bump must vanish at a, b, c."""
    conj = Conjugator(bump_coeffs, t)
    conj.check(fmap.a, fmap.b)
    for p in (fmap.a, fmap.b, fmap.c):
        if abs(conj.bump(p)) > 1e-12:
            raise InvalidMap("bump must vanish at a, b and c")
    return UnimodalMap(fmap.a, fmap.b, fmap.c, ConjugatedBranch(fmap.left, conj),
                       ConjugatedBranch(fmap.right, conj), name=f"{fmap.name}^h[{t!r}]")


def shifted_map(fmap, coeffs, scale):
    """``f + scale * p``; p must vanish at a and b so the normalisation survives."""
    return UnimodalMap(fmap.a, fmap.b, fmap.c, ShiftedBranch(fmap.left, coeffs, scale),
                       ShiftedBranch(fmap.right, coeffs, scale), name=f"{fmap.name}+{scale!r}p")


def map_from_dict(desc):
    """Build a map from its JSON description."""
    if "family" in desc:
        fam = desc["family"]
        if fam == "tent":
            return tent(desc["slope"])
        if fam == "skew_tent":
            return skew_tent(desc["s_plus"], desc["s_minus"])
        if fam == "smooth_tent":
            return smooth_tent(desc["slope"], desc["bend"])
        raise InvalidMap(f"unknown family {fam!r}")
    try:
        return polynomial_map(desc["a"], desc["b"], desc["c"], desc["left"]["poly"], desc["right"]["poly"])
    except KeyError as exc:
        raise InvalidMap(f"map description lacks {exc}") from None


# -- critical orbit -----------------------------------------------------------

@dataclass
class CriticalOrbit:
    """Orbit ``c_0 = c, c_1, ..., c_K`` with derivative products along it.

    ``cum_derivs[k]`` is the derivative of ``f^k`` at ``c_1``; it is only
    available up to the first return to ``c`` (``hit_index``).
    """

    points: np.ndarray
    slopes: np.ndarray
    cum_derivs: np.ndarray
    hit_index: int | None
    c: float

    @property
    def K(self):
        return len(self.points) - 1

    def cum_deriv(self, k):
        if k >= len(self.cum_derivs):
            if self.hit_index is not None and k >= self.hit_index:
                raise OrbitHitsCritical(self.hit_index)
            raise IndexError(f"orbit horizon {self.K} too short for k={k}")
        return self.cum_derivs[k]


def critical_orbit(fmap, K):
    """Iterate the critical point ``K`` times; snap exact returns to ``c``."""
    if K < 1:
        raise ValueError("K must be at least 1")
    tol = HIT_TOL * fmap.width
    pts = np.empty(K + 1)
    pts[0] = fmap.c
    hit = None
    for k in range(1, K + 1):
        x = float(fmap(pts[k - 1]))
        if abs(x - fmap.c) < tol:
            x = fmap.c
            if hit is None:
                hit = k
        pts[k] = x
    stop = K if hit is None else hit
    slopes = np.full(K + 1, np.nan)
    off = pts != fmap.c
    slopes[off] = fmap.derivative(pts[off], 1)
    cum = np.ones(stop)
    if stop > 1:
        with np.errstate(over="ignore"):
            cum[1:] = np.cumprod(slopes[1:stop])
    return CriticalOrbit(pts, slopes, cum, hit, fmap.c)


@dataclass(frozen=True)
class OrbitClass:
    kind: str  # "periodic" | "preperiodic" | "none"
    n0: int | None = None
    n1: int | None = None
    horizon: int | None = None

    @property
    def markov(self):
        return self.kind != "none"

    @property
    def N_f(self):
        if self.kind == "periodic":
            return self.n1
        if self.kind == "preperiodic":
            return self.n0 + self.n1 - 1
        return INFINITE

    @property
    def M_f(self):
        return self.n1 if self.kind == "periodic" else INFINITE

    def to_dict(self):
        return {"kind": self.kind, "n0": self.n0, "n1": self.n1, "N_f": _jsonable(self.N_f),
                "M_f": _jsonable(self.M_f), "horizon": self.horizon}


def _jsonable(v):
    return "inf" if v == INFINITE else v


def classify_orbit(orbit, tol=1e-9, width=1.0, confirm=True):
    """Find the first return of the orbit to one of its earlier points.

    With ``confirm`` a candidate cycle must repeat once more within ``tol``;
    chance near-returns of a chaotic orbit separate again at the expansion
    rate, while genuine cycles do not.
    """
    eps = tol * width
    pts = orbit.points
    seen = [(float(pts[0]), 0)]
    for m in range(1, orbit.K + 1):
        x = float(pts[m])
        i = bisect.bisect_left(seen, (x - eps, -1))
        best = None
        while i < len(seen) and seen[i][0] < x + eps:
            if best is None or seen[i][1] < best:
                best = seen[i][1]
            i += 1
        if best is not None:
            n1 = m - best
            if confirm and (m + n1 > orbit.K or np.any(
                    np.abs(pts[m + 1:m + n1 + 1] - pts[best + 1:best + n1 + 1]) >= eps)):
                best = None
            if best is not None:
                if best == 0:
                    return OrbitClass("periodic", n0=1, n1=n1)
                return OrbitClass("preperiodic", n0=best, n1=n1)
        bisect.insort(seen, (x, m))
    return OrbitClass("none", horizon=orbit.K)


def _precise_points(fmap, K):
    """Critical orbit of a polynomial map in enough precision to stay exact to double."""
    import mpmath

    lam = expansion_constants(fmap).Lambda_hat
    bits = 80 + int(math.ceil(K * math.log2(max(lam, 2.0))))
    ctx = mpmath.mp.clone()
    ctx.prec = bits
    left = [ctx.mpf(v) for v in fmap.left.coeffs][::-1]
    right = [ctx.mpf(v) for v in fmap.right.coeffs][::-1]
    c = ctx.mpf(fmap.c)
    x = c
    out = np.empty(K + 1)
    out[0] = fmap.c
    for k in range(1, K + 1):
        x = ctx.polyval(left if x <= c else right, x)
        out[k] = float(x)
    return out


def rounding_horizon(fmap, tol=1e-9):
    """Steps after which a double-precision orbit can no longer resolve ``tol``."""
    lam = expansion_constants(fmap).Lambda_hat
    return int(math.log(tol / 1e-16) / math.log(lam))


def classify_map(fmap, horizon=10_000, tol=1e-9):
    """Classify the critical orbit of ``fmap`` over ``horizon`` iterates.

    Polynomial maps are iterated in extended precision so the whole horizon
    is meaningful; other maps are limited to the double-precision horizon.
    """
    if isinstance(fmap.left, PolyBranch) and isinstance(fmap.right, PolyBranch):
        pts = _precise_points(fmap, horizon)
        hit = np.abs(pts - fmap.c) < HIT_TOL * fmap.width
        hit[0] = False
        pts[hit] = fmap.c
        orbit = CriticalOrbit(pts, np.array([]), np.array([1.0]), None, fmap.c)
    else:
        orbit = critical_orbit(fmap, min(horizon, rounding_horizon(fmap, tol)))
    return classify_orbit(orbit, tol, fmap.width)


def is_good(fmap, orbit_class):
    """Return ``(good, diagnostics)``; periodic c needs period multipliers above 2."""
    if orbit_class.kind != "periodic":
        return True, {"reason": "critical point not periodic"}
    n1 = orbit_class.n1
    orbit = critical_orbit(fmap, n1)
    inner = float(np.prod(np.abs(orbit.slopes[1:n1]))) if n1 > 1 else 1.0
    one_sided = [abs(fmap.evaluate(fmap.c, 1, s)) for s in ("left", "right")]
    products = [inner * v for v in one_sided]
    return min(products) > 2.0, {"period_products": products}


# -- expansion constants ------------------------------------------------------

@dataclass(frozen=True)
class ExpansionConstants:
    lambda_hat: float
    Lambda_hat: float
    rigorous: bool
    steps: int = 1


def _branch_extremes(branch):
    xs = [branch.lo, branch.hi]
    if isinstance(branch, PolyBranch):
        d2 = branch.poly.deriv(2)
        if d2.degree() >= 1 and np.any(d2.coef != 0):
            for r in d2.roots():
                if abs(r.imag) < 1e-14 and branch.lo < r.real < branch.hi:
                    xs.append(r.real)
        vals = np.abs(branch.derivative(np.array(xs), 1))
        return float(vals.min()), float(vals.max()), True
    xs = np.linspace(branch.lo, branch.hi, 4097)
    vals = np.abs(branch.derivative(xs, 1))
    return float(vals.min()), float(vals.max()), False


def expansion_constants(fmap, steps=1, samples=4097):
    """One-step surrogates ``1/inf|f'|`` and ``sup|f'|``; optional n-step refinement."""
    lo_l, hi_l, ex_l = _branch_extremes(fmap.left)
    lo_r, hi_r, ex_r = _branch_extremes(fmap.right)
    inf_d, sup_d = min(lo_l, lo_r), max(hi_l, hi_r)
    exact = ex_l and ex_r
    if inf_d <= 1.0:
        raise NotExpanding(f"inf |f'| = {inf_d} <= 1")
    if steps > 1:
        xs = np.linspace(fmap.a, fmap.b, samples)
        xs = xs[np.abs(xs - fmap.c) > 1e-12]
        logd = np.zeros_like(xs)
        y = xs.copy()
        for _ in range(steps):
            near = np.abs(y - fmap.c) < 1e-14
            y = np.where(near, y + 1e-13, y)
            logd += np.log(np.abs(fmap.derivative(y, 1)))
            y = fmap(y)
        inf_d = max(inf_d, float(np.exp(logd.min() / steps)) / SAMPLE_MARGIN)
        exact = False
    if exact:
        return ExpansionConstants(1.0 / inf_d, sup_d, True, steps)
    return ExpansionConstants(SAMPLE_MARGIN / inf_d, SAMPLE_MARGIN * sup_d, False, steps)


def itinerary_distance_bound(theta, delta, n, diameter=1.0):
    """Distance bound for points of two close maps sharing ``n`` itinerary symbols."""
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    return diameter * theta**n + delta / (1.0 - theta)


def shared_itinerary_length(f, g, xf, xg, n_max):
    """Number of leading steps on which the orbits of ``xf`` and ``xg`` stay on the same side of c."""
    for k in range(n_max + 1):
        if (xf - f.c) * (xg - g.c) < 0:
            return k
        xf, xg = float(f(xf)), float(g(xg))
    return n_max + 1


def sup_distance(f, g, samples=4001):
    xs = np.linspace(f.a, f.b, samples)
    return float(np.max(np.abs(f(xs) - g(xs))))


# -- jump anchors -------------------------------------------------------------

@dataclass(frozen=True)
class Anchors:
    """Postcritical points carrying jumps, with the transport rule between them.

    ``successor[k]`` is the index of the anchor ``f(points[k])`` or -1 when the
    image is dropped (truncation) or handled through the value at ``c``.
    """

    points: np.ndarray
    slopes: np.ndarray
    second: np.ndarray
    successor: np.ndarray
    c: float
    orbit_class: OrbitClass = field(default_factory=lambda: OrbitClass("none"))
    tol: float = HIT_TOL

    def __len__(self):
        return len(self.points)

    @property
    def at_critical(self):
        return self.points == self.c

    def same_as(self, other, tol=1e-12):
        return (len(self) == len(other) and self.c == other.c
                and np.allclose(self.points, other.points, rtol=0, atol=tol))

    def relocated(self, points, slopes=None, second=None):
        points = np.asarray(points, dtype=float)
        return Anchors(points, self.slopes if slopes is None else slopes,
                       self.second if second is None else second, self.successor, self.c,
                       self.orbit_class, self.tol)


def default_kmax(consts, floor=1e-12):
    return int(math.ceil(math.log(floor) / math.log(consts.lambda_hat)))


def jump_anchors(fmap, orbit_class=None, kmax=None):
    """Anchors ``c_1 .. c_K`` with ``K = N_f`` for Markov maps, else ``kmax``."""
    if orbit_class is None:
        orbit_class = classify_map(fmap)
    if orbit_class.markov:
        K = orbit_class.N_f
        orbit = critical_orbit(fmap, K + 1)
        pts = orbit.points[1:K + 1].copy()
        succ = np.arange(1, K + 1)
        if orbit_class.kind == "periodic":
            pts[-1] = fmap.c
            succ[-1] = -1
        else:
            succ[-1] = orbit_class.n0 - 1
    else:
        if kmax is None:
            kmax = default_kmax(expansion_constants(fmap))
        orbit = critical_orbit(fmap, kmax)
        pts = orbit.points[1:kmax + 1].copy()
        succ = np.arange(1, kmax + 1)
        succ[-1] = -1
        if orbit.hit_index is not None:
            raise OrbitHitsCritical(orbit.hit_index)
    off = pts != fmap.c
    slopes = np.full(len(pts), np.nan)
    second = np.full(len(pts), np.nan)
    slopes[off] = fmap.derivative(pts[off], 1)
    second[off] = fmap.derivative(pts[off], 2)
    return Anchors(pts, slopes, second, succ, fmap.c, orbit_class, HIT_TOL * fmap.width)


def jump_profile(anchors):
    """Ratios ``s_k / s_1`` forced by jump transport (closures solved exactly)."""
    K = len(anchors)
    if anchors.orbit_class.markov:
        T = np.zeros((K, K))
        for k in range(K):
            j = anchors.successor[k]
            if j >= 0:
                T[j, k] += 1.0 / anchors.slopes[k]
        rhs = np.zeros(K)
        rhs[0] = 1.0
        return np.linalg.solve(np.eye(K) - T, rhs)
    r = np.ones(K)
    for k in range(K - 1):
        r[k + 1] = r[k] / anchors.slopes[k]
    return r
