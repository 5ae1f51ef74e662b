"""Twisted cohomological equation, horizontality and critical-orbit derivatives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBump, MissingDecomposition, OrbitHitsCritical
from .map_core import expansion_constants, jump_anchors

HIT_TOL = 1e-11


def _sup(func, fmap, samples=4001):
    x = np.linspace(fmap.a, fmap.b, samples)
    return float(np.max(np.abs(func(x))))


def default_depth(sup_v, lam, target=1e-10):
    if sup_v == 0.0:
        return 1
    n = math.log(target * (1.0 - lam) / sup_v) / math.log(lam) - 1.0
    return max(1, int(math.ceil(n)))


@dataclass(frozen=True, eq=False)
class TceSolution:
    """Truncated series solution of ``v = alpha∘f - f' alpha``."""

    fmap: object
    v: object
    omega: float
    depth: int
    tail_bound: float
    lambda_hat: float
    Lambda_hat: float

    def __call__(self, x):
        f, c = self.fmap, self.fmap.c
        x = np.asarray(x, dtype=float)
        pos = x.copy()
        deriv = np.ones_like(pos)
        total = np.zeros_like(pos)
        tol = HIT_TOL * f.width
        start = np.abs(pos - c) <= tol
        total[start] = self.omega
        alive = ~start
        for j in range(self.depth + 1):
            if j:
                hit = alive & (np.abs(pos - c) <= tol)
                total[hit] += self.omega / deriv[hit]
                alive &= ~hit
            if not alive.any():
                break
            p = np.where(alive, pos, f.a)
            deriv = deriv * np.where(alive, f.derivative(p, 1), 1.0)
            total[alive] -= np.asarray(self.v(pos[alive])) / deriv[alive]
            pos = np.where(alive, f(p), pos)
        return total

    def residual(self, x):
        """``|v(x) - alpha(f(x)) + f'(x) alpha(x)|`` at off-critical points."""
        x = np.asarray(x, dtype=float)
        f = self.fmap
        return np.abs(self.v(x) - self(f(x)) + f.derivative(x, 1) * self(x))

    @property
    def residual_bound(self):
        return 2.0 * self.tail_bound * (1.0 + self.Lambda_hat)


def solve_tce(fmap, v, omega=0.0, depth=None, consts=None):
    consts = consts or expansion_constants(fmap)
    lam = consts.lambda_hat
    sup_v = _sup(v, fmap)
    if depth is None:
        depth = default_depth(sup_v, lam)
    if depth < 1:
        raise ValueError("depth must be at least 1")
    tail = sup_v * lam ** (depth + 1) / (1.0 - lam)
    return TceSolution(fmap, v, float(omega), int(depth), tail, lam, consts.Lambda_hat)


def composed(X, fmap):
    """``v = X∘f`` as a callable."""
    return lambda x: X(fmap(np.asarray(x, dtype=float)))


# -- postcritical sums -------------------------------------------------------------

@dataclass(frozen=True)
class OrbitSequence:
    """``c_1..c_n`` with ``f'(c_k)`` and ``1/(f^{k-1})'(c_1)``; stops at ``c`` for periodic orbits."""

    points: np.ndarray
    slopes: np.ndarray
    inv_cum: np.ndarray


def orbit_sequence(fmap, anchors, n):
    """First ``n`` postcritical points, following the anchors' cycle when finite."""
    pts, slopes = [], []
    if anchors.orbit_class.markov:
        k = 0
        while len(pts) < n:
            pts.append(anchors.points[k])
            if anchors.at_critical[k]:
                slopes.append(np.nan)
                break
            slopes.append(anchors.slopes[k])
            k = anchors.successor[k]
    else:
        x = float(fmap.critical_value)
        for _ in range(n):
            if x == fmap.c:
                raise OrbitHitsCritical(len(pts) + 1)
            pts.append(x)
            slopes.append(float(fmap.derivative(x, 1)))
            x = float(fmap(x))
    slopes = np.array(slopes)
    cum = np.concatenate([[1.0], np.cumprod(slopes[:-1])])
    return OrbitSequence(np.array(pts), slopes, 1.0 / cum)


def _series_length(lam, scale, target=1e-16):
    if scale == 0.0:
        return 1
    return max(2, int(math.ceil(math.log(target / scale) / math.log(lam))) + 2)


@dataclass
class HorizontalityReport:
    defect: float
    J: float | None
    J_closed: float | None
    abelian2: float
    alpha_c1: float
    defect_tail: float
    J_tail: float
    abelian2_tail: float
    terms: int

    def to_dict(self):
        return {k: (None if v is None else float(v)) for k, v in self.__dict__.items()}


def horizontality(fmap, X, anchors=None, decomposition=None, want_J=True, consts=None, tce=None):
    """Defect of ``v = X∘f``, total weighted jump and the second abelian moment."""
    consts = consts or expansion_constants(fmap)
    if anchors is None:
        anchors = decomposition.anchors if decomposition is not None else jump_anchors(fmap)
    lam = consts.lambda_hat
    sup_x = _sup(X, fmap)
    n = _series_length(lam, sup_x / (1.0 - lam) ** 2)
    oc = anchors.orbit_class
    seq = orbit_sequence(fmap, anchors, n + 1)
    Xc = np.asarray(X(seq.points), dtype=float)
    periodic = oc.kind == "periodic"
    if periodic:
        m = oc.n1
        defect = float(np.sum(Xc[:m] * seq.inv_cum[:m]))
        tail = 0.0
        ab2 = float(np.sum(np.arange(1, m) * Xc[1:m] * seq.inv_cum[1:m]))
        ab2_tail = 0.0
    else:
        defect = float(np.sum(Xc[:n] * seq.inv_cum[:n]))
        tail = sup_x * lam**n / (1.0 - lam)
        j = np.arange(1, n)
        ab2 = float(np.sum(j * Xc[1:n] * seq.inv_cum[1:n]))
        ab2_tail = sup_x * n * lam**n / (1.0 - lam) ** 2
    sol = tce or solve_tce(fmap, composed(X, fmap), 0.0, consts=consts)
    alpha_c1 = float(sol(np.array([seq.points[0]]))[0])
    J = J_closed = None
    J_tail = sol.tail_bound
    if want_J:
        if decomposition is None:
            raise MissingDecomposition("the weighted total jump needs the density's jumps")
        s = decomposition.s
        J = float(np.dot(s, X(anchors.points)))
        if not oc.markov:
            J_tail += abs(s[-1]) * sup_x * lam / (1.0 - lam)
        J_closed = float(s[0] * (Xc[0] - alpha_c1))
    return HorizontalityReport(defect, J, J_closed, ab2, alpha_c1, tail, J_tail, ab2_tail, n)


def defect_of(fmap, X, anchors, consts=None):
    return horizontality(fmap, X, anchors, want_J=False, consts=consts).defect


def default_bump(fmap, width=None, center=None):
    """Smooth bump centred at ``f(c)`` (or ``center``), zero at ``a``."""
    c1 = fmap.critical_value if center is None else center
    w = width if width is not None else 0.5 * min(c1 - fmap.a, 0.25)

    def bump(y):
        u = (np.asarray(y, dtype=float) - c1) / w
        return np.clip(1.0 - u * u, 0.0, None) ** 3

    def slope(y):
        u = (np.asarray(y, dtype=float) - c1) / w
        return -6.0 * u * np.clip(1.0 - u * u, 0.0, None) ** 2 / w

    bump.derivative = slope
    return bump


def horizontal_projection(fmap, X, bump=None, anchors=None, consts=None):
    """Remove the defect of ``X∘f`` along ``bump``; returns ``(X_h, coefficient)``."""
    if anchors is None:
        anchors = jump_anchors(fmap)
    bump = bump or default_bump(fmap)
    db = defect_of(fmap, bump, anchors, consts)
    if abs(db) < 1e-10:
        raise DegenerateBump(f"bump has defect {db:.3g}")
    coef = defect_of(fmap, X, anchors, consts) / db

    def projected(y):
        return X(y) - coef * bump(y)

    return projected, coef


def abelian_projection(fmap, X, bumps, anchors=None, consts=None):
    """Remove both the defect and the second abelian moment using two bumps."""
    if anchors is None:
        anchors = jump_anchors(fmap)
    cols = []
    for g in (X, *bumps):
        r = horizontality(fmap, g, anchors, want_J=False, consts=consts)
        cols.append((r.defect, r.abelian2))
    A = np.array(cols[1:]).T
    if abs(np.linalg.det(A)) < 1e-12:
        raise DegenerateBump("bumps do not control defect and second moment independently")
    coef = np.linalg.solve(A, np.array(cols[0]))

    def projected(y):
        return X(y) - coef[0] * bumps[0](y) - coef[1] * bumps[1](y)

    return projected, coef


# -- critical orbit derivatives ---------------------------------------------------

def beta_closed(X, points, slopes, k):
    """``sum_{j<k} X(c_{k-j}) (f^j)'(c_{k-j})``."""
    total = 0.0
    for j in range(k):
        i = k - j - 1
        total += float(X(points[i])) * float(np.prod(slopes[i:i + j]))
    return total


def beta_sequence(X, points, slopes, kmax):
    return np.array([beta_closed(X, points, slopes, k) for k in range(1, kmax + 1)])


def twisted_residuals(X, points, slopes, kmax):
    """Scaled residual of ``beta_{k+1} - f'(c_k) beta_k - X(c_{k+1})`` for ``k < kmax``."""
    b = beta_sequence(X, points, slopes, kmax)
    Xc = np.asarray(X(points[:kmax]), dtype=float)
    res = b[1:] - slopes[:kmax - 1] * b[:-1] - Xc[1:]
    scale = np.maximum(1.0, np.abs(slopes[:kmax - 1] * b[:-1]))
    return np.abs(res) / scale


@dataclass
class OrbitDerivativeReport:
    k: int
    beta: float
    t_values: list
    quotients: list
    errors: list
    bounds: list
    horizons: list
    Y: float
    gamma: float
    within_bound: bool
    linear_ratio: list = field(default_factory=list)


def control_constant(fmap, X, consts, drift=0.0):
    """``Y`` from the orbit-control estimate, with ``sup|X|/(1-lambda)``."""
    x = np.linspace(fmap.a, fmap.b, 4001)
    off = x[x != fmap.c]
    f2 = float(np.max(np.abs(fmap.derivative(off, 2))))
    return max(drift, f2, _sup(X, fmap) / (1.0 - consts.lambda_hat), 1.0)


def orbit_horizon(t, Y, gamma, cum_derivs, symmetric):
    """Largest ``M`` with ``6 Y^3 |t| |(f^M)'(c_1)|`` below the threshold."""
    thr = 1.0 if symmetric else gamma / 2.0
    ok = 6.0 * Y**3 * abs(t) * np.abs(cum_derivs) < thr
    if not ok[0]:
        return 0
    return int(np.argmin(ok)) if not ok.all() else len(ok)


def orbit_derivative(fmap, map_at, X, k, t_values=(1e-3, 1e-4, 1e-5), drift=0.0, consts=None):
    """``beta_k`` against finite differences of the perturbed critical orbits."""
    consts = consts or expansion_constants(fmap)
    kk = max(k, 40)
    pts, slopes = [], []
    x = float(fmap.critical_value)
    for i in range(kk + 1):
        if x == fmap.c:
            raise OrbitHitsCritical(i + 1)
        pts.append(x)
        slopes.append(float(fmap.derivative(x, 1)))
        x = float(fmap(x))
    pts, slopes = np.array(pts), np.array(slopes)
    beta = beta_closed(X, pts, slopes, k)
    cum = np.cumprod(slopes)  # (f^j)'(c_1), j = 1..
    gamma = float(np.min(np.abs(pts - fmap.c)))
    symmetric = abs(fmap.evaluate(fmap.c, 1, "left") + fmap.evaluate(fmap.c, 1, "right")) < 1e-12
    Y = control_constant(fmap, X, consts, drift)
    quot, errs, bnds, hor = [], [], [], []
    for t in t_values:
        ft = map_at(t)
        y = float(ft.critical_value)
        for _ in range(k - 1):
            y = float(ft(y))
        q = (y - pts[k - 1]) / t
        quot.append(q)
        errs.append(abs(q - beta))
        bnds.append(abs(t) * 6.0 * Y**2 * abs(cum[k - 1]))
        hor.append(orbit_horizon(t, Y, gamma, np.concatenate([[1.0], cum]), symmetric))
    within = all(e <= b for e, b, m in zip(errs, bnds, hor) if k <= m)
    ratios = [errs[i] / errs[i + 1] if errs[i + 1] > 0 else math.inf for i in range(len(errs) - 1)]
    return OrbitDerivativeReport(k, beta, list(t_values), quot, errs, bnds, hor, Y, gamma,
                                 within, ratios)
