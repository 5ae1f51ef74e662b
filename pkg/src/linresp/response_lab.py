"""One-parameter families, response curves and the fits run on them."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import Polynomial

from .errors import (BranchInconsistency, ConfigError, NoConvergence,
                     NotHomeomorphism, NotHorizontal, NotTangent)
from .jumpspace import b0_norm, multiply, pair, relocate_jumps
from .map_core import (Conjugator, classify_map, critical_orbit, conjugate_map, jump_anchors, map_from_dict,
                       shifted_map, sup_distance, tent)
from .susceptibility import Observable, psi1, richardson
from .tce import horizontality
from .transfer import density_of, regular_derivative, transfer_density

DEFAULT_KAPPA = 0.5


def dyadic(k_lo=6, k_hi=13, signed=False):
    ts = [2.0 ** -k for k in range(k_lo, k_hi + 1)]
    return sorted([-t for t in ts] + ts) if signed else ts


# -- families ------------------------------------------------------------------

@dataclass(eq=False)
class FamilySpec:
    """A family ``t -> f_t`` through ``f_0 = base`` with its deformation ``v = X o f``."""

    kind: str  # "conjugacy" | "parametric"
    base: object
    map_at: object
    X: object
    dX: object
    t_max: float
    bump: Polynomial | None = None
    name: str = ""

    def conjugator(self, t):
        return Conjugator(self.bump.coef, t) if self.bump is not None else None

    def alpha(self, x):
        """The conjugacy direction ``b`` (the bounded TCE solution for conjugacy families)."""
        return self.bump(np.asarray(x, dtype=float))

    def conjugacy_defect(self, t, samples=1000):
        """``sup |h_t o f - f_t o h_t|`` on a uniform sample."""
        h = self.conjugator(t)
        ft = self.map_at(t)
        x = np.linspace(self.base.a, self.base.b, samples)
        return float(np.max(np.abs(h(self.base(x)) - ft(h(x)))))


def odd_bump(fmap, kappa=DEFAULT_KAPPA):
    """``2 kappa (x-a)(b-x)(c-x)``, the cubic bump odd about ``c`` on a symmetric interval."""
    a, b, c = fmap.a, fmap.b, fmap.c
    return 2.0 * kappa * Polynomial([-a, 1.0]) * Polynomial([b, -1.0]) * Polynomial([c, -1.0])


def _branch_X(fmap, bump, sign):
    db = bump.deriv()
    top = fmap.critical_value
    side = "left" if sign > 0 else "right"

    def value(y):
        z = fmap.inverse(np.minimum(np.asarray(y, dtype=float), top), sign)
        return bump(y) - fmap.derivative(z, 1, side) * bump(z)

    def slope(y):
        z = fmap.inverse(np.minimum(np.asarray(y, dtype=float), top), sign)
        f1 = fmap.derivative(z, 1, side)
        return db(y) - db(z) - fmap.derivative(z, 2, side) * bump(z) / f1

    return value, slope


def conjugacy_family(fmap, bump, t_max=0.05, tol=1e-10):
    """``f_t = h_t o f o h_t^{-1}`` with ``h_t = id + t * bump``."""
    bump = Polynomial(np.asarray(getattr(bump, "coef", bump), dtype=float))
    x = np.linspace(fmap.a, fmap.b, 4001)
    slope = float(np.max(np.abs(bump.deriv()(x)))) if bump.degree() > 0 else 0.0
    if abs(t_max) * slope >= 1.0:
        raise NotHomeomorphism(f"|t_max| sup|b'| = {abs(t_max) * slope:.3g} >= 1")
    Xp, dXp = _branch_X(fmap, bump, +1)
    Xm, _ = _branch_X(fmap, bump, -1)
    y = np.linspace(fmap.a, fmap.critical_value, 2001)
    gap = float(np.max(np.abs(Xp(y) - Xm(y))))
    if gap > tol * max(1.0, float(np.max(np.abs(Xp(y))))):
        raise BranchInconsistency(f"the two branch evaluations of X differ by {gap:.3g}")
    X = Observable(Xp, dXp, "X")
    return FamilySpec("conjugacy", fmap, lambda t: conjugate_map(fmap, bump.coef, t), X,
                      dXp, t_max, bump, name=f"conjugacy[{fmap.name}]")


def tent_slope_family(s0, t_max=0.05):
    """``f_t = tent(s0 + t)``: ``v = min(x, 1-x) = f/s0`` so ``X(y) = y/s0``."""
    s0 = float(s0)
    X = Observable(lambda y: np.asarray(y, dtype=float) / s0,
                   lambda y: np.full_like(np.asarray(y, dtype=float), 1.0 / s0), "y/s0")
    return FamilySpec("parametric", tent(s0), lambda t: tent(s0 + t), X, X.derivative,
                      t_max, name=f"tent_slope[{s0!r}]")


def perturbed_family(family, coeffs, power=2):
    """``g_t = f_t + t**power * p``; for ``power >= 2`` the deformation is unchanged."""
    coeffs = np.asarray(coeffs, dtype=float)
    base = family.base
    p = Polynomial(coeffs)
    if abs(p(base.a)) > 1e-12 or abs(p(base.b)) > 1e-12:
        raise ConfigError("the perturbation must vanish at both endpoints")
    return FamilySpec("parametric", base,
                      lambda t: shifted_map(family.map_at(t), coeffs, t**power),
                      family.X, family.dX, family.t_max, name=f"{family.name}+t^{power}p")


def build_family(config):
    """Family from its JSON description (see the README for the keys)."""
    try:
        kind = config.get("kind", "conjugacy")
        t_max = float(config.get("t_max", 0.05))
        if kind == "parametric":
            rule = config.get("rule", "tent_slope")
            if rule != "tent_slope":
                raise ConfigError(f"unknown parametric rule {rule!r}")
            s0 = config.get("s0", config.get("map", {}).get("slope"))
            return tent_slope_family(s0, t_max)
        if kind != "conjugacy":
            raise ConfigError(f"unknown family kind {kind!r}")
        fmap = map_from_dict(config["map"])
        bump = config.get("bump", {})
        if "coeffs" in bump:
            b = Polynomial(bump["coeffs"])
        else:
            b = odd_bump(fmap, float(bump.get("kappa", DEFAULT_KAPPA)))
        return conjugacy_family(fmap, b, t_max)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad family description: {exc}") from None


# -- response curves -----------------------------------------------------------

def l1_distance(f, g):
    """``int |f - g|`` for two jump functions on one grid, split at every anchor."""
    grid = f.grid
    cuts = np.unique(np.concatenate([grid.nodes, f.anchors.points, g.anchors.points]))
    cuts = cuts[(cuts >= grid.a) & (cuts <= grid.b)]
    lo, hi = cuts[:-1], cuts[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    pts, wts = grid.gauss_points(lo, hi)
    return float(np.sum(np.abs(f(pts) - g(pts)) * wts))


@dataclass
class ResponseCurve:
    t_values: np.ndarray
    R_values: np.ndarray
    rho_l1_dist: np.ndarray
    N_used: int
    tol_used: float
    skipped: list = field(default_factory=list)
    conjugacy_defect: float = 0.0
    masses: np.ndarray | None = None

    def rows(self):
        return [(float(t), float(r), float(d))
                for t, r, d in zip(self.t_values, self.R_values, self.rho_l1_dist)]


def _density_at(family, t, n, kmax, tol):
    ft = family.map_at(t)
    ft.validate()
    oc = classify_map(ft)
    anchors = jump_anchors(ft, oc, kmax=None if oc.markov else kmax)
    try:
        return density_of(ft, n, oc, anchors), oc
    except NoConvergence as exc:
        raise NoConvergence(f"t={t!r}: {exc}", exc.iterations) from None


def response_curve(family, phi, t_values, n=4096, tol=1e-13, base=None, skip_periodic=False,
                   workers=1):
    """``R(t) = int phi rho_t`` and ``||rho_t - rho_0||_1`` along the family."""
    base = base if base is not None else density_of(family.base, n)
    kmax = len(base.anchors)
    ts = [float(t) for t in t_values]

    def one(t):
        if t == 0.0:
            return base, None
        return _density_at(family, t, n, kmax, tol)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, ts))
    else:
        results = [one(t) for t in ts]
    R0 = pair(base.density, phi)
    kept_t, R, dist, skipped, mass = [], [], [], [], []
    for t, (dec, oc) in zip(ts, results):
        if skip_periodic and oc is not None and oc.kind == "periodic":
            skipped.append(t)
            continue
        kept_t.append(t)
        mass.append(pair(dec.density, np.ones_like))
        if t == 0.0:
            R.append(R0)
            dist.append(0.0)
        else:
            R.append(pair(dec.density, phi))
            dist.append(l1_distance(dec.density, base.density))
    defect = 0.0
    if family.kind == "conjugacy":
        defect = max([family.conjugacy_defect(t) for t in kept_t if t != 0.0], default=0.0)
    return ResponseCurve(np.array(kept_t), np.array(R), np.array(dist), n, tol, skipped, defect,
                         np.array(mass))


# -- fits -----------------------------------------------------------------------

@dataclass
class FitReport:
    slope: float = math.nan
    slope_err: float = math.nan
    tlnt_coeff: float = math.nan
    lin_coeff: float = math.nan
    model_preference: float = math.nan
    tlnt_stderr: float = math.nan
    local_tlnt: list = field(default_factory=list)
    sign_consistent: bool = False
    l1_ratios: list = field(default_factory=list)
    defined: bool = True

    def to_dict(self):
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                for k, v in self.__dict__.items()}


def symmetric_slope(R_plus, R_minus, steps):
    """Richardson-extrapolated central differences; returns ``(slope, error, table)``."""
    d = [(p - m) / (2.0 * h) for p, m, h in zip(R_plus, R_minus, steps)]
    value, table = richardson(d, ratio=2.0, order=2)
    err = abs(table[1][-1] - table[1][-2]) if len(table[1]) > 1 else abs(d[-1] - d[-2])
    return value, err, d


@dataclass
class LinearResponseReport:
    fit: FitReport
    psi1: object
    differences: list
    abs_err: float
    rel_err: float
    scale: float
    curve: ResponseCurve

    def to_dict(self):
        return {"fit": self.fit.to_dict(), "psi1": self.psi1.to_dict(),
                "central_differences": [float(v) for v in self.differences],
                "abs_err": self.abs_err, "rel_err": self.rel_err, "scale": self.scale}


def linear_response_report(family, phi, h=1e-2, n=4096, psi_n=8192, j_tol=1e-8, base=None,
                           psi_base=None, workers=1):
    """Slope of ``R`` at 0 from ``+-h, +-h/2, +-h/4`` against the resummed ``Psi_1``."""
    psi_base = psi_base if psi_base is not None else density_of(family.base, psi_n)
    rep = horizontality(family.base, family.X, decomposition=psi_base)
    if abs(rep.J) > j_tol:
        raise NotHorizontal(f"J = {rep.J:.6g}; the family is transversal")
    steps = [h, h / 2, h / 4]
    ts = [s * sgn for s in steps for sgn in (1, -1)]
    curve = response_curve(family, phi, [0.0] + ts, n, base=base, workers=workers)
    R = dict(zip(curve.t_values, curve.R_values))
    slope, err, diffs = symmetric_slope([R[s] for s in steps], [R[-s] for s in steps], steps)
    p = psi1(family.base, psi_base, family.X, family.dX, phi)
    scale = max(abs(p.psi1), 0.01)
    fit = FitReport(slope=slope, slope_err=err, defined=True)
    return LinearResponseReport(fit, p, diffs, abs(slope - p.psi1), abs(slope - p.psi1) / scale,
                                scale, curve)


def weak_quotients(family, t, degree=6, n=4096, base=None):
    """Central quotients ``int q_j (rho_t - rho_-t) / 2t`` for Legendre ``q_j`` on ``[a, b]``.

    Diagnostic only: a measure-level view of the derivative with no pass/fail rule.
    """
    f = family.base
    tests = [np.polynomial.Legendre.basis(j, domain=[f.a, f.b]) for j in range(degree + 1)]
    base = base if base is not None else density_of(f, n)
    kmax = len(base.anchors)
    plus, _ = _density_at(family, t, n, kmax, 1e-13)
    minus, _ = _density_at(family, -t, n, kmax, 1e-13)
    return [(pair(plus.density, q) - pair(minus.density, q)) / (2.0 * t) for q in tests]


def _lstsq(A, y):
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return coef, float(res @ res)


def fit_signature(t, y):
    """Fit ``y`` on ``{t}`` and on ``{t, t ln(1/t)}``; local coefficients from neighbouring pairs."""
    t, y = np.asarray(t, dtype=float), np.asarray(y, dtype=float)
    if len(t) < 2:
        return FitReport(defined=False)
    tl = t * np.log(1.0 / t)
    _, rss_lin = _lstsq(t[:, None], y)
    A = np.column_stack([t, tl])
    coef, rss_two = _lstsq(A, y)
    stderr = math.nan
    if len(t) > 2:
        sigma2 = rss_two / (len(t) - 2)
        cov = sigma2 * np.linalg.inv(A.T @ A)
        stderr = float(math.sqrt(max(cov[1, 1], 0.0)))
    local = []
    for i in range(len(t) - 1):
        M = A[i:i + 2]
        local.append(float(np.linalg.solve(M, y[i:i + 2])[1]))
    signs = np.sign(local)
    consistent = bool(len(local) > 0 and np.all(signs == signs[0]) and signs[0] != 0)
    pref = rss_lin / rss_two if rss_two > 0 else math.inf
    return FitReport(tlnt_coeff=float(coef[1]), lin_coeff=float(coef[0]), model_preference=pref,
                     tlnt_stderr=stderr, local_tlnt=local, sign_consistent=consistent)


def nonlip_report(family, phi, t_values=None, n=4096, base=None, workers=1):
    """``t ln(1/t)`` signature of ``|R(t) - R(0)|`` on positive dyadic ``t``."""
    t_values = dyadic(7, 12) if t_values is None else t_values
    ts = sorted({float(t) for t in t_values if t > 0})
    curve = response_curve(family, phi, [0.0] + ts, n, base=base, skip_periodic=True,
                           workers=workers)
    t = curve.t_values[1:]
    dR = np.abs(curve.R_values[1:] - curve.R_values[0])
    fit = fit_signature(t, dR)
    if len(t):
        fit.l1_ratios = [float(d / (s * math.log(1.0 / s))) for s, d in zip(t, curve.rho_l1_dist[1:])]
    return fit, curve


def centered_bump_observable(fmap, density, points, width):
    """Smooth ``phi`` equal to 1 near the given points, mean-zero for ``density``."""
    pts = np.asarray(points, dtype=float)

    def raw(x):
        x = np.asarray(x, dtype=float)
        u = (x[..., None] - pts) / width
        return np.clip(1.0 - u * u, 0.0, None).__pow__(3).sum(axis=-1)

    def raw_d(x):
        x = np.asarray(x, dtype=float)
        u = (x[..., None] - pts) / width
        return (-6.0 * u * np.clip(1.0 - u * u, 0.0, None) ** 2 / width).sum(axis=-1)

    mean = pair(density, raw)
    return Observable(lambda x: raw(x) - mean, raw_d, "bumps")


def pinned_observable(fmap, density, n_points=20, width=0.005):
    """Observable close to 1 at the first postcritical points and mean-zero overall."""
    orbit = critical_orbit(fmap, n_points).points[1:n_points + 1]
    return centered_bump_observable(fmap, density, orbit, width)


# -- tangent pairs --------------------------------------------------------------

@dataclass
class TangentReport:
    t_values: list
    distances: list
    envelope: list
    envelope_order: float
    exponent: float
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def loglog_slope(t, y):
    t, y = np.asarray(t, dtype=float), np.asarray(y, dtype=float)
    keep = (t > 0) & (y > 0)
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(t[keep]), np.log(y[keep]), 1)[0])


def tangent_pair_experiment(family, partner, t_values=None, n=4096, min_order=1.75, workers=1):
    """Fit ``||rho_t - rho~_t||_1 ~ t^xi`` for two families with ``sup|f_t - g_t| = O(t^2)``."""
    t_values = dyadic(5, 10) if t_values is None else t_values
    ts = sorted(float(t) for t in t_values if t > 0)
    env = [sup_distance(family.map_at(t), partner.map_at(t)) for t in ts]
    order = loglog_slope(ts, env)
    if not math.isnan(order) and order < min_order:
        raise NotTangent(f"sup|f_t - g_t| scales like t^{order:.3f}")
    base = density_of(family.base, n)
    kmax = len(base.anchors)

    def dist(t):
        if max(env[ts.index(t)], 0.0) == 0.0:
            return 0.0
        d1, _ = _density_at(family, t, n, kmax, 1e-13)
        d2, _ = _density_at(partner, t, n, kmax, 1e-13)
        return l1_distance(d1.density, d2.density)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            dists = list(pool.map(dist, ts))
    else:
        dists = [dist(t) for t in ts]
    xi = loglog_slope(ts, dists)
    passed = bool(all(d == 0.0 for d in dists) or xi > 1.0)
    return TangentReport(ts, dists, env, order, xi, passed)


# -- transfer derivative along a conjugacy family ------------------------------------

@dataclass
class PtDerivativeReport:
    t_values: list
    errors: list
    exponent: float
    D_norm: float

    def to_dict(self):
        return dict(self.__dict__)


def derivative_direction(dec, X, dX):
    """``-X' rho_sal - X' rho_reg - X rho_reg'`` as a jump function on the anchors of ``dec``."""
    out = multiply(dec.density, dX)
    nodes = dec.density.grid.nodes
    extra = np.asarray(X(nodes), dtype=float) * regular_derivative(dec)
    out = replace(out, values=out.values + extra)
    return -out


def transported(family, dec, t):
    """``G_t^{-1} L_{1,t} G_t`` applied to the base density: moved out, transferred, moved back."""
    ft = family.map_at(t)
    h = family.conjugator(t)
    an = dec.anchors
    pts = h(an.points)
    pts = np.where(an.at_critical, an.c, pts)
    off = pts != an.c
    slopes = np.full(len(pts), np.nan)
    second = np.full(len(pts), np.nan)
    slopes[off] = ft.derivative(pts[off], 1)
    second[off] = ft.derivative(pts[off], 2)
    moved = relocate_jumps(dec.density, an.relocated(pts, slopes, second))
    return relocate_jumps(transfer_density(ft, moved), an)


def pt_derivative_experiment(family, dec, t_values=None):
    """``||P_t(rho_0) - rho_0 - t D||_{B_0}`` on dyadic ``t`` and its fitted order."""
    if family.kind != "conjugacy":
        raise ConfigError("the transported operator needs a conjugacy family")
    t_values = dyadic(6, 12) if t_values is None else t_values
    D = derivative_direction(dec, family.X, family.dX)
    rho = dec.density
    errs = []
    for t in t_values:
        if t == 0:
            errs.append(0.0)
            continue
        errs.append(b0_norm(transported(family, dec, t) - rho - D * t))
    ts = [float(t) for t in t_values]
    return PtDerivativeReport(ts, errs, loglog_slope(np.abs(ts), errs), b0_norm(D))


# -- atomic limit of the relocation ---------------------------------------------------

@dataclass
class AtomicLimitReport:
    t_values: list
    quotients: list
    target: float
    errors: list
    shrinking: bool

    def to_dict(self):
        return dict(self.__dict__)


def atomic_limit(family, dec, psi, t_values=(1e-2, 5e-3, 2.5e-3, 1.25e-3), n=None):
    """``(1/t) pair(rho_t - G_t rho_t, psi)`` against ``-sum alpha(c_k) s_k psi(c_k)``."""
    n = n or dec.density.grid.n
    an = dec.anchors
    pts = an.points
    target = -float(np.sum(family.alpha(pts) * dec.s * psi(pts)))
    quot = []
    for t in t_values:
        dt, _ = _density_at(family, t, n, len(an), 1e-13)
        back = relocate_jumps(dt.density, dt.anchors.relocated(pts))
        quot.append((pair(dt.density, psi) - pair(back, psi)) / t)
    errs = [abs(q - target) for q in quot]
    shrinking = all(errs[i + 1] < errs[i] for i in range(len(errs) - 1))
    return AtomicLimitReport(list(t_values), quot, target, errs, shrinking)

