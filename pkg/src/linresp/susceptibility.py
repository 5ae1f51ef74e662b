"""Susceptibility series, its resummation at z = 1 and the identities around it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotHorizontal
from .jumpspace import (JumpFunction, heaviside, integral, multiply, pair, saltus_only,
                        transfer_density, transfer_primitive)
from .map_core import expansion_constants, jump_anchors
from .tce import composed, horizontality, orbit_sequence, solve_tce
from .transfer import neumann_solve, regular_derivative, spectral_gap_estimate, ulam_matrix


@dataclass(frozen=True)
class Observable:
    value: object
    derivative: object
    name: str = "phi"

    def __call__(self, x):
        return np.asarray(self.value(np.asarray(x, dtype=float)), dtype=float) * np.ones(np.shape(x))


def polynomial(coeffs, name=None):
    """Observable from ascending polynomial coefficients."""
    p = np.polynomial.Polynomial(coeffs)
    dp = p.deriv()
    return Observable(lambda x: p(x) + 0.0 * np.asarray(x), lambda x: dp(x) + 0.0 * np.asarray(x),
                      name or f"poly{list(coeffs)}")


def constant(value=1.0):
    return polynomial([value], name=f"const{value}")


def centered(phi, density):
    """``phi - int phi rho_0``; same derivative."""
    m = pair(density, phi)
    return Observable(lambda x: phi(x) - m, phi.derivative, phi.name)


def extended_density(fmap, dec, kmax):
    """Density jump function on a longer truncated orbit (non-Markov maps only)."""
    an = dec.anchors
    if an.orbit_class.markov or len(an) >= kmax:
        return dec.density
    longer = jump_anchors(fmap, an.orbit_class, kmax)
    s = np.zeros(kmax)
    s[:len(an)] = dec.s
    for k in range(len(an), kmax):
        s[k] = s[k - 1] / longer.slopes[k - 1]
    return JumpFunction(dec.density.grid, dec.density.values, s, longer, dec.density.eta)


# -- series -----------------------------------------------------------------------

@dataclass
class SusceptibilitySeries:
    kappa: np.ndarray
    X_id: str
    phi_id: str
    period: int | None = None

    def partial(self, z, n=None):
        k = self.kappa if n is None else self.kappa[:n]
        return float(np.polyval(k[::-1], z))

    def value(self, z):
        """``Psi(z)``; for asymptotically periodic coefficients the tail is summed exactly."""
        k = self.kappa
        if self.period:
            p = self.period
            N = len(k) - p
            head = float(np.polyval(k[:N][::-1], z))
            cyc = k[N:N + p]
            tail = z**N * float(np.sum(cyc * z ** np.arange(p))) / (1.0 - z**p)
            return head + tail
        return self.partial(z)

    def remainder_bound(self, z):
        n = len(self.kappa)
        return abs(self.kappa[-1]) * abs(z) ** n / (1.0 - abs(z))

    def periodicity_gap(self):
        if not self.period:
            return math.inf
        p = self.period
        return float(np.max(np.abs(self.kappa[-p:] - self.kappa[-2 * p:-p])))


def series(fmap, dec, X, phi, n_terms=200, X_id="X"):
    """``kappa_n = int L0^n(X rho_0) phi'`` for ``n < n_terms``."""
    base = extended_density(fmap, dec, n_terms + 20)
    g = multiply(base, X)
    kappa = np.empty(n_terms)
    for n in range(n_terms):
        kappa[n] = pair(g, phi.derivative)
        if n + 1 < n_terms:
            g = transfer_primitive(fmap, g)
    oc = dec.anchors.orbit_class
    period = oc.n1 if oc.markov else None
    return SusceptibilitySeries(kappa, X_id, phi.name, period)


# -- resummation at z = 1 ----------------------------------------------------------

@dataclass
class Psi1Report:
    term1: float
    term1_alpha: float
    term2: float
    psi1: float
    psi1_alpha: float
    J: float
    tail_bounds: dict = field(default_factory=dict)
    psi1_elegant: float | None = None
    neumann_iterations: int = 0

    def to_dict(self):
        out = {k: v for k, v in self.__dict__.items() if k != "tail_bounds"}
        out["tail_bounds"] = dict(self.tail_bounds)
        return out


def first_term_partial_sums(fmap, dec, X, phi, n, z=1.0):
    """Terms of ``-sum_j phi(c_j) sum_{k<=min(j,M)} z^{j-k} s_1 X(c_k)/(f^{k-1})'(c_1)``."""
    an = dec.anchors
    oc = an.orbit_class
    s1 = dec.s[0]
    if oc.kind == "periodic":
        m = oc.n1
        seq = orbit_sequence(fmap, an, m)
        pts = np.array([seq.points[j % m] for j in range(n)])
        a = s1 * np.asarray(X(seq.points), dtype=float) * seq.inv_cum
        inner = np.empty(n)
        for j in range(n):
            k = np.arange(min(j + 1, m))
            inner[j] = np.sum(z ** (j - k) * a[k])
    else:
        seq = orbit_sequence(fmap, an, n)
        pts = seq.points
        a = s1 * np.asarray(X(pts), dtype=float) * seq.inv_cum
        inner = np.empty(n)
        acc = 0.0
        for j in range(n):
            acc = z * acc + a[j]
            inner[j] = acc
    return -np.asarray(phi(pts)) * inner, pts


def _term1(fmap, dec, X, phi, lam, sup_alpha):
    oc = dec.anchors.orbit_class
    if oc.kind == "periodic":
        terms, _ = first_term_partial_sums(fmap, dec, X, phi, oc.n1)
        return float(np.sum(terms)), 0.0
    sup_phi = float(np.max(np.abs(phi(np.linspace(fmap.a, fmap.b, 2001)))))
    scale = abs(dec.s[0]) * sup_phi * max(sup_alpha, 1e-300)
    n = max(4, int(math.ceil(math.log(1e-17 / scale) / math.log(lam))) if scale > 0 else 4)
    terms, _ = first_term_partial_sums(fmap, dec, X, phi, n)
    return float(np.sum(terms)), scale * lam**n / (1.0 - lam)


def _term1_alpha(dec, alpha, phi):
    pts = dec.anchors.points
    return -float(np.sum(alpha(pts) * dec.s * phi(pts)))


def resolvent_argument(fmap, dec, X, dX, density=None):
    """``X' rho_sal + (X rho_reg)'`` as a jump function."""
    rho = dec.density if density is None else density
    part1 = multiply(saltus_only(rho), dX)
    grid = rho.grid
    x = grid.nodes
    dreg = regular_derivative(dec)
    full = np.asarray(dX(x)) * dec.rho_reg.values + np.asarray(X(x)) * dreg
    an = rho.anchors
    jumps = np.asarray(X(an.points)) * dec.s_prime
    H = heaviside(x[:, None], an.points[None, :], an.tol)
    part2 = JumpFunction(grid, full - H @ jumps, jumps, an, rho.eta)
    return part1 + part2


def gap_of(fmap, n=1024):
    return spectral_gap_estimate(ulam_matrix(fmap, n)).tau


def psi1(fmap, dec, X, dX, phi, tce=None, tau=None, j_tol=1e-8, tol=1e-13, consts=None):
    """Resummed susceptibility by the orbit-sum and the alpha-weighted first terms."""
    consts = consts or expansion_constants(fmap)
    tce = tce or solve_tce(fmap, composed(X, fmap), 0.0, consts=consts)
    rep = horizontality(fmap, X, dec.anchors, dec, consts=consts, tce=tce)
    sup_x = float(np.max(np.abs(X(np.linspace(fmap.a, fmap.b, 2001)))))
    if abs(rep.J) > j_tol * max(1.0, sup_x):
        raise NotHorizontal(f"weighted total jump J = {rep.J:.6g} is not zero")
    lam = consts.lambda_hat
    sup_alpha = float(np.max(np.abs(tce(np.linspace(fmap.a, fmap.b, 513)))))
    # the response formula is stated for observables with zero mean under rho_0
    phi = centered(phi, dec.density)
    t1, t1_tail = _term1(fmap, dec, X, phi, lam, sup_alpha)
    t1a = _term1_alpha(dec, tce, phi)
    eta = resolvent_argument(fmap, dec, X, dX)
    drift = integral(eta)
    eta = eta - dec.density * drift
    tau = gap_of(fmap) if tau is None else tau
    res = neumann_solve(fmap, eta, dec.density, tau, tol=tol)
    t2 = -pair(res.solution, phi)
    t1a_tail = 0.0 if dec.anchors.orbit_class.markov else abs(dec.s[-1]) * sup_alpha * lam / (1 - lam)
    tails = {"term1": t1_tail, "term1_alpha": t1a_tail,
             "term2": res.tail_bound * float(np.max(np.abs(phi(np.linspace(fmap.a, fmap.b, 513))))),
             "mean_drift": abs(drift), "J": rep.J_tail}
    return Psi1Report(t1, t1a, t2, t1 + t2, t1a + t2, rep.J, tails, None, res.iterations)


# -- abelian limit ------------------------------------------------------------------

def richardson(values, ratio=2.0, order=1):
    """Richardson table for values at steps h, h/ratio, ...; returns the last diagonal entry."""
    table = [np.asarray(values, dtype=float)]
    p = order
    while len(table[-1]) > 1:
        prev = table[-1]
        fac = ratio**p
        table.append((fac * prev[1:] - prev[:-1]) / (fac - 1.0))
        p += 1
    return float(table[-1][0]), table


def rational_first_term(fmap, dec, X, phi, z):
    """First term of the susceptibility for a periodic critical point, closed form in ``z``."""
    an = dec.anchors
    oc = an.orbit_class
    if oc.kind != "periodic":
        return None
    m = oc.n1
    seq = orbit_sequence(fmap, an, m)
    a = dec.s[0] * np.asarray(X(seq.points), dtype=float) * seq.inv_cum
    ph = np.asarray(phi(seq.points))
    # j < m: direct; j >= m: phi(c_j) z^j A(z), A(z) = sum_k a_k z^{-k}
    head = sum(-ph[j - 1] * sum(z ** (j - k) * a[k - 1] for k in range(1, j + 1))
               for j in range(1, m))
    P = lambda w: sum(ph[(m + r - 1) % m] * w ** (m + r) for r in range(m))
    A = lambda w: sum(a[k - 1] * w ** (-k) for k in range(1, m + 1))
    if z < 1.0:
        return float(head - P(z) * A(z) / (1.0 - z**m))
    dA = sum(-k * a[k - 1] for k in range(1, m + 1))
    # A(1) = 0 for horizontal X; the pole cancels and the limit is P(1) A'(1) / m
    return float(head + P(1.0) * dA / m) if abs(A(1.0)) < 1e-9 else math.nan


@dataclass
class AbelianReport:
    z: list
    values: list
    bounds: list
    extrapolated: float
    psi1: float | None
    gap: float | None
    periodicity_gap: float
    rational_at_one: float | None = None


def abelian_scan(ser, psi1_value=None, z_list=None, rational=None):
    if z_list is None:
        z_list = [1.0 - 2.0**-k for k in range(4, 11)]
    vals = [ser.value(z) for z in z_list]
    bounds = [0.0 if ser.period else ser.remainder_bound(z) for z in z_list]
    steps = np.array([1.0 - z for z in z_list])
    ratio = float(steps[0] / steps[1]) if len(steps) > 1 else 2.0
    ext = richardson(vals, ratio)[0] if len(vals) > 1 else vals[0]
    gap = None if psi1_value is None else abs(ext - psi1_value)
    return AbelianReport(list(z_list), vals, bounds, ext, psi1_value, gap,
                         ser.periodicity_gap(), rational)


# -- divergence when J != 0 ---------------------------------------------------------

@dataclass
class DivergenceTable:
    first: np.ndarray
    resolvent_sal: np.ndarray
    combined: np.ndarray
    regular: np.ndarray
    regular_ratio: float
    drift_slope: float
    predicted_slope: float
    predicted: np.ndarray | None = None

    @property
    def drift_remainder(self):
        """Combined sums minus the predicted Birkhoff drift; converges when the prediction holds."""
        return self.combined - self.predicted


def divergence_probe(fmap, dec, X, dX, phi, j_max=60):
    """Partial sums of the two divergent pieces, their sum and the convergent part."""
    n = j_max
    first_terms, _ = first_term_partial_sums(fmap, dec, X, phi, n)
    sal = multiply(saltus_only(dec.density), dX)
    full = resolvent_argument(fmap, dec, X, dX)
    reg = full - sal
    sal_terms, reg_terms = np.empty(n), np.empty(n)
    g, r = sal, reg
    for j in range(n):
        g = transfer_density(fmap, g)
        r = transfer_density(fmap, r)
        sal_terms[j] = -pair(g, phi)
        reg_terms[j] = -pair(r, phi)
    first = np.cumsum(first_terms)
    rs = np.cumsum(sal_terms)
    comb = np.cumsum(first_terms + sal_terms)
    regc = np.cumsum(reg_terms)
    # terms tend to -(int reg) * (int phi rho_0); their increments decay at the mixing rate
    inc = np.abs(np.diff(reg_terms))
    keep = np.nonzero(inc > 1e-13 * max(float(np.max(np.abs(reg_terms))), 1e-300))[0]
    ratio = float(np.exp(np.polyfit(keep, np.log(inc[keep]), 1)[0])) if keep.size > 2 else 0.0
    J = float(np.dot(dec.s, X(dec.anchors.points)))
    mean_phi = pair(dec.density, phi)
    half = np.arange(n // 2, n)
    slope = float(np.polyfit(half, comb[half], 1)[0])
    # each step adds -J int phi rho_0 from the resolvent piece and J phi(c_j) on average from the orbit sum
    orbit_phi = np.asarray(phi(_orbit_points(fmap, dec, n)), dtype=float)
    drift = J * np.cumsum(mean_phi - orbit_phi)
    pred = float(J * (np.mean(orbit_phi) - mean_phi))
    return DivergenceTable(first, rs, comb, regc, ratio, slope, -pred, drift)


def _orbit_points(fmap, dec, n):
    return orbit_sequence(fmap, dec.anchors, n).points if not dec.anchors.orbit_class.markov \
        else first_term_partial_sums(fmap, dec, lambda y: np.zeros_like(y), constant(), n)[1]


# -- pointwise identities --------------------------------------------------------------

def signed_pullback(fmap, g, x, depth=1):
    """``L0^depth g`` at points ``x`` by explicit preimage trees, evaluated in one batch."""
    x = np.asarray(x, dtype=float)
    pts = x.ravel()
    owner = np.arange(pts.size)
    sign = np.ones(pts.size)
    top = fmap.critical_value
    for _ in range(depth):
        inside = pts < top
        pts, owner, sign = pts[inside], owner[inside], sign[inside]
        yp, ym = fmap.inverse(pts, +1), fmap.inverse(pts, -1)
        pts = np.concatenate([yp, ym])
        owner = np.concatenate([owner, owner])
        sign = np.concatenate([sign, -sign])
    out = np.zeros(x.size)
    if pts.size:
        np.add.at(out, owner, sign * np.asarray(g(pts), dtype=float))
    return out.reshape(x.shape)


def weighted_pullback(fmap, g, x):
    """``L1 g`` at points ``x``."""
    x = np.asarray(x, dtype=float)
    inside = x < fmap.critical_value
    out = np.zeros_like(x)
    xi = x[inside]
    yp, ym = fmap.inverse(xi, +1), fmap.inverse(xi, -1)
    out[inside] = (g(yp) / np.abs(fmap.derivative(yp, 1))
                   + g(ym) / np.abs(fmap.derivative(ym, 1)))
    return out


def off_anchor_samples(fmap, anchors, n=997, margin=1e-7):
    x = np.linspace(fmap.a, fmap.b, n + 2)[1:-1]
    x = x + 0.1234567 * (fmap.b - fmap.a) / (n + 1)
    x = x[(x > fmap.a) & (x < fmap.b)]
    d = np.min(np.abs(x[:, None] - anchors.points[None, :]), axis=1)
    return x[d > margin * fmap.width]


@dataclass
class FunnyReport:
    sup_residual: float
    jump_mismatch: float
    telescoping: float
    samples: int


def funny_check(fmap, dec, X, tce=None, telescope=10):
    """``(id - L0)(alpha rho_0) = X rho_0`` off anchors, plus the jump heights."""
    tce = tce or solve_tce(fmap, composed(X, fmap), 0.0)
    rho = dec.density
    x = off_anchor_samples(fmap, dec.anchors)
    g = lambda y: tce(y) * rho(y)
    lhs = g(x) - signed_pullback(fmap, g, x)
    rhs = X(x) * rho(x)
    sup_res = float(np.max(np.abs(lhs - rhs)))
    ar = multiply(rho, tce)
    img = transfer_primitive(fmap, ar)
    jm = float(np.max(np.abs((ar.jumps - img.jumps) - multiply(rho, X).jumps)))
    xs = x[:: max(1, len(x) // 97)]
    h = lambda y: X(y) * rho(y)
    left = sum(signed_pullback(fmap, h, xs, k) for k in range(telescope + 1))
    right = g(xs) - signed_pullback(fmap, g, xs, telescope + 1)
    return FunnyReport(sup_res, jm, float(np.max(np.abs(left - right))), len(x))


@dataclass
class ElegantReport:
    psi1: float
    integral: float
    difference: float
    scale: float
    ttce_residual: float | None
    ttce_scale: float | None


def elegant_check(fmap, dec, phi, alpha, psi1_value, X=None, dX=None, d_alpha=None):
    """Compare ``int phi' alpha rho_0`` with the resummed value.

    With ``d_alpha`` the differentiated equation
    ``(id - L1)(alpha' rho_0 + alpha rho_reg') = X' rho_0 + X rho_reg'`` is checked off anchors.
    """
    val = pair(multiply(dec.density, alpha), phi.derivative)
    diff = abs(val - psi1_value)
    scale = max(abs(psi1_value), 0.01)
    res = sc = None
    if d_alpha is not None and X is not None and dX is not None:
        rho = dec.density
        dreg = dec.rho_reg.grid
        dr_vals = regular_derivative(dec)
        dreg_f = lambda y: np.interp(y, dreg.nodes, dr_vals)
        g = lambda y: d_alpha(y) * rho(y) + alpha(y) * dreg_f(y)
        x = off_anchor_samples(fmap, dec.anchors)
        lhs = g(x) - weighted_pullback(fmap, g, x)
        rhs = dX(x) * rho(x) + X(x) * dreg_f(x)
        res = float(np.max(np.abs(lhs - rhs)))
        sc = float(np.max(np.abs(rhs))) or 1.0
    return ElegantReport(psi1_value, val, diff, scale, res, sc)
