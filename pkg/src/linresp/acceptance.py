"""End-to-end acceptance checks; shared by the CLI and the test suite."""

import math
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .jumpspace import (Grid, b0_norm, compress_jumps, cycle_multipliers, expand_jumps,
                        relocate_jumps, smooth_function, transfer_density, transfer_primitive)
from .map_core import critical_orbit, expansion_constants, jump_anchors, smooth_tent, tent
from .response_lab import (atomic_limit, conjugacy_family, dyadic, linear_response_report,
                           nonlip_report, odd_bump, perturbed_family, pinned_observable,
                           pt_derivative_experiment, response_curve, tangent_pair_experiment,
                           tent_slope_family)
from .susceptibility import (Observable, abelian_scan, constant, elegant_check, funny_check,
                             polynomial, psi1, series)
from .tce import (abelian_projection, beta_sequence, composed, default_bump, horizontality,
                  orbit_derivative, solve_tce, twisted_residuals)
from .transfer import density_of, invariant_density, ulam_matrix

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass
class CheckResult:
    id: int
    name: str
    passed: bool
    value: float
    limit: str
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} [{self.id:2d}] {self.name}: {self.value:.6g} ({self.limit}) {self.seconds:.1f}s"

    def to_dict(self):
        return {"id": self.id, "name": self.name, "passed": self.passed, "value": self.value,
                "limit": self.limit, "seconds": self.seconds, "detail": _plain(self.detail)}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


class Context:
    """Densities and families reused across checks."""

    def __init__(self, grid=4096, psi_grid=8192, seed=20240917, samples=100_000_000):
        self.grid, self.psi_grid, self.seed, self.samples = grid, psi_grid, seed, samples
        self.masses = []

    @cached_property
    def tent19(self):
        return tent(1.9)

    @cached_property
    def tent_golden(self):
        return tent(GOLDEN)

    @cached_property
    def dec19(self):
        return density_of(self.tent19, self.grid)

    @cached_property
    def dec19_fine(self):
        return density_of(self.tent19, self.psi_grid)

    @cached_property
    def dec_golden(self):
        return density_of(self.tent_golden, self.psi_grid)

    @cached_property
    def conj19(self):
        return conjugacy_family(self.tent19, odd_bump(self.tent19))

    @cached_property
    def slope19(self):
        return tent_slope_family(1.9)

    @cached_property
    def pinned(self):
        return pinned_observable(self.tent19, self.dec19.density)

    def curve(self, family, phi, ts, **kw):
        c = response_curve(family, phi, ts, self.grid, base=self.dec19, **kw)
        self.masses.extend(float(m) for m in c.masses)
        return c


SQUARE = polynomial([0.0, 0.0, 1.0], "x^2")


def _timed(fn):
    def run(ctx):
        t0 = time.perf_counter()
        res = fn(ctx)
        res.seconds = time.perf_counter() - t0
        return res
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


@_timed
def check_tent2_density(ctx):
    t0 = time.perf_counter()
    rho = invariant_density(ulam_matrix(tent(2.0), 4096))
    elapsed = time.perf_counter() - t0
    x = np.linspace(0.01, 0.99, 9801)
    dev = float(np.max(np.abs(rho(x) - 1.0)))
    return CheckResult(1, "tent2_density", dev <= 1e-3 and elapsed < 1.0, dev,
                       "<= 1e-3 and < 1 s", {"seconds": elapsed})


def orbit_histogram(slope, samples, seed, bins=1000, burn=20):
    """Cell frequencies of many parallel tent orbits."""
    rng = np.random.default_rng(seed)
    width = 1_000_000
    steps = max(1, samples // width)
    x = rng.random(width)
    counts = np.zeros(bins)
    for i in range(burn + steps):
        x = slope * np.minimum(x, 1.0 - x)
        if i >= burn:
            counts += np.bincount(np.minimum((x * bins).astype(int), bins - 1), minlength=bins)
    return counts / counts.sum() * bins


@_timed
def check_saltus(ctx):
    d2 = density_of(tent(2.0), ctx.grid)
    s1, s2 = float(d2.s[0]), float(d2.s[1])
    reg = float(np.max(np.abs(d2.rho_reg.values)))
    dec = density_of(ctx.tent_golden, ctx.grid)
    bins = 1000
    hist = orbit_histogram(GOLDEN, ctx.samples, ctx.seed, bins)
    cells = Grid(0.0, 1.0, bins)
    pts, wts = cells.gauss_points()
    means = np.sum(dec.density(pts) * wts, axis=1) / cells.h
    l1 = float(np.sum(np.abs(hist - means)) / bins)
    ok = (abs(s1 + 1) <= 1e-3 and abs(s2 - 1) <= 1e-3 and reg <= 1e-2
          and len(dec.anchors) == 3 and l1 <= 2e-2)
    return CheckResult(2, "saltus_recursion", ok, l1, "tent2 s=(-1,1)+-1e-3; golden L1 <= 2e-2",
                       {"s1": s1, "s2": s2, "reg_sup": reg, "golden_jumps": len(dec.anchors),
                        "golden_s": dec.s, "hist_l1": l1})


def grid_derivative_error(fmap, anchors, p, n):
    """Forward-difference derivative of ``L0 p`` against ``L1 p'`` away from the anchors."""
    grid = Grid(fmap.a, fmap.b, n)
    lhs = transfer_primitive(fmap, smooth_function(grid, anchors, p))
    rhs = transfer_density(fmap, smooth_function(grid, anchors, p.deriv()))
    x = grid.nodes
    vals = lhs(x)
    fd = (vals[1:] - vals[:-1]) / grid.h
    dist = np.min(np.abs(x[:-1, None] - anchors.points[None, :]), axis=1)
    keep = dist > 2.5 * grid.h
    return float(np.max(np.abs(fd - rhs(x[:-1]))[keep]))


@_timed
def check_keye(ctx):
    fmap = smooth_tent(1.9, 0.3)
    an = jump_anchors(fmap)
    rng = np.random.default_rng(ctx.seed)
    ratios = []
    for _ in range(10):
        p = np.polynomial.Polynomial(rng.normal(size=4))
        e1 = grid_derivative_error(fmap, an, p, 1024)
        e2 = grid_derivative_error(fmap, an, p, 2048)
        ratios.append((e2 / (1 / 2048)) / (e1 / (1 / 1024)))
    worst = float(np.max(np.abs(np.array(ratios) - 1.0)))
    return CheckResult(3, "derivative_intertwining", worst <= 0.3, worst,
                       "|C(h/2)/C(h) - 1| <= 0.3", {"C_ratios": ratios})


@_timed
def check_tce_residual(ctx):
    f = ctx.tent19
    X = lambda y: y * (1.0 - y) + 0.3 * y
    sol = solve_tce(f, composed(X, f), depth=40)
    x = np.linspace(f.a, f.b, 4001)
    x = x[x != f.c]
    res = float(np.max(sol.residual(x)))
    return CheckResult(4, "tce_residual", res <= sol.residual_bound, res,
                       f"<= {sol.residual_bound:.3g}", {"bound": sol.residual_bound})


@_timed
def check_nice(ctx):
    rows = []
    d2 = density_of(tent(2.0), ctx.grid)
    r = horizontality(tent(2.0), lambda y: np.asarray(y) / 2.0, decomposition=d2)
    rows.append(("tent2 y/2", r.J, r.J_closed))
    for name, co in [("y/2", [0, 0.5]), ("y^2", [0, 0, 1]), ("y-y^3", [0, 1, 0, -1])]:
        r = horizontality(ctx.tent_golden, polynomial(co), decomposition=ctx.dec_golden)
        rows.append((f"golden {name}", r.J, r.J_closed))
    worst = max(abs(j - jc) for _, j, jc in rows)
    tent2_ok = abs(rows[0][1] + 0.5) <= 1e-6 and abs(rows[0][2] + 0.5) <= 1e-6
    return CheckResult(5, "weighted_jump_closed_form", worst <= 1e-6 and tent2_ok, worst,
                       "<= 1e-6; tent2 both -0.5", {"rows": rows})


def _conj_psi1(ctx, phi):
    fam = ctx.conj19
    return psi1(fam.base, ctx.dec19_fine, fam.X, fam.dX, phi)


@_timed
def check_normalisation(ctx):
    p = _conj_psi1(ctx, constant(1.0))
    ctx.curve(ctx.conj19, constant(1.0), dyadic(6, 9, signed=True))
    mass = float(np.max(np.abs(np.array(ctx.masses) - 1.0)))
    ok = abs(p.psi1) <= 1e-6 and mass <= 1e-10
    return CheckResult(6, "normalisation", ok, abs(p.psi1), "|Psi1(1)| <= 1e-6; |R-1| <= 1e-10",
                       {"psi1_const": p.psi1, "mass_dev": mass, "t_count": len(ctx.masses)})


@_timed
def check_linear_response(ctx):
    t0 = time.perf_counter()
    rep = linear_response_report(ctx.conj19, SQUARE, n=ctx.grid, base=ctx.dec19,
                                 psi_base=ctx.dec19_fine)
    elapsed = time.perf_counter() - t0
    ctx.masses.extend(float(m) for m in rep.curve.masses)
    ok = rep.rel_err <= 0.02 and elapsed < 120
    return CheckResult(7, "linear_response", ok, rep.rel_err, "<= 0.02 of max(|Psi1|,0.01)",
                       {"slope": rep.fit.slope, "psi1": rep.psi1.psi1, "seconds": elapsed})


def _golden_two_bump(ctx):
    f, dec = ctx.tent_golden, ctx.dec_golden
    X0 = polynomial([0.0, 1.0])
    b1, b2 = default_bump(f), default_bump(f, center=dec.anchors.points[1])
    Xh, coef = abelian_projection(f, X0, [b1, b2], dec.anchors)

    def dXh(y):
        return X0.derivative(y) - coef[0] * b1.derivative(y) - coef[1] * b2.derivative(y)

    return Observable(Xh, dXh, "y projected")


@_timed
def check_two_routes(ctx):
    cases = []
    fam = ctx.conj19
    cases.append(("tent1.9 conj", psi1(fam.base, ctx.dec19_fine, fam.X, fam.dX, SQUARE)))
    g = conjugacy_family(ctx.tent_golden, odd_bump(ctx.tent_golden))
    cases.append(("golden conj", psi1(g.base, ctx.dec_golden, g.X, g.dX, SQUARE)))
    X2 = _golden_two_bump(ctx)
    cases.append(("golden projected", psi1(ctx.tent_golden, ctx.dec_golden, X2, X2.derivative,
                                           SQUARE)))
    st = smooth_tent(1.9, 0.3)
    sf = conjugacy_family(st, odd_bump(st))
    cases.append(("smooth tent conj", psi1(st, density_of(st, ctx.psi_grid), sf.X, sf.dX,
                                           SQUARE)))
    rel = [abs(p.psi1 - p.psi1_alpha) / abs(p.psi1) for _, p in cases]
    return CheckResult(8, "two_route_psi1", max(rel) <= 5e-3, max(rel), "<= 0.5%",
                       {name: [p.psi1, p.psi1_alpha] for name, p in cases})


@_timed
def check_abelian(ctx):
    f, dec = ctx.tent_golden, ctx.dec_golden
    X2 = _golden_two_bump(ctx)
    p = psi1(f, dec, X2, X2.derivative, SQUARE)
    ab = abelian_scan(series(f, dec, X2, SQUARE, 150), p.psi1)
    rel = ab.gap / abs(p.psi1)
    return CheckResult(9, "abelian_limit", rel <= 0.01, rel, "<= 1% of Psi1",
                       {"psi1": p.psi1, "extrapolated": ab.extrapolated, "values": ab.values})


@_timed
def check_nonlip(ctx):
    ts = dyadic(7, 12)
    fit, _ = nonlip_report(ctx.slope19, ctx.pinned, ts, ctx.grid, base=ctx.dec19)
    ctrl, _ = nonlip_report(ctx.conj19, ctx.pinned, ts, ctx.grid, base=ctx.dec19)
    significant = abs(fit.tlnt_coeff) > 2.0 * fit.tlnt_stderr
    control_ok = abs(ctrl.tlnt_coeff) <= 2.0 * fit.tlnt_stderr
    ok = fit.sign_consistent and significant and fit.model_preference >= 1.1 and control_ok
    return CheckResult(10, "nonlip_signature", ok, fit.model_preference,
                       "preference >= 1.1, consistent sign, control within noise",
                       {"tlnt": fit.tlnt_coeff, "stderr": fit.tlnt_stderr,
                        "local": fit.local_tlnt, "control_tlnt": ctrl.tlnt_coeff})


@_timed
def check_modulus(ctx):
    ts = list(np.geomspace(1e-4, 1e-2, 9))
    c = ctx.curve(ctx.slope19, SQUARE, [0.0] + ts)
    t = c.t_values[1:]
    ratios = c.rho_l1_dist[1:] / (t * np.log(1.0 / t))
    spread = float(np.max(ratios) / np.min(ratios))
    return CheckResult(11, "modulus_of_continuity", spread <= 5.0, spread, "max/min <= 5",
                       {"ratios": ratios})


@_timed
def check_tangent(ctx):
    partner = perturbed_family(ctx.conj19, [0.0, 0.5, -0.5], 2)
    rep = tangent_pair_experiment(ctx.conj19, partner, n=ctx.grid)
    return CheckResult(12, "tangent_pair", rep.passed and rep.exponent > 1.0, rep.exponent,
                       "> 1", rep.to_dict())


@_timed
def check_funny(ctx):
    f = tent(2.0)
    fam = conjugacy_family(f, odd_bump(f))
    rep = funny_check(f, density_of(f, ctx.grid), fam.X)
    ok = rep.sup_residual <= 1e-6 and rep.jump_mismatch <= 1e-6
    return CheckResult(13, "invariance_identity", ok, max(rep.sup_residual, rep.jump_mismatch),
                       "<= 1e-6", rep.__dict__)


@_timed
def check_elegant(ctx):
    fam = ctx.conj19
    p = _conj_psi1(ctx, SQUARE)
    rep = elegant_check(fam.base, ctx.dec19_fine, SQUARE, fam.alpha, p.psi1, fam.X, fam.dX,
                        fam.bump.deriv())
    h = ctx.dec19_fine.density.grid.h
    ok = rep.difference <= 0.01 * rep.scale and rep.ttce_residual <= 5 * h * rep.ttce_scale
    return CheckResult(14, "conjugacy_pairing", ok, rep.difference / rep.scale,
                       "<= 1% of scale; derived residual <= 5 h scale", rep.__dict__)


@_timed
def check_pt_derivative(ctx):
    rep = pt_derivative_experiment(ctx.conj19, ctx.dec19, dyadic(6, 12))
    return CheckResult(15, "transfer_derivative_order", 1.5 <= rep.exponent <= 2.5,
                       rep.exponent, "in [1.5, 2.5]", rep.to_dict())


@_timed
def check_beta(ctx):
    f = ctx.tent19
    X = ctx.slope19.X
    orb = critical_orbit(f, 40)
    pts, slopes = orb.points[1:41], orb.slopes[1:41]
    twisted = float(np.max(twisted_residuals(X, pts, slopes, 30)))
    consts = expansion_constants(f)
    linear, checked = [], 0
    for k in range(1, 9):
        rep = orbit_derivative(f, ctx.slope19.map_at, X, k, (1e-4, 1e-5, 1e-6), consts=consts)
        for i, r in enumerate(rep.linear_ratio):
            # exactly linear coordinates leave only round-off, which grows as t shrinks
            floor = 1e3 * np.finfo(float).eps / rep.t_values[i + 1]
            if k <= rep.horizons[i + 1] and rep.errors[i + 1] > floor:
                linear.append(r)
                checked += 1
    lin_ok = checked > 0 and all(5.0 <= r <= 20.0 for r in linear)
    mu = np.array([-3.2, 2.5, 4.1])
    w = np.random.default_rng(ctx.seed).normal(size=4)
    round_trip = float(np.max(np.abs(compress_jumps(expand_jumps(w, 2, 3, mu), 2, 3) - w)))
    d2 = density_of(tent(2.0), 1024)
    an = d2.anchors
    oc = an.orbit_class
    w2 = d2.s
    mu2 = cycle_multipliers(tent(2.0), an)
    round2 = float(np.max(np.abs(compress_jumps(expand_jumps(w2, oc.n0, oc.n1, mu2),
                                                oc.n0, oc.n1) - w2)))
    ok = twisted <= 1e-12 and lin_ok and max(round_trip, round2) <= 1e-12
    return CheckResult(16, "orbit_derivatives", ok, twisted,
                       "recursion <= 1e-12; linear FD; round trip <= 1e-12",
                       {"fd_ratios": linear, "round_trip": max(round_trip, round2),
                        "beta": beta_sequence(X, pts, slopes, 10)})


@_timed
def check_atomic(ctx):
    fam, dec = ctx.conj19, ctx.dec19
    an = dec.anchors
    h = fam.conjugator(0.01)
    moved = relocate_jumps(dec.density, an.relocated(np.where(an.at_critical, an.c, h(an.points))))
    iso = abs(b0_norm(moved) - b0_norm(dec.density))
    tests = [np.square, np.cos, np.exp]
    reps = [atomic_limit(fam, dec, psi) for psi in tests]
    ok = iso <= 1e-14 and all(r.shrinking for r in reps)
    return CheckResult(17, "relocation_limit", ok, max(r.errors[-1] for r in reps),
                       "isometry <= 1e-14; error shrinks as t halves",
                       {"isometry": iso, "targets": [r.target for r in reps],
                        "errors": [r.errors for r in reps]})


CHECKS = {1: check_tent2_density, 2: check_saltus, 3: check_keye, 4: check_tce_residual,
          5: check_nice, 6: check_normalisation, 7: check_linear_response, 8: check_two_routes,
          9: check_abelian, 10: check_nonlip, 11: check_modulus, 12: check_tangent,
          13: check_funny, 14: check_elegant, 15: check_pt_derivative, 16: check_beta,
          17: check_atomic}


def run_checks(ids=None, ctx=None, echo=print):
    """Run the selected checks (all by default), printing one line each."""
    ctx = ctx or Context()
    order = sorted(ids or CHECKS)
    # normalisation also looks at every density computed before it
    if 6 in order:
        order = [i for i in order if i != 6] + [6]
    out = []
    for i in order:
        res = CHECKS[i](ctx)
        if echo:
            echo(res.line())
        out.append(res)
    return sorted(out, key=lambda r: r.id)
