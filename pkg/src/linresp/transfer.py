"""Ulam discretisation, invariant densities and their jump decomposition."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NoConvergence, NoGap, NotMeanZero, S1Disagreement
from .jumpspace import Grid, GridFunction, JumpFunction, b0_norm, integral, transfer_density
from .map_core import Anchors, OrbitClass, classify_map, jump_anchors, jump_profile
from .outputs import write_csv, write_json

DEFAULT_ETA = 0.05


@dataclass(frozen=True, eq=False)
class UlamOperator:
    grid: Grid
    matrix: sp.csr_matrix
    fmap: object = None

    @property
    def n(self):
        return self.grid.n

    def dense(self):
        return self.matrix.toarray()


def ulam_matrix(fmap, n):
    """Row-stochastic cell transition matrix from exact preimage intervals."""
    fmap.validate()
    grid = Grid(fmap.a, fmap.b, n)
    x = grid.nodes
    h = grid.h
    rows, cols, vals = [], [], []
    for branch in (fmap.left, fmap.right):
        lo_img, hi_img = sorted((float(branch(branch.lo)), float(branch(branch.hi))))
        pre = branch.inverse(np.clip(x, lo_img, hi_img))
        pre = np.clip(pre, branch.lo, branch.hi)
        lo = np.minimum(pre[:-1], pre[1:])
        hi = np.maximum(pre[:-1], pre[1:])
        keep = hi > lo
        j = np.nonzero(keep)[0]
        lo, hi = lo[keep], hi[keep]
        first = grid.cell_of(lo)
        last = grid.cell_of(hi)
        span = int(np.max(last - first)) + 1 if j.size else 0
        for off in range(span):
            i = first + off
            ok = i < n
            cell_lo = grid.a + i * h
            length = np.minimum(hi, cell_lo + h) - np.maximum(lo, cell_lo)
            ok &= length > 0
            rows.append(i[ok])
            cols.append(j[ok])
            vals.append(length[ok] / h)
    m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    m.sum_duplicates()
    return UlamOperator(grid, m, fmap)


def _cells_to_nodes(means):
    nodes = np.empty(len(means) + 1)
    nodes[1:-1] = 0.5 * (means[:-1] + means[1:])
    nodes[0], nodes[-1] = means[0], means[-1]
    return nodes


def invariant_density(op, tol=1e-13, max_iter=20000):
    """Left fixed vector of the Ulam matrix by power iteration, as a density."""
    n = op.n
    mt = op.matrix.T.tocsr()
    pi = np.full(n, 1.0 / n)
    for it in range(1, max_iter + 1):
        nxt = mt @ pi
        nxt /= nxt.sum()
        res = float(np.abs(nxt - pi).sum())
        pi = nxt
        if res <= tol:
            means = pi / op.grid.h
            return GridFunction(op.grid, _cells_to_nodes(means), means)
    raise NoConvergence(f"power iteration did not settle in {max_iter} steps (residual {res:.3g})",
                        max_iter)


@dataclass(frozen=True)
class GapEstimate:
    tau: float
    iterations: int
    flagged: bool


def spectral_gap_estimate(op, iterations=600, window=60, seed=0, flag_at=0.995):
    """Modulus of the second eigenvalue, by power iteration on mean-zero vectors.

    Ulam truncation pulls a unimodular eigenvalue slightly inside the disc,
    hence the flag threshold below 1.
    """
    mt = op.matrix.T.tocsr()
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.n)
    v -= v.mean()
    norms = []
    for it in range(iterations):
        v = mt @ v
        v -= v.mean()
        nv = float(np.abs(v).sum())
        norms.append(nv)
        if nv < 1e-280:
            break
        if nv > 1e100 or nv < 1e-100:
            v /= nv
            norms = [x / nv for x in norms]
    norms = np.array(norms)
    m = min(window, len(norms) - 1)
    if m < 1 or norms[-1] == 0.0:
        return GapEstimate(0.0, len(norms), False)
    tau = float((norms[-1] / norms[-1 - m]) ** (1.0 / m))
    return GapEstimate(min(tau, 1.0), len(norms), tau >= flag_at)


# -- decomposition --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensityDecomposition:
    rho0: GridFunction
    s: np.ndarray
    rho_reg: GridFunction
    s_prime: np.ndarray
    E: np.ndarray
    E_prime: np.ndarray
    orbit_class: OrbitClass
    anchors: Anchors
    density: JumpFunction
    s1_routes: tuple = ()
    polish_steps: int = 0
    slopes_at_c: tuple = (0.0, 0.0)
    info: dict = field(default_factory=dict)

    def to_rows(self):
        x = self.rho0.grid.nodes
        return list(zip(x, self.density(x), self.rho_reg.values))

    def jump_table(self):
        return [{"k": k + 1, "c_k": float(c), "s_k": float(s), "s_prime_k": float(sp_)}
                for k, (c, s, sp_) in enumerate(zip(self.anchors.points, self.s, self.s_prime))]

    def write(self, csv_path, json_path):
        write_csv(csv_path, ["x", "rho0", "rho_reg"], self.to_rows())
        write_json(json_path, {"orbit_class": self.orbit_class.to_dict(), "jumps": self.jump_table(),
                               "s1_routes": [float(v) for v in self.s1_routes],
                               "polish_steps": self.polish_steps})


def _cell_means(rho_hat):
    if rho_hat.cell_means is not None:
        return np.asarray(rho_hat.cell_means, dtype=float)
    v = rho_hat.values
    return 0.5 * (v[:-1] + v[1:])


def _clean_cells(grid, anchors, skip=()):
    """Mask of cells free of anchors (optionally ignoring some anchor indices)."""
    mask = np.ones(grid.n, dtype=bool)
    pts = np.delete(anchors.points, list(skip)) if skip else anchors.points
    idx = grid.cell_of(pts)
    mask[idx] = False
    mask[np.clip(idx - 1, 0, grid.n - 1)] = False
    mask[np.clip(idx + 1, 0, grid.n - 1)] = False
    return mask


def _one_sided_fit(grid, means, clean, x0, side, width=10, gap=2):
    """Extrapolate cell means to ``x0`` from one side with a least-squares line."""
    mids = grid.a + (np.arange(grid.n) + 0.5) * grid.h
    off = side * (mids - x0) / grid.h
    sel = clean & (off >= gap) & (off <= width)
    if not np.any(sel):
        return 0.0
    if np.count_nonzero(sel) == 1:
        return float(means[sel][0])
    coef = np.polyfit(mids[sel] - x0, means[sel], 1)
    return float(coef[-1])


def _initial_element(grid, means, anchors, s, eta):
    """Jump function whose cell averages match ``means`` given jump heights ``s``."""
    lo = grid.nodes[:-1]
    # exact cell averages of sum_k s_k H_{c_k}: -s_k times the part of the cell left of c_k
    frac = np.clip((anchors.points[None, :] - lo[:, None]) / grid.h, 0.0, 1.0)
    sal_means = -(frac @ s)
    reg = _cells_to_nodes(means - sal_means)
    return JumpFunction(grid, reg, np.asarray(s, dtype=float), anchors, eta)


def _node_derivative(grid, values, anchors):
    """Derivative at nodes from cell slopes, using one side next to anchor cells."""
    slope = np.diff(values) / grid.h
    bad = np.zeros(grid.n, dtype=bool)
    bad[grid.cell_of(anchors.points)] = True
    left = np.concatenate([[slope[0]], slope])
    right = np.concatenate([slope, [slope[-1]]])
    lbad = np.concatenate([[True], bad])
    rbad = np.concatenate([bad, [True]])
    out = 0.5 * (left + right)
    out = np.where(lbad & ~rbad, right, out)
    out = np.where(rbad & ~lbad, left, out)
    return out


def _slope_at(grid, reg, x0, side, anchors):
    """Four-point one-sided derivative of the regular part at ``x0``."""
    h = grid.h
    pts = x0 + side * h * np.arange(4)
    others = anchors.points[np.abs(anchors.points - x0) > anchors.tol]
    hit = np.any((others[None, :] - np.minimum(pts[0], pts[-1]) > 0)
                 & (np.maximum(pts[0], pts[-1]) - others[None, :] > 0))
    v = reg(pts)
    if hit:
        return float(side * (v[1] - v[0]) / h)
    return float(side * (-11 * v[0] + 18 * v[1] - 9 * v[2] + 2 * v[3]) / (6 * h))


def derivative_jumps(fmap, anchors, s, gamma_c, slope_c):
    """Jumps ``s'_k`` of the derivative of the regular part, with ``E_k`` and ``E'_k``.

    ``gamma_c`` and ``slope_c`` hold the one-sided values and derivatives of the
    density at ``c`` (left, right).  Closure indices collect every incoming term.
    """
    K = len(anchors)
    dl = fmap.evaluate(fmap.c, 1, "left")
    dr = fmap.evaluate(fmap.c, 1, "right")
    ddl = fmap.evaluate(fmap.c, 2, "left")
    ddr = fmap.evaluate(fmap.c, 2, "right")
    E = np.zeros(K)
    Ep = np.zeros(K)
    E[0] = -(gamma_c[0] * ddl / dl**3 - gamma_c[1] * ddr / dr**3)
    Ep[0] = -slope_c[0] / dl**2 + slope_c[1] / dr**2
    move = (anchors.successor >= 0) & ~anchors.at_critical
    src = np.nonzero(move)[0]
    dst = anchors.successor[move]
    np.add.at(E, dst, s[src] * anchors.second[src] / anchors.slopes[src] ** 3)
    sp_ = np.zeros(K)
    sp_[0] = Ep[0] - E[0]
    if anchors.orbit_class.markov:
        # linear closure: s'_j = Ep_j - E_j with Ep_j = sum over predecessors s'_k / f'(c_k)^2
        T = np.zeros((K, K))
        T[dst, src] = 1.0 / anchors.slopes[src] ** 2
        rhs = -E.copy()
        rhs[0] = sp_[0]
        T[0, :] = 0.0
        sp_ = np.linalg.solve(np.eye(K) - T, rhs)
        Ep = sp_ + E
    else:
        for k in range(K - 1):
            if move[k]:
                Ep[k + 1] = sp_[k] / anchors.slopes[k] ** 2
                sp_[k + 1] = Ep[k + 1] - E[k + 1]
    return sp_, E, Ep


def decompose_density(fmap, rho_hat, orbit_class=None, anchors=None, eta=DEFAULT_ETA,
                      polish=True, tol=1e-13, max_polish=3000, agree=0.1):
    """Split a density estimate into regular part and postcritical jumps.

    ``s_1`` is estimated twice (fit across ``c_1`` and the closure at ``c``);
    the jump-space fixed-point iteration then refines the whole element.
    """
    if orbit_class is None:
        orbit_class = anchors.orbit_class if anchors is not None else classify_map(fmap)
    if anchors is None:
        anchors = jump_anchors(fmap, orbit_class)
    grid = rho_hat.grid
    means = _cell_means(rho_hat)
    profile = jump_profile(anchors)

    clean1 = _clean_cells(grid, anchors, skip=(0,))
    s1_fit = (_one_sided_fit(grid, means, clean1, anchors.points[0], +1)
              - _one_sided_fit(grid, means, clean1, anchors.points[0], -1))
    crit = np.nonzero(anchors.at_critical)[0]
    cleanc = _clean_cells(grid, anchors, skip=tuple(crit))
    gl = _one_sided_fit(grid, means, cleanc, fmap.c, -1)
    gr = _one_sided_fit(grid, means, cleanc, fmap.c, +1)
    dl = abs(fmap.evaluate(fmap.c, 1, "left"))
    dr = abs(fmap.evaluate(fmap.c, 1, "right"))
    s1_close = -(gl / dl + gr / dr)
    scale = max(abs(s1_fit), abs(s1_close))
    if scale == 0.0 or abs(s1_fit - s1_close) > agree * scale:
        raise S1Disagreement(f"s1 estimates {s1_fit:.6g} (fit) and {s1_close:.6g} (closure) "
                             "disagree; refine the grid")

    phi = _initial_element(grid, means, anchors, s1_close * profile, eta)
    phi = phi * (1.0 / integral(phi))
    steps = 0
    # the variation of N rounded nodal values floors the achievable step size
    tol = max(tol, 32 * np.finfo(float).eps * grid.n)
    if polish:
        for steps in range(1, max_polish + 1):
            nxt = transfer_density(fmap, phi)
            nxt = nxt * (1.0 / integral(nxt))
            delta = b0_norm(nxt - phi)
            phi = nxt
            if delta <= tol:
                break
        else:
            raise NoConvergence("jump-space fixed point iteration did not settle", max_polish)

    s = phi.jumps.copy()
    if not s[0] < 0:
        raise S1Disagreement(f"first jump must be negative, got {s[0]:.6g}")
    reg = phi.regular
    gamma_c = (phi.one_sided(fmap.c, -1), phi.one_sided(fmap.c, +1))
    slope_c = (_slope_at(grid, reg, fmap.c, -1, anchors), _slope_at(grid, reg, fmap.c, +1, anchors))
    sprime, E, Ep = derivative_jumps(fmap, anchors, s, gamma_c, slope_c)
    full = phi(grid.nodes)
    return DensityDecomposition(GridFunction(grid, full, means), s, reg, sprime, E, Ep,
                                orbit_class, anchors, phi, (s1_fit, s1_close), steps, slope_c)


def density_of(fmap, n=4096, orbit_class=None, anchors=None, eta=DEFAULT_ETA, polish=True):
    """Ulam density followed by decomposition; the usual entry point."""
    op = ulam_matrix(fmap, n)
    rho = invariant_density(op)
    return decompose_density(fmap, rho, orbit_class, anchors, eta, polish=polish)


def regular_derivative(dec):
    """Nodal derivative of the regular part (one-sided next to anchors)."""
    g = dec.rho_reg.grid
    return _node_derivative(g, dec.rho_reg.values, dec.anchors)


# -- resolvent --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NeumannResult:
    solution: JumpFunction
    iterations: int
    tail_bound: float
    norms: np.ndarray


def neumann_solve(fmap, eta, density=None, tau=None, tol=1e-12, max_iter=5000, mean_tol=1e-8):
    """Sum ``L^j eta`` over ``j >= 0`` for a mean-zero ``eta``.

    When ``density`` is given, each iterate has its mean projected out along
    it, which stops round-off from feeding the eigenvalue 1.
    """
    m = integral(eta)
    if abs(m) > mean_tol:
        raise NotMeanZero(f"argument has integral {m:.3g}")
    if tau is None:
        tau = spectral_gap_estimate(ulam_matrix(fmap, min(eta.grid.n, 1024))).tau
    if tau >= 0.999:
        raise NoGap(f"estimated second eigenvalue {tau:.4f} too close to 1")
    cur = eta
    total = eta
    norms = [b0_norm(eta)]
    for j in range(1, max_iter + 1):
        cur = transfer_density(fmap, cur)
        if density is not None:
            cur = cur - density * integral(cur)
        nrm = b0_norm(cur)
        norms.append(nrm)
        total = total + cur
        if nrm <= tol * (1.0 - tau):
            return NeumannResult(total, j, nrm / (1.0 - tau), np.array(norms))
    raise NoConvergence("Neumann series did not reach tolerance", max_iter)
