"""Independent reference computations: no code from the package is used here."""

import numpy as np


def tent_orbits(slope, samples, seed=0, width=1_000_000, burn=30):
    """Yield batches of points along many parallel tent orbits."""
    rng = np.random.default_rng(seed)
    x = rng.random(width)
    for _ in range(burn):
        x = slope * np.minimum(x, 1.0 - x)
    for _ in range(max(1, samples // width)):
        x = slope * np.minimum(x, 1.0 - x)
        yield x


def birkhoff_mean(slope, func, samples=10_000_000, seed=0):
    total, count = 0.0, 0
    for x in tent_orbits(slope, samples, seed):
        total += float(np.sum(func(x)))
        count += x.size
    return total / count


def markov_tent_density(slope, n1):
    """Invariant density of a tent map whose turning point is periodic with period ``n1``.

    The postcritical points cut ``[c_2, c_1]`` into intervals on which the
    density is constant; the weights solve the Perron-Frobenius balance.
    """
    c = 0.5
    f = lambda x: slope * min(x, 1.0 - x)
    pts = [c]
    for _ in range(n1):
        pts.append(f(pts[-1]))
    cuts = sorted(set(round(p, 14) for p in pts))
    m = len(cuts) - 1
    P = np.zeros((m, m))
    for i in range(m):
        lo, hi = cuts[i], cuts[i + 1]
        for part in ((lo, min(hi, c)), (max(lo, c), hi)):
            if part[1] <= part[0]:
                continue
            a, b = sorted((f(part[0]), f(part[1])))
            for j in range(m):
                ov = min(b, cuts[j + 1]) - max(a, cuts[j])
                if ov > 1e-14:
                    P[j, i] += ov / (b - a) * (part[1] - part[0]) / (cuts[j + 1] - cuts[j])
    w, v = np.linalg.eig(P)
    k = int(np.argmin(np.abs(w - 1.0)))
    dens = np.real(v[:, k])
    widths = np.diff(cuts)
    dens = dens / np.sum(dens * widths)
    return np.array(cuts), dens


def step_density(cuts, dens):
    def rho(x):
        x = np.asarray(x, dtype=float)
        i = np.searchsorted(cuts, x, side="right") - 1
        ok = (i >= 0) & (i < len(dens))
        out = np.zeros_like(x)
        out[ok] = dens[i[ok]]
        return out
    return rho
