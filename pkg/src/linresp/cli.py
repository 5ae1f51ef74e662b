"""Command-line entry point: ``linresp <subcommand> --config FILE --out DIR``."""

import argparse
import json
import os
import sys

import numpy as np

from . import acceptance
from .errors import ConfigError, LinrespError, NotHorizontal
from .map_core import classify_map, expansion_constants, map_from_dict
from .outputs import write_csv, write_json
from .response_lab import (build_family, dyadic, linear_response_report, nonlip_report,
                           perturbed_family, pinned_observable, pt_derivative_experiment,
                           tangent_pair_experiment)
from .susceptibility import Observable, abelian_scan, polynomial, psi1, series
from .tce import composed, horizontality, solve_tce
from .transfer import density_of, invariant_density, spectral_gap_estimate, ulam_matrix

SUBCOMMANDS = ("validate", "density", "decompose", "tce", "horizontality", "susceptibility",
               "psi1", "abelian", "respond", "nonlip", "tangent-pair", "pt-derivative",
               "all-checks")


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("the config must be a JSON object")
    return cfg


def _observable(desc, default, name):
    if desc is None:
        return default
    if "poly" not in desc:
        raise ConfigError(f"{name} needs a 'poly' coefficient list")
    return polynomial([float(v) for v in desc["poly"]], name)


class Setup:
    """Resolved config: map, optional family, deformation and observable."""

    def __init__(self, cfg, args):
        self.cfg = cfg
        self.grid = args.grid or int(cfg.get("grid", 4096))
        self.seed = args.seed if args.seed is not None else int(cfg.get("seed", 20240917))
        fam_cfg = cfg.get("family")
        if fam_cfg is not None:
            fam_cfg = dict(fam_cfg)
            fam_cfg.setdefault("map", cfg.get("map", {}))
            if args.tmax is not None:
                fam_cfg["t_max"] = args.tmax
            self.family = build_family(fam_cfg)
            self.fmap = self.family.base
        else:
            self.family = None
            if "map" not in cfg:
                raise ConfigError("the config needs a 'map' or a 'family'")
            self.fmap = map_from_dict(cfg["map"])
        self.t_max = float(args.tmax if args.tmax is not None else cfg.get("t_max", 0.05))
        if "X" in cfg:
            self.X = _observable(cfg["X"], None, "X")
        elif self.family is not None:
            self.X = Observable(self.family.X, self.family.dX, "X")
        else:
            self.X = None
        self.phi = _observable(cfg.get("phi"), polynomial([0.0, 0.0, 1.0], "x^2"), "phi")

    def need_X(self):
        if self.X is None:
            raise ConfigError("this subcommand needs 'X' or a 'family'")
        return self.X

    def need_family(self):
        if self.family is None:
            raise ConfigError("this subcommand needs a 'family'")
        return self.family

    def t_values(self, default):
        ts = self.cfg.get("t_values")
        if ts is None:
            return [t for t in default if abs(t) <= self.t_max]
        return [float(t) for t in ts]


# -- subcommands --------------------------------------------------------------------

def run_validate(s, out):
    s.fmap.validate()
    oc = classify_map(s.fmap)
    consts = expansion_constants(s.fmap)
    info = {"map": s.fmap.name, "orbit_class": oc.to_dict(), "lambda_hat": consts.lambda_hat,
            "Lambda_hat": consts.Lambda_hat, "critical_value": s.fmap.critical_value}
    write_json(os.path.join(out, "map.json"), info)
    return info, True


def run_density(s, out):
    op = ulam_matrix(s.fmap, s.grid)
    rho = invariant_density(op)
    gap = spectral_gap_estimate(op, seed=s.seed)
    write_csv(os.path.join(out, "density.csv"), ["x", "rho"],
              zip(rho.grid.nodes, rho.values))
    info = {"N": s.grid, "tau": gap.tau, "gap_flagged": gap.flagged}
    write_json(os.path.join(out, "density.json"), info)
    return info, True


def run_decompose(s, out):
    dec = density_of(s.fmap, s.grid)
    dec.write(os.path.join(out, "decomposition.csv"), os.path.join(out, "decomposition.json"))
    return {"jumps": dec.jump_table()[:10], "orbit_class": dec.orbit_class.to_dict()}, True


def run_tce(s, out):
    X = s.need_X()
    sol = solve_tce(s.fmap, composed(X, s.fmap), float(s.cfg.get("omega", 0.0)),
                    s.cfg.get("depth"))
    x = np.linspace(s.fmap.a, s.fmap.b, 1025)
    x = x[x != s.fmap.c]
    res = sol.residual(x)
    write_csv(os.path.join(out, "tce.csv"), ["x", "alpha", "residual"], zip(x, sol(x), res))
    info = {"depth": sol.depth, "sup_residual": float(np.max(res)),
            "residual_bound": sol.residual_bound}
    write_json(os.path.join(out, "tce.json"), info)
    return info, bool(info["sup_residual"] <= sol.residual_bound)


def run_horizontality(s, out):
    dec = density_of(s.fmap, s.grid)
    rep = horizontality(s.fmap, s.need_X(), decomposition=dec)
    info = rep.to_dict()
    write_json(os.path.join(out, "horizontality.json"), info)
    return info, True


def run_susceptibility(s, out):
    dec = density_of(s.fmap, s.grid)
    ser = series(s.fmap, dec, s.need_X(), s.phi, int(s.cfg.get("n_terms", 200)))
    write_csv(os.path.join(out, "series.csv"), ["n", "kappa"], enumerate(ser.kappa))
    zs = [1.0 - 2.0**-k for k in range(1, 11)]
    write_csv(os.path.join(out, "psi_z.csv"), ["z", "psi"], ((z, ser.value(z)) for z in zs))
    info = {"terms": len(ser.kappa), "period": ser.period,
            "periodicity_gap": ser.periodicity_gap()}
    write_json(os.path.join(out, "series.json"), info)
    return info, True


def run_psi1(s, out):
    X = s.need_X()
    dec = density_of(s.fmap, s.grid)
    rep = psi1(s.fmap, dec, X, X.derivative, s.phi)
    info = rep.to_dict()
    write_json(os.path.join(out, "psi1.json"), info)
    return info, True


def run_abelian(s, out):
    X = s.need_X()
    dec = density_of(s.fmap, s.grid)
    p = psi1(s.fmap, dec, X, X.derivative, s.phi)
    ab = abelian_scan(series(s.fmap, dec, X, s.phi, int(s.cfg.get("n_terms", 200))), p.psi1)
    info = {"z": ab.z, "values": ab.values, "remainder_bounds": ab.bounds,
            "extrapolated": ab.extrapolated, "psi1": p.psi1,
            "gap": ab.gap, "periodicity_gap": ab.periodicity_gap}
    write_json(os.path.join(out, "abelian.json"), info)
    write_csv(os.path.join(out, "abelian.csv"), ["z", "psi"], zip(ab.z, ab.values))
    rel = ab.gap / max(abs(p.psi1), 1e-300)
    return info, bool(rel <= float(s.cfg.get("abelian_tol", 0.01)))


def _write_curve(out, curve):
    write_csv(os.path.join(out, "response.csv"), ["t", "R", "l1dist"], curve.rows())


def _run_nonlip(s, out, family):
    base = density_of(family.base, s.grid)
    phi = s.phi if "phi" in s.cfg else pinned_observable(family.base, base.density)
    fit, curve = nonlip_report(family, phi, s.t_values(dyadic(7, 12)), s.grid, base=base)
    _write_curve(out, curve)
    info = {"mode": "nonlip", **fit.to_dict(), "skipped": curve.skipped}
    write_json(os.path.join(out, "fit.json"), info)
    ok = bool(fit.defined and fit.sign_consistent and fit.model_preference >= 1.1)
    return info, ok


def run_respond(s, out):
    family = s.need_family()
    h = float(s.cfg.get("h", min(1e-2, s.t_max)))
    try:
        rep = linear_response_report(family, s.phi, h, s.grid,
                                     int(s.cfg.get("psi_grid", max(s.grid, 8192))))
    except NotHorizontal:
        return _run_nonlip(s, out, family)
    _write_curve(out, rep.curve)
    info = {"mode": "linear", **rep.to_dict()}
    write_json(os.path.join(out, "fit.json"), info)
    write_json(os.path.join(out, "psi1.json"), rep.psi1.to_dict())
    return info, bool(rep.rel_err <= float(s.cfg.get("response_tol", 0.02)))


def run_nonlip(s, out):
    return _run_nonlip(s, out, s.need_family())


def run_tangent_pair(s, out):
    family = s.need_family()
    p = s.cfg.get("partner", {"coeffs": [0.0, 0.5, -0.5], "power": 2})
    partner = perturbed_family(family, p["coeffs"], int(p.get("power", 2)))
    rep = tangent_pair_experiment(family, partner, s.t_values(dyadic(5, 10)), s.grid)
    info = rep.to_dict()
    write_json(os.path.join(out, "tangent.json"), info)
    return info, rep.passed


def run_pt_derivative(s, out):
    family = s.need_family()
    dec = density_of(family.base, s.grid)
    rep = pt_derivative_experiment(family, dec, s.t_values(dyadic(6, 12)))
    info = rep.to_dict()
    write_json(os.path.join(out, "pt_derivative.json"), info)
    return info, bool(1.5 <= rep.exponent <= 2.5)


def run_all_checks(s, out, echo=print):
    ids = s.cfg.get("checks")
    ctx = acceptance.Context(grid=int(s.cfg.get("grid", 4096)), seed=s.seed)
    results = acceptance.run_checks(ids, ctx, echo=echo)
    write_json(os.path.join(out, "checks.json"), [r.to_dict() for r in results])
    return {"passed": sum(r.passed for r in results), "total": len(results)}, \
        all(r.passed for r in results)


RUNNERS = {"validate": run_validate, "density": run_density, "decompose": run_decompose,
           "tce": run_tce, "horizontality": run_horizontality,
           "susceptibility": run_susceptibility, "psi1": run_psi1, "abelian": run_abelian,
           "respond": run_respond, "nonlip": run_nonlip, "tangent-pair": run_tangent_pair,
           "pt-derivative": run_pt_derivative}


def parser():
    p = argparse.ArgumentParser(prog="linresp", description=__doc__)
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", default="runs", help="output directory (default: runs)")
    p.add_argument("--grid", type=int, help="Ulam grid size N")
    p.add_argument("--tmax", type=float, help="largest |t| used by family runs")
    p.add_argument("--seed", type=int, help="seed for randomised checks")
    return p


def _error(exc):
    sys.stderr.write(json.dumps(exc.to_dict()) + "\n")


def main(argv=None):
    args = parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command != "all-checks" or args.config is None:
            cfg.setdefault("map", {"family": "tent", "slope": 1.9})
        os.makedirs(args.out, exist_ok=True)
        if args.command == "all-checks":
            s = argparse.Namespace(cfg=cfg, seed=args.seed if args.seed is not None
                                   else int(cfg.get("seed", 20240917)))
            if args.grid:
                cfg["grid"] = args.grid
            _, ok = run_all_checks(s, args.out)
            return 0 if ok else 1
        s = Setup(cfg, args)
        _, ok = RUNNERS[args.command](s, args.out)
    except ConfigError as exc:
        _error(exc)
        return 2
    except LinrespError as exc:
        _error(exc)
        return 1
    print(f"{'PASS' if ok else 'FAIL'} {args.command}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
