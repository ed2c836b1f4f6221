"""Command-line front end.

Subcommands
-----------
hierarchy       write the evaluation-point plan of each approach as CSV
field-validate  compare the empirical covariance of sampled fields with the
                truncated covariance
run             adaptive MLQMC runs for every (approach, tolerance) pair
rules-dump      write the embedded quadrature rules as CSV
cbc             construct a lattice generating vector
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, config as cfgmod, estimator as est, hierarchy, qmc
from . import point_selection as ps, random_field as rf, reference_rules as rr
from .errors import PMLQMCError

log = logging.getLogger("pmlqmc")


def _parser():
    p = argparse.ArgumentParser(prog="pmlqmc", description="p-refined multilevel QMC with nested field points")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file (or an earlier report.json)")
    common.add_argument("--approach", help="nna, gna, lna or all (comma lists allowed)")
    common.add_argument("--eps", help="comma-separated RMSE tolerances")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    h = sub.add_parser("hierarchy", parents=[common], help="dump evaluation-point plans")
    h.add_argument("--max-level", type=int)
    fv = sub.add_parser("field-validate", parents=[common], help="empirical covariance check")
    fv.add_argument("--npoints", type=int, default=10)
    fv.add_argument("--nsamples", type=int, default=10000)
    fv.add_argument("--dim", type=int, help="stochastic dimension (default: min(s, npoints))")
    fv.add_argument("--zero-xi", action="store_true", help=argparse.SUPPRESS)
    sub.add_parser("run", parents=[common], help="adaptive MLQMC runs")
    rd = sub.add_parser("rules-dump", parents=[common], help="write quadrature rules as CSV")
    rd.add_argument("--max-level", type=int, default=rr.MAX_LEVEL)
    cb = sub.add_parser("cbc", parents=[common], help="component-by-component lattice construction")
    cb.add_argument("--N", type=int, required=True, help="number of points (prime or power of two)")
    cb.add_argument("--dim", type=int, required=True, help="number of coordinates")
    return p


def _config(args):
    cfg = cfgmod.load_config(args.config) if args.config else cfgmod.parse_pairs(_default_pairs())
    approaches = None
    if args.approach:
        approaches = cfgmod._convert("approaches", args.approach)
    eps = cfgmod._convert("eps", args.eps) if args.eps else None
    return cfgmod.with_overrides(
        cfg, approaches=approaches, eps=eps, seed=args.seed, threads=args.threads, out=args.out
    )


def _default_pairs():
    return {"field.mean": "8020", "field.std": "400"}


def _write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- subcommands ----------------------------------------------------------


def cmd_hierarchy(cfg, max_level=None):
    L = cfg.max_level if max_level is None else max_level
    rules = rr.rules_up_to(L)
    out = cfg.out_dir()
    written = []
    for a in cfg.approaches:
        plan = ps.select(a, rules)
        path = out / f"plan_{a}.csv"
        _write_csv(path, ["approach", "level", "role", "index", "u", "v", "fine_index"], ps.plan_rows(plan))
        blocks = sum(2 if (a == "lna" and l > 0) else 1 for l in range(L + 1))
        print(f"{a}: levels 0..{L}, {blocks} point-set blocks -> {path}")
        written.append(path)
    return written


def cmd_field_validate(cfg, npoints, nsamples, dim=None, zero_xi=False):
    """Sample the field at random mesh locations and check its covariance.

    Returns the largest entrywise deviation in standard-error units.
    """
    mesh = cfg.load_mesh()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7919]))
    V = ps.element_vertices(mesh)
    areas = mesh.areas()
    elem = rng.choice(len(V), size=npoints, p=areas / areas.sum())
    ab = rng.random((npoints, 2))
    flip = ab.sum(axis=1) > 1
    ab[flip] = 1.0 - ab[flip]
    X = V[elem, 0] + ab[:, :1] * (V[elem, 1] - V[elem, 0]) + ab[:, 1:] * (V[elem, 2] - V[elem, 0])
    fm = cfg.field_model()
    s = min(cfg.s, npoints) if dim is None else dim
    basis = rf.kl_decompose(X, fm.params, s, mean=fm.zbar)
    if zero_xi:
        Z = np.tile(rf.gaussian_values(basis, np.zeros(s)), (nsamples, 1))
    else:
        Z = rf.gaussian_values(basis, rng.standard_normal((nsamples, s)))
    if np.ptp(Z, axis=0).max() == 0.0:
        print(f"constant field: every sample equals the mean profile (value range {Z.min():.6g}..{Z.max():.6g})")
        return 0.0
    emp = np.cov(Z, rowvar=False, ddof=1)
    ref = basis.truncated_covariance()
    d = np.diag(ref)
    se = np.sqrt((np.outer(d, d) + ref**2) / nsamples)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(emp - ref) / se, 0.0)
    worst = float(z.max())
    rank = int(np.sum(np.linalg.eigvalsh(emp) > 1e-8 * np.trace(emp)))
    print(
        f"field-validate: {npoints} points, {nsamples} samples, s={s}, "
        f"max deviation {worst:.3f} SE, numerical rank {rank}, captured variance {basis.captured_ratio:.4f}"
    )
    return worst


def cmd_run(cfg):
    mesh = cfg.load_mesh()
    material = cfg.material()
    fm = cfg.field_model()
    z = cfg.load_vector()
    out = cfg.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    if not cfg.eps:
        raise cfgmod.ConfigurationError("no tolerances given (eps)")
    cache = {}
    tol_rows, runs, timings = [], [], []
    for a in cfg.approaches:
        problem = hierarchy.build_problem(a, mesh, material, fm, cfg.s, max_level=cfg.max_level, _basis_cache=cache)
        for k, eps in enumerate(cfg.eps):
            ec = est.EstimatorConfig(
                approach=a, max_level=cfg.max_level, tolerance=eps, shifts=cfg.R, n_init=cfg.n_init,
                growth_factor=cfg.growth_factor, seed=cfg.seed, s=cfg.s, start_level=cfg.start_level,
                threads=cfg.threads,
            )
            rep = est.run(ec, problem, z)
            tele = est.telescoping_check(rep)
            name = f"{a}_eps{k}"
            _write_csv(out / name / "levels.csv", est.LEVEL_COLUMNS, rep.level_rows())
            doc = rep.to_dict()
            doc["telescoping"] = {"residual": tele.residual, "standard_error": tele.standard_error}
            (out / name / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
            secs = rep.total_seconds if cfg.record_timing else 0.0
            tol_rows.append([f"{eps:.17g}", a, rep.total_units, f"{secs:.6f}", f"{rep.achieved_error_estimate:.17g}"])
            timings.append({"run": name, "seconds": secs})
            runs.append({"run": name, "approach": a, "epsilon": eps, "L": rep.L,
                         "N": [s.N for s in rep.levels], "total_units": rep.total_units,
                         "tolerance_met": rep.tolerance_met})
            flag = "" if rep.tolerance_met else "  [tolerance not met]"
            print(
                f"{a} eps={eps:.3g}: L={rep.L} N={[s.N for s in rep.levels]} estimate={rep.estimate:.10g} "
                f"error~{rep.achieved_error_estimate:.3g} units={rep.total_units:.4g}{flag}"
            )
            if not rep.tolerance_met:
                log.warning("%s at eps=%g: %s", a, eps, "; ".join(rep.notes))
    _write_csv(out / "tolerances.csv", est.TOLERANCE_COLUMNS, tol_rows)
    summary = {"config": cfg.to_pairs(), "base_dir": cfg.base_dir, "runs": runs}
    (out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if cfg.record_timing:
        (out / "timings.json").write_text(json.dumps(timings, indent=2) + "\n")
    return runs


def cmd_rules_dump(cfg, max_level):
    path = cfg.out_dir() / "rules.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    rr.dump_rules_csv(path, max_level)
    print(f"rules 0..{max_level} -> {path}")
    return path


def cmd_cbc(cfg, N, dim):
    z, e2 = qmc.cbc_construct(N, dim, return_errors=True)
    path = cfg.out_dir() / f"lattice_{N}_s{dim}.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# CBC lattice, N={N}, weights 1/j^2, final squared error {e2[-1]:.6e}\n")
        fh.writelines(f"{v}\n" for v in z)
    print(f"z = {' '.join(map(str, z[:10]))}{' ...' if dim > 10 else ''}; e^2 = {e2[-1]:.6e} -> {path}")
    return path


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "hierarchy":
            cmd_hierarchy(cfg, args.max_level)
        elif args.command == "field-validate":
            worst = cmd_field_validate(cfg, args.npoints, args.nsamples, args.dim, args.zero_xi)
            if not math.isfinite(worst) or worst > 4.0:
                print("field-validate: deviation exceeds 4 standard errors", file=sys.stderr)
                return 1
        elif args.command == "run":
            cmd_run(cfg)
        elif args.command == "rules-dump":
            cmd_rules_dump(cfg, args.max_level)
        elif args.command == "cbc":
            cmd_cbc(cfg, args.N, args.dim)
    except (PMLQMCError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
