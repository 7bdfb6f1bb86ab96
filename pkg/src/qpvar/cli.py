"""qpvar command line.

Exit codes:
  0  success
  1  hypothesis check failed (check) or residual tolerance not met (solve, verify)
  2  configuration could not be parsed or validated
  3  sampling of the domain failed
  4  line search failed during solve
  5  solve refused because the hypothesis check failed (use --force)
  6  input file not found
  7  geodesic shooting did not converge
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import lagrangian as L
from . import torus_spectral as ts
from .config import ConfigError, load_scenario
from .conformal import ConformalStructure, GeodesicPath
from .domain import SamplingError, check_hypotheses
from .geodesics import ShootingError
from .solver import minimize, verify

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_SAMPLING = 3
EXIT_LINESEARCH = 4
EXIT_REFUSED = 5
EXIT_MISSING = 6
EXIT_SHOOTING = 7


def _out_dir(args, scenario=None) -> Path:
    out = args.out or (scenario.outputs.get("dir") if scenario else None) or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload):
    path.write_text(json.dumps(payload, indent=2, default=float))


def cmd_check(args) -> int:
    sc = load_scenario(args.config, args.seed)
    if sc.domain is None:
        raise ConfigError("the check needs a domain block", "domain")
    report = check_hypotheses(sc.domain, sc.W, sc.sampling)
    out = _out_dir(args, sc)
    report.write_json(out / "hypotheses.json")
    for name, v in report.verdicts.items():
        print(f"{name}: {'PASS' if v['pass'] else 'FAIL'}  margin={v['margin']:.6g}  {v['inequality']}")
    if not report.passed:
        for name in sorted(report.failing()):
            print(f"violating sample for {name}: {report.verdicts[name]['worst_sample']}")
    return EXIT_OK if report.passed else EXIT_FAIL


def _write_series(u, omega, t_max: float, dt: float, path: Path):
    count = int(np.floor(t_max / dt + 1e-9)) + 1 if t_max > 0 else 1
    t = np.arange(count) * dt
    x = ts.besicovitch_sample(u, omega, t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x_{i + 1}" for i in range(x.shape[-1])])
        for ti, xi in zip(t, x):
            w.writerow([repr(float(ti))] + [repr(float(v)) for v in xi])
    return count


def cmd_solve(args) -> int:
    sc = load_scenario(args.config, args.seed)
    out = _out_dir(args, sc)
    problem = sc.problem()
    hyp = None
    if sc.domain is not None:
        report = check_hypotheses(sc.domain, sc.W, sc.sampling)
        report.write_json(out / "hypotheses.json")
        hyp = report.to_dict()
        if not report.passed and not args.force:
            print(f"hypotheses failed: {sorted(report.failing())}; refusing to solve (use --force)")
            return EXIT_REFUSED
    u, U, rep = minimize(problem, sc.solver, sc.domain, hypotheses=hyp)
    if args.unnormalized:
        scale = ts.TWO_PI ** problem.k
        rep.J_history = [j * scale for j in rep.J_history]
        for p in rep.projections:
            p["J_before"] *= scale
            p["J_after"] *= scale
    rep.config["normalization"] = "unnormalized" if args.unnormalized else "normalized"
    rep.write_json(out / "report.json")
    ts.write_coefficients_json(u, out / "solution.json",
                               {"omega": list(sc.omega.omega), "scenario": sc.name,
                                "points_per_dim": problem.grid.P})
    _, table = L.weak_residual(problem, U, sc.solver.test_degree)
    table.write_csv(out / "residuals.csv")
    traj = sc.outputs.get("trajectory", {"t_max": 20.0, "dt": 0.05})
    _write_series(u, sc.omega, float(traj.get("t_max", 20.0)), float(traj.get("dt", 0.05)), out / "trajectory.csv")
    print(f"termination={rep.termination} iterations={rep.iterations} residual={rep.final_residual:.3e} "
          f"J={rep.J_history[-1]:.12g}")
    if rep.termination == "line_search_failure" and rep.final_residual > sc.solver.residual_tol:
        return EXIT_LINESEARCH
    return EXIT_OK if rep.final_residual <= sc.solver.residual_tol else EXIT_FAIL


def _load_solution(path, problem):
    if not Path(path).exists():
        raise FileNotFoundError(path)
    u, payload = ts.read_coefficients_json(path)
    U = problem.from_poly(u.truncate(problem.degree) if u.degree > problem.degree else u)
    return u, U, payload


def cmd_verify(args) -> int:
    sc = load_scenario(args.config, args.seed)
    out = _out_dir(args, sc)
    problem = sc.problem()
    path = args.solution or (out / "solution.json")
    _, U, _ = _load_solution(path, problem)
    U = problem.manifold.retract_closest(U)
    cs = constants = None
    if sc.domain is not None and not sc.domain.bypass and args.pairs:
        report = check_hypotheses(sc.domain, sc.W, sc.sampling)
        cs, constants = ConformalStructure(sc.manifold, sc.V), report.constants
    cert = verify(U, problem, sc.solver, sc.domain, cs, constants, pairs=args.pairs)
    _write_json(out / "certificate.json", cert.to_dict())
    for name, c in cert.checks.items():
        print(f"{name}: {'PASS' if c['pass'] else 'FAIL'}  value={c['value']}")
    return EXIT_OK if cert.passed else EXIT_FAIL


def _endpoints(args, sc):
    x = args.x if args.x is not None else sc.geodesic.get("x")
    y = args.y if args.y is not None else sc.geodesic.get("y")
    if x is None or y is None:
        raise ConfigError("endpoints needed (geodesic.x / geodesic.y or --x / --y)", "geodesic")
    man = sc.manifold
    return man.retract_closest(np.asarray(x, dtype=float)), man.retract_closest(np.asarray(y, dtype=float))


def cmd_geodesic(args) -> int:
    sc = load_scenario(args.config, args.seed)
    out = _out_dir(args, sc)
    x, y = _endpoints(args, sc)
    metric = args.metric or sc.geodesic.get("metric", "rho_V")
    nodes = args.nodes
    if metric == "rho":
        from .fields import ConstantField
        cs = ConformalStructure(sc.manifold, ConstantField(0.0, sc.manifold.ambient_dim))
    else:
        cs = ConformalStructure(sc.manifold, sc.V)
    path = cs.geodesic_path(x, y, nodes)
    if metric == "rho":
        path = GeodesicPath(path.s, path.x, path.v, sc.V.value(path.x), metric="rho")
    path.write_csv(out / f"geodesic_{metric}.csv")
    print(f"wrote {nodes} nodes to {out / f'geodesic_{metric}.csv'}")
    return EXIT_OK


def cmd_chi(args) -> int:
    sc = load_scenario(args.config, args.seed)
    out = _out_dir(args, sc)
    x, y = _endpoints(args, sc)
    cs = ConformalStructure(sc.manifold, sc.V)
    s = np.linspace(0.0, 1.0, args.nodes)
    chi, dchi = cs.connecting_chi(x, y, s)
    n = chi.shape[-1]
    with open(out / "chi.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s"] + [f"x_{i + 1}" for i in range(n)] + [f"dchi_{i + 1}" for i in range(n)])
        for si, a, b in zip(s, chi, dchi):
            w.writerow([repr(float(si))] + [repr(float(v)) for v in a] + [repr(float(v)) for v in b])
    print(f"wrote {args.nodes} nodes to {out / 'chi.csv'}")
    return EXIT_OK


def cmd_export(args) -> int:
    if not Path(args.solution).exists():
        raise FileNotFoundError(args.solution)
    if args.dt <= 0 or args.t_max < 0:
        raise ConfigError("need dt > 0 and t_max >= 0", "export")
    u, payload = ts.read_coefficients_json(args.solution)
    if "omega" not in payload:
        raise ConfigError("solution file lacks omega", "omega")
    omega = ts.FrequencyVector(payload["omega"])
    out = Path(args.out) if args.out else Path(args.solution).parent
    out.mkdir(parents=True, exist_ok=True)
    count = _write_series(u, omega, args.t_max, args.dt, out / "series.csv")
    print(f"wrote {count} rows to {out / 'series.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qpvar", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        if needs_config:
            sp.add_argument("--config", required=True, help="scenario JSON file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="override the scenario seed")

    sp = sub.add_parser("check", help="evaluate the hypotheses on sample grids")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("solve", help="minimize the averaged Lagrangian")
    common(sp)
    sp.add_argument("--force", action="store_true", help="solve even if the hypothesis check fails")
    sp.add_argument("--unnormalized", action="store_true",
                    help="report J as the unnormalized torus integral")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="certify a solution file")
    common(sp)
    sp.add_argument("--solution", help="solution JSON (default: OUT/solution.json)")
    sp.add_argument("--pairs", type=int, default=0, help="sampled convexity-gap pairs")
    sp.set_defaults(func=cmd_verify)

    for name, helptext in (("geodesic", "export a geodesic path"), ("chi", "export a connecting curve")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--x", type=float, nargs="+")
        sp.add_argument("--y", type=float, nargs="+")
        sp.add_argument("--nodes", type=int, default=33)
        if name == "geodesic":
            sp.add_argument("--metric", choices=["rho", "rho_V"])
            sp.set_defaults(func=cmd_geodesic)
        else:
            sp.set_defaults(func=cmd_chi)

    sp = sub.add_parser("export", help="sample a solution along t -> omega t")
    common(sp, needs_config=False)
    sp.add_argument("--solution", required=True)
    sp.add_argument("--t-max", type=float, required=True)
    sp.add_argument("--dt", type=float, required=True)
    sp.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as err:
        print(f"file not found: {err}", file=sys.stderr)
        return EXIT_MISSING
    except SamplingError as err:
        print(f"sampling failed: {err}", file=sys.stderr)
        return EXIT_SAMPLING
    except ShootingError as err:
        print(f"shooting failed: {err}", file=sys.stderr)
        return EXIT_SHOOTING


if __name__ == "__main__":
    sys.exit(main())
