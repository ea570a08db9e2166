"""Command-line interface.

Subcommands: solve, deficit, sweep, planes, chain, map.  Each takes
--config <path> (JSON) and --out <dir>; --grid NR,NT and --seed N override
the config.  Exit codes: 0 success, 2 validation error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import chain as chain_mod
from . import deficits, domains, harness, movingplanes, solver
from .errors import SingularJacobianError, ValidationError
from .fields import FieldSpec, NonlinearitySpec
from .grid import build_grid

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path!r}: {exc}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path!r} is not valid JSON: {exc}")


def _write_json(obj, out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _grid_from(config: dict, args):
    if args.grid:
        n_r, n_theta = (int(v) for v in args.grid.split(","))
    else:
        g = config.get("grid", {})
        n_r, n_theta = g.get("n_r", 129), g.get("n_theta", 256)
    return build_grid(n_r, n_theta)


def _solver_params(config: dict) -> solver.SolverParams:
    sp = config.get("solver", {})
    return solver.SolverParams(
        newton_tol=sp.get("newton_tol", 1e-10),
        max_newton_iters=sp.get("max_newton_iters", 50),
    )


def _run_solve_config(config: dict, args):
    grid = _grid_from(config, args)
    params = _solver_params(config)
    f = NonlinearitySpec.from_json(config["nonlinearity"])
    if "map" in config:
        dmap = domains.DomainMap.from_json(config["map"])
        problem = domains.pullback(dmap, f)
        report = solver.solve_general(problem.op, problem.rhs, grid, params)
        spec_echo = {"map": dmap.to_json(), "nonlinearity": f.to_json()}
    else:
        kappa = FieldSpec.from_json(config["kappa"])
        report = solver.solve_semilinear(kappa, f, grid, params)
        spec_echo = {"kappa": kappa.to_json(), "nonlinearity": f.to_json()}
    return report, spec_echo


def cmd_solve(config: dict, args) -> int:
    report, spec_echo = _run_solve_config(config, args)
    solver.dump_solution(report, args.out, spec_json=spec_echo)
    if not report.converged:
        print(f"solve failed: {report.failure} (residual {report.residual_sup:g})")
        return EXIT_SOLVER
    print(
        f"solved: residual {report.residual_sup:.3g} in {report.iterations} "
        f"iterations, sup norm {report.sup_norm:.6g}"
    )
    return EXIT_OK


def cmd_deficit(config: dict, args) -> int:
    kappa = FieldSpec.from_json(config["kappa"])
    resolution = tuple(config.get("resolution", deficits.DEFAULT_RESOLUTION))
    report = deficits.deficit_kappa(kappa, resolution)
    zeroth = deficits.deficit_zeroth(kappa, resolution)
    out = {"first_order": report.to_json(), "zeroth": zeroth}
    path = _write_json(out, args.out, "deficit.json")
    print(f"deficit total {report.total:.6g} (zeroth {zeroth:.6g}) -> {path}")
    return EXIT_OK


def cmd_sweep(config: dict, args) -> int:
    cfg = harness.ExperimentConfig.from_json(config)
    if args.grid:
        n_r, n_theta = (int(v) for v in args.grid.split(","))
        obj = cfg.to_json()
        obj["grid"] = {"n_r": n_r, "n_theta": n_theta}
        cfg = harness.ExperimentConfig.from_json(obj)
    if args.seed is not None:
        obj = cfg.to_json()
        obj["seed"] = args.seed
        cfg = harness.ExperimentConfig.from_json(obj)
    result = harness.run_sweep(cfg)
    paths = harness.emit_report(result, args.out)
    print(f"sweep alpha = {result.alpha:.4f} -> {paths['csv']}")
    return EXIT_OK


def cmd_planes(config: dict, args) -> int:
    report, _ = _run_solve_config(config, args)
    if not report.converged:
        print(f"solve failed: {report.failure}")
        return EXIT_SOLVER
    slack = config.get("slack", "deficit")
    if slack == "deficit":
        kappa = FieldSpec.from_json(config["kappa"])
        slack = deficits.deficit_kappa(kappa).total
    scan = movingplanes.lambda_star(
        report.field, slack=float(slack), scan_step=config.get("scan_step")
    )
    path = _write_json(scan.to_json(), args.out, "planes.json")
    print(f"lambda_star = {scan.lambda_star:.6g} -> {path}")
    return EXIT_OK


def cmd_chain(config: dict, args) -> int:
    cfg = chain_mod.ChainConfig(
        d=config["d"],
        delta=config["delta"],
        ell=config["ell"],
        c_sharp=config.get("c_sharp", 1.0),
        n_dim=config.get("n_dim", 2),
    )
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    report = chain_mod.build_chain(cfg)
    out = report.to_json()
    if report.branch == "chain":
        bound = chain_mod.verify_log_bound(cfg, report)
        overlap = chain_mod.verify_overlap(
            cfg, seed=seed, n_samples=config.get("mc_samples", 100_000), report=report
        )
        out["log_bound"] = {
            "ok": bound.ok,
            "threshold": bound.threshold,
            "margin": bound.margin,
            "ratio": bound.ratio,
            "ratio_ok": bound.ratio_ok,
        }
        out["overlap"] = {
            "ok": overlap.ok,
            "route": overlap.route,
            "worst_fraction": overlap.worst_fraction,
        }
    path = _write_json(out, args.out, "chain.json")
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "chain.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_csv())
    print(f"chain N = {report.n_balls} ({report.branch}) -> {path}")
    return EXIT_OK


def cmd_map(config: dict, args) -> int:
    profile = None
    if "profile" in config:
        profile = domains.CircleProfile.from_json(config["profile"])
    dmap = domains.make_map(config["kind"], config["eps"], profile)
    out = dmap.to_json()
    out["c3_norm_sampled"] = dmap.c3_norm
    if "nonlinearity" in config:
        f = NonlinearitySpec.from_json(config["nonlinearity"])
        problem = domains.pullback(dmap, f)
        rep = deficits.deficit_general(problem.op, problem.rhs, U=config.get("U", 1.0))
        out["pullback_deficit"] = rep.to_json()
    path = _write_json(out, args.out, "map.json")
    print(f"map {dmap.kind} eps={dmap.eps} -> {path}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "deficit": cmd_deficit,
    "sweep": cmd_sweep,
    "planes": cmd_planes,
    "chain": cmd_chain,
    "map": cmd_map,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnnlab",
        description="Symmetry-stability laboratory for elliptic problems on the disk",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--grid", help="override grid as NR,NT")
        p.add_argument("--seed", type=int, help="override seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args.config)
        return COMMANDS[args.command](config, args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (KeyError, TypeError) as exc:
        print(f"config error: {exc!r}", file=sys.stderr)
        return EXIT_VALIDATION
    except SingularJacobianError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
