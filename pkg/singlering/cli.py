#!/usr/bin/env python3
"""
Command-line entry point.

Usage:
    python -m singlering.cli <command> [--config PATH] [--seed INT] [--out DIR] [--threads INT]

Example:
    python -m singlering.cli support-exp --config configs/uniform.json --out results/uniform
    python -m singlering.cli sd-solve --rho 3 --re 0.5 --im 0.01
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from singlering.config import settings
from singlering.models import ExperimentConfig
from singlering.services import ensemble, freeconv, harness, ringlaw
from singlering.services.errors import EXIT_CONFIG, EXIT_OK, SingleRingError, exit_code_for
from singlering.services.measures import symmetrize
from singlering.utils.export import write_csv
from singlering.utils.logger import setup_logging
from singlering.utils.seeding import trial_seeds

logger = logging.getLogger(__name__)

SOLVE_FIELDS = [
    "z_re", "z_im", "rho", "G_re", "G_im", "G_U_re", "G_U_im", "branch_ok", "path_branch_ok", "residual", "iterations",
]


def _resolve(args: argparse.Namespace) -> ExperimentConfig:
    cfg = harness.load_config(args.config)
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if args.threads is not None:
        update["threads"] = args.threads
    if args.out is not None:
        update["output_dir"] = args.out
    cfg = ExperimentConfig.model_validate({**cfg.model_dump(), **update})
    logger.info(f"Resolved configuration: {cfg.model_dump_json()}")
    return cfg


def _out_dir(cfg: ExperimentConfig) -> Path:
    return settings.get_output_dir(cfg.output_dir)


def cmd_sample(args: argparse.Namespace, cfg: ExperimentConfig) -> None:
    family = harness.resolve_theta(cfg.theta)
    n = args.n or cfg.n_list[-1]
    T = harness.quantile_diagonal(family, n)
    spectra = []
    for k in range(cfg.trials):
        su, sv = trial_seeds(cfg.seed, k, n)
        spectra.append(ensemble.spectrum(ensemble.assemble(T, su, sv)))
    ensemble.export_eigenvalue_cloud(spectra, _out_dir(cfg) / "eigenvalues.csv")


def cmd_sd_solve(args: argparse.Namespace, cfg: ExperimentConfig) -> None:
    family = harness.resolve_theta(cfg.theta)
    theta_sym = symmetrize(family.discretize(cfg.n_list[-1]))
    out = _out_dir(cfg)
    if args.grid:
        grid = harness.law_grid(theta_sym, args.rho, cfg.grids.x_points, cfg.grids.x_max)
        law = freeconv.density(
            theta_sym, args.rho, grid, cfg.grids.eps, tol=cfg.tolerances.solver_tol, threads=cfg.threads
        )
        freeconv.export_density(law, out / "density.csv")
        logger.info(f"Support components: {law.components}")
        return
    state = freeconv.solve_sd(theta_sym, args.rho, complex(args.re, args.im), cfg.tolerances.solver_tol)
    row = {
        "z_re": args.re, "z_im": args.im, "rho": args.rho,
        "G_re": state.G.real, "G_im": state.G.imag, "G_U_re": state.G_U.real, "G_U_im": state.G_U.imag,
        "branch_ok": state.branch_ok, "path_branch_ok": state.path_branch_ok,
        "residual": state.residual, "iterations": state.iterations,
    }
    write_csv(out / "sd_solve.csv", SOLVE_FIELDS, [row])


def cmd_ring_density(args: argparse.Namespace, cfg: ExperimentConfig) -> None:
    family = harness.resolve_theta(cfg.theta)
    theta_sym = symmetrize(family.discretize(cfg.n_list[-1]))
    radii = ringlaw.folded_radii(theta_sym)
    if cfg.grids.r_min is not None and cfg.grids.r_max is not None:
        r_grid = np.linspace(cfg.grids.r_min, cfg.grids.r_max, args.points or cfg.grids.r_points)
    else:
        r_grid = ringlaw.default_radial_grid(radii, args.points or cfg.grids.r_points)
    rd = ringlaw.radial_density(theta_sym, r_grid, threads=cfg.threads)
    out = _out_dir(cfg)
    ringlaw.export_ring_density(rd, out / "ring_density.csv")
    ringlaw.export_boundary_report(ringlaw.boundary_check(rd), out / "ring_report.json")


def cmd_support_exp(args: argparse.Namespace, cfg: ExperimentConfig) -> None:
    harness.export_support_report(harness.run_support_experiment(cfg), _out_dir(cfg))


def cmd_sticking_exp(args: argparse.Namespace, cfg: ExperimentConfig) -> None:
    harness.run_sticking_experiment(cfg).write(_out_dir(cfg) / "sticking.csv")


def cmd_law_compare(args: argparse.Namespace, cfg: ExperimentConfig) -> None:
    harness.run_law_comparison(cfg).write(_out_dir(cfg) / "law_comparison.csv")


def cmd_serve(args: argparse.Namespace) -> None:
    import uvicorn

    uvicorn.run("singlering.main:app", host=args.host or settings.HOST, port=args.port or settings.PORT)


COMMANDS = {
    "sample": cmd_sample,
    "sd-solve": cmd_sd_solve,
    "ring-density": cmd_ring_density,
    "support-exp": cmd_support_exp,
    "sticking-exp": cmd_sticking_exp,
    "law-compare": cmd_law_compare,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Experiment config (JSON)")
    common.add_argument("--seed", type=int, help="Base seed (overrides the config)")
    common.add_argument("--out", help="Output directory (overrides the config)")
    common.add_argument("--threads", type=int, help="Worker threads (overrides the config)")

    parser = argparse.ArgumentParser(prog="singlering", description="Single ring theorem numerical toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="Emit an eigenvalue cloud CSV")
    p.add_argument("--n", type=int, help="Matrix size (defaults to the largest n in the config)")

    p = sub.add_parser("sd-solve", parents=[common], help="Solve the limit system at a point or on a grid")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--re", type=float, default=0.0)
    p.add_argument("--im", type=float, default=1e-3)
    p.add_argument("--grid", action="store_true", help="Invert the density on the config x-grid")

    p = sub.add_parser("ring-density", parents=[common], help="Radial density of the limiting ring law")
    p.add_argument("--points", type=int, help="Radial grid points")

    sub.add_parser("support-exp", parents=[common], help="Support-convergence experiment")
    sub.add_parser("sticking-exp", parents=[common], help="Extreme-modulus sticking experiment")
    sub.add_parser("law-compare", parents=[common], help="Empirical vs limiting ν^z")

    p = sub.add_parser("serve", help="Run the HTTP API")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging()

    if args.command == "serve":
        cmd_serve(args)
        return EXIT_OK

    try:
        cfg = _resolve(args)
        COMMANDS[args.command](args, cfg)
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except SingleRingError as e:
        logger.error(f"{args.command} failed: {e}")
        return exit_code_for(e)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
