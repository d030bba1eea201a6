#!/usr/bin/env python3
"""
Run the acceptance experiments end to end and print a pass/fail table.

Usage:
    python scripts/run_acceptance.py [--only 1 3 7] [--quick] [--threads N] [--out DIR]

Example:
    python scripts/run_acceptance.py --quick
    python scripts/run_acceptance.py --only 5 --threads 4
"""
import argparse
import filecmp
import logging
import math
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Tuple

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from singlering.config import settings  # noqa: E402
from singlering.models import ExperimentConfig, GridSpec, ProbeSpec, ThetaSpec  # noqa: E402
from singlering.services import ensemble, freeconv, harness, rdiagonal, ringlaw  # noqa: E402
from singlering.services.errors import BranchError, SingleRingError  # noqa: E402
from singlering.services.measures import DiscreteMeasure, ring_radii, symmetrize  # noqa: E402
from singlering.utils.logger import setup_logging  # noqa: E402
from singlering.utils.seeding import trial_seeds  # noqa: E402

logger = logging.getLogger("acceptance")

TWO_ATOM = [(0.5, 0.5), (2.0, 0.5)]
DIRAC_ONE = [(1.0, 1.0)]


@dataclass
class Options:
    quick: bool
    threads: int
    out: Path

    def size(self, full: int, quick: int) -> int:
        return quick if self.quick else full


@dataclass
class Outcome:
    passed: bool
    detail: str


def _custom(atoms) -> ThetaSpec:
    return ThetaSpec(family="custom", atoms=atoms)


def check_unitary_ring(opts: Options) -> Outcome:
    start = time.perf_counter()
    draw = ensemble.assemble(np.ones(200), *trial_seeds(settings.DEFAULT_SEED, 0, 200))
    dev = float(np.max(np.abs(ensemble.spectrum(draw).moduli - 1.0)))
    elapsed = time.perf_counter() - start
    return Outcome(dev <= 1e-8 and elapsed < 5.0, f"max ||λ|-1| = {dev:.2e}, {elapsed:.2f}s")


def check_ring_radii(opts: Options) -> Outcome:
    # exact moments: ∫x⁻² dΘ = ∫x² dΘ = 17/8
    exact = Fraction(1, 2) * Fraction(1, 4) + Fraction(1, 2) * 4
    a_ref, b_ref = 1 / math.sqrt(exact), math.sqrt(exact)
    radii = ring_radii(DiscreteMeasure.from_atoms(TWO_ATOM))
    dev = max(abs(radii.a - a_ref), abs(radii.b - b_ref))
    return Outcome(dev <= 1e-9, f"(a, b) = ({radii.a:.6f}, {radii.b:.6f}), dev {dev:.1e}")


def check_support_convergence(opts: Options) -> Outcome:
    n = opts.size(800, 200)
    cfg = ExperimentConfig(
        n_list=[n],
        trials=20,
        probes=[ProbeSpec(re=0.5, eps=0.1), ProbeSpec(re=1.15, eps=0.1)],
        threads=opts.threads,
    )
    report = harness.run_support_experiment(cfg)
    row = report.modulus_rows[0]
    dev_b = abs(row["mean_max_modulus"] - report.b)
    dev_a = abs(row["mean_min_modulus"] - report.a)
    hole, ring = report.fraction(n, 0.5), report.fraction(n, 1.15)
    passed = dev_b <= 0.05 and dev_a <= 0.05 and hole <= 1 / 20 and ring >= 19 / 20
    return Outcome(passed, f"n={n}: dev_b {dev_b:.3f}, dev_a {dev_a:.3f}, hole {hole:.2f}, ring {ring:.2f}")


def check_closed_forms(opts: Options) -> Outcome:
    rng = np.random.default_rng(1)
    delta_zero = symmetrize(DiscreteMeasure.dirac(0.0))
    worst_delta = 0.0
    for _ in range(50):
        rho = rng.uniform(0.0, 3.0)
        z = complex(rng.uniform(-4.0, 4.0), rng.uniform(1e-3, 10.0))
        G = freeconv.solve_sd(delta_zero, rho, z).G
        worst_delta = max(worst_delta, abs(G - z / (z * z - rho * rho)))

    lambda_one = symmetrize(DiscreteMeasure.dirac(1.0))
    worst_arcsine = 0.0
    for x in np.linspace(-3.0, 3.0, 20):
        z = complex(x, 0.05)
        G = freeconv.solve_sd(lambda_one, 1.0, z).G
        worst_arcsine = max(worst_arcsine, abs(G - 1.0 / (np.sqrt(z - 2) * np.sqrt(z + 2))))
    passed = worst_delta <= 1e-8 and worst_arcsine <= 1e-6
    return Outcome(passed, f"δ0 err {worst_delta:.1e}, arcsine err {worst_arcsine:.1e}")


def check_law_comparison(opts: Options) -> Outcome:
    cases: List[Tuple[ThetaSpec, float, int, int, float]] = [
        (_custom(DIRAC_ONE), 3.0, 1000, 10, 0.05),
        (_custom(DIRAC_ONE), 0.0, 500, 2, 0.05),
        (ThetaSpec(), 1.15, 1000, 10, 0.07),
        (_custom(TWO_ATOM), 0.4, 1000, 10, 0.05),
    ]
    details, passed = [], True
    for theta, rho, n, trials, limit in cases:
        n = opts.size(n, 200)
        cfg = ExperimentConfig(
            theta=theta,
            n_list=[n],
            trials=trials,
            probes=[ProbeSpec(re=rho)],
            grids=GridSpec(eps=1e-3),
            threads=opts.threads,
        )
        ks = harness.run_law_comparison(cfg).rows[0]["ks"]
        passed &= ks < limit
        details.append(f"{theta.family}@{rho}: {ks:.3f}")
    return Outcome(passed, ", ".join(details))


def check_solver_invariants(opts: Options) -> Outcome:
    rng = np.random.default_rng(2)
    q = (np.arange(1, 41) - 0.5) / 40
    theta_sym = symmetrize(DiscreteMeasure.from_arrays(0.5 + 1.5 * q))
    calls = opts.size(1000, 200)
    failures = 0
    for _ in range(calls):
        rho = rng.uniform(0.05, 2.5)
        y = rng.uniform(1e-3, 5.0)
        on_axis = freeconv.solve_sd(theta_sym, rho, complex(0.0, y))
        failures += abs(on_axis.G.real) > 1e-8 or on_axis.G.imag >= 0
        try:
            state = freeconv.solve_sd(theta_sym, rho, complex(rng.uniform(-3.0, 3.0), y), principal_only=True)
        except BranchError:
            continue
        failures += not state.path_branch_ok or state.branch_quantity.real <= 0 or state.G.imag >= 0

    rho = 0.8
    law = freeconv.density(theta_sym, rho, np.linspace(-5.0, 5.0, 1001), eps=5e-3, warm_start=True)
    moment_dev = abs(law.moment(2) / (rho**2 + theta_sym.moment(2)) - 1.0)
    passed = failures == 0 and moment_dev <= 0.02
    return Outcome(passed, f"{failures} invariant failures in {2 * calls} calls, second moment dev {moment_dev:.3f}")


def check_ring_density(opts: Options) -> Outcome:
    family = harness.UniformInterval(0.5, 2.0)
    theta_sym = symmetrize(family.discretize(opts.size(400, 200)))
    rd = ringlaw.radial_density(
        theta_sym, ringlaw.default_radial_grid(ringlaw.folded_radii(theta_sym), 121), threads=opts.threads
    )
    radii = family.radii()
    mass = rd.mass()
    outside = (rd.radii < 0.95 * radii.a) | (rd.radii > 1.05 * radii.b)
    leak = float(np.max(np.abs(rd.density[outside]))) if np.any(outside) else 0.0
    report = ringlaw.boundary_check(rd)
    dev_a = abs(report.limit_a * math.pi * radii.a**2 - 1.0)
    dev_b = abs(report.limit_b * math.pi * radii.b**2 - 1.0)

    cfg = ExperimentConfig(n_list=[opts.size(1000, 300)], trials=opts.size(4, 2), threads=opts.threads)
    table = harness.run_radial_comparison(cfg, rd)
    within = sum(row["within"] for row in table.rows) / len(table.rows)
    ringlaw.export_ring_density(rd, opts.out / "ring_density.csv")
    table.write(opts.out / "radial_comparison.csv")

    passed = abs(mass - 1.0) <= 0.02 and leak <= 1e-3 and dev_a <= 0.10 and dev_b <= 0.10 and within >= 0.9
    return Outcome(
        passed,
        f"mass {mass:.3f}, leak {leak:.1e}, edges ({dev_a:.2f}, {dev_b:.2f}), bins within {within:.0%}",
    )


def check_rdiagonal(opts: Options) -> Outcome:
    rng = np.random.default_rng(3)
    series_err = 0.0
    for _ in range(100):
        s = rng.uniform(0.01, 3.0)
        gamma = rng.uniform(0.01, 0.9) / s
        series_err = max(series_err, abs(rdiagonal.F_gamma(gamma, s) - rdiagonal.F_gamma_partial(gamma, s)))

    margins_ok = all(
        math.isclose(rdiagonal.bound_params(eps, c0, 1.0).margin, 0.25, rel_tol=1e-12)
        for eps, c0 in rng.uniform(0.01, 10.0, size=(100, 2))
    )

    majorized = 0
    for _ in range(100):
        n = int(rng.integers(1, 9))
        A = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2 * n)
        B = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2 * n)
        majorized += rdiagonal.recursion_majorization_check(A, B, rng.uniform(1e-3, 1.0), k_max=12)

    n = opts.size(500, 200)
    T = harness.quantile_diagonal(harness.AtomicTheta(DiscreteMeasure.from_atoms(TWO_ATOM)), n)
    bound = 1.457738 / 1.6 + 0.05
    good = sum(
        rdiagonal.spectral_radius_estimate(ensemble.assemble(T, *trial_seeds(settings.DEFAULT_SEED, k, n)).A / 1.6)
        <= bound
        for k in range(10)
    )
    passed = series_err <= 1e-10 and margins_ok and majorized == 100 and good >= 9
    return Outcome(
        passed,
        f"series err {series_err:.1e}, margins {'ok' if margins_ok else 'off'}, "
        f"majorized {majorized}/100, radius {good}/10",
    )


def check_determinism(opts: Options) -> Outcome:
    cfg = ExperimentConfig(
        n_list=[opts.size(200, 60), opts.size(400, 120)],
        trials=8,
        probes=[ProbeSpec(re=0.5), ProbeSpec(re=1.15, eps=0.1)],
    )
    dirs = []
    for label, threads in (("serial", 1), ("parallel", 8)):
        out = opts.out / "determinism" / label
        run = cfg.model_copy(update={"threads": threads})
        harness.export_support_report(harness.run_support_experiment(run), out)
        harness.run_sticking_experiment(run).write(out / "sticking.csv")
        dirs.append(out)
    names = ["support_probes.csv", "support_moduli.csv", "sticking.csv"]
    match, _, _ = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
    return Outcome(len(match) == len(names), f"identical: {', '.join(match) or 'none'}")


CHECKS: Dict[int, Tuple[str, Callable[[Options], Outcome]]] = {
    1: ("unitary degenerate ring", check_unitary_ring),
    2: ("ring radii arithmetic", check_ring_radii),
    3: ("support convergence", check_support_convergence),
    4: ("solver closed forms", check_closed_forms),
    5: ("solver vs Monte Carlo", check_law_comparison),
    6: ("branch and symmetry invariants", check_solver_invariants),
    7: ("ring density", check_ring_density),
    8: ("R-diagonal calculus", check_rdiagonal),
    9: ("determinism", check_determinism),
}


def main():
    parser = argparse.ArgumentParser(description="Run the acceptance experiments")
    parser.add_argument("--only", type=int, nargs="+", choices=sorted(CHECKS), help="Run only these checks")
    parser.add_argument("--quick", action="store_true", help="Reduced matrix sizes for a smoke run")
    parser.add_argument("--threads", type=int, default=settings.DEFAULT_THREADS, help="Worker threads")
    parser.add_argument("--out", default=str(Path(settings.OUTPUT_DIR) / "acceptance"), help="Output directory")
    args = parser.parse_args()

    setup_logging()
    opts = Options(quick=args.quick, threads=args.threads, out=settings.get_output_dir(args.out))

    results = []
    for number in args.only or sorted(CHECKS):
        name, check = CHECKS[number]
        logger.info(f"Running check {number}: {name}")
        start = time.perf_counter()
        try:
            outcome = check(opts)
        except SingleRingError as e:
            logger.error(f"Check {number} raised: {e}")
            outcome = Outcome(False, f"error: {e}")
        results.append((number, name, outcome, time.perf_counter() - start))

    width = max(len(name) for _, name, _, _ in results)
    print(f"\n{'#':>2}  {'check':<{width}}  {'result':<6}  {'time':>7}  detail")
    for number, name, outcome, elapsed in results:
        status = "PASS" if outcome.passed else "FAIL"
        print(f"{number:>2}  {name:<{width}}  {status:<6}  {elapsed:>6.1f}s  {outcome.detail}")

    if not all(outcome.passed for _, _, outcome, _ in results):
        sys.exit(1)


if __name__ == "__main__":
    main()
