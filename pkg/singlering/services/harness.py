"""
Experiment orchestration: named Θ families, the quantile coupling T_n, and the
support, sticking, law-comparison and radial Monte Carlo experiments.

Every trial draws its unitaries from seeds derived by hash64(base, trial, n), and
per-trial results are folded in (n, trial) order, so reports do not depend on the
number of worker threads.
"""
from __future__ import annotations

import json
import logging
import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from singlering.models import ExperimentConfig, ProbeSpec, ThetaSpec
from singlering.services import ensemble, freeconv
from singlering.services.errors import ConfigError, NumericalFailure
from singlering.services.measures import DiscreteMeasure, RingRadii, load_measure, ring_radii, symmetrize
from singlering.services.ringlaw import RingDensity
from singlering.utils.export import write_csv, write_json
from singlering.utils.seeding import trial_seeds

logger = logging.getLogger(__name__)


# Θ families

class ThetaFamily(ABC):
    """A limiting singular-value law on [0, ∞) that can be sampled by quantiles."""

    name: str = "theta"

    @abstractmethod
    def quantile(self, q: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def radii(self) -> RingRadii:
        ...

    def discretize(self, n: int) -> DiscreteMeasure:
        """L_{T_n} for the quantile coupling."""
        return DiscreteMeasure.from_arrays(quantile_diagonal(self, n))


class AtomicTheta(ThetaFamily):
    def __init__(self, measure: DiscreteMeasure, name: str = "custom"):
        self.measure = measure
        self.name = name

    def quantile(self, q: np.ndarray) -> np.ndarray:
        return self.measure.quantile(q)

    def radii(self) -> RingRadii:
        return ring_radii(self.measure)


class UniformInterval(ThetaFamily):
    name = "uniform-interval"

    def __init__(self, low: float = 0.5, high: float = 2.0):
        if not 0 <= low < high:
            raise ConfigError("uniform-interval needs 0 <= low < high")
        self.low = low
        self.high = high

    def quantile(self, q: np.ndarray) -> np.ndarray:
        return self.low + np.asarray(q, dtype=float) * (self.high - self.low)

    def radii(self) -> RingRadii:
        lo, hi = self.low, self.high
        b = math.sqrt((hi**3 - lo**3) / (3.0 * (hi - lo)))
        if lo == 0:
            return RingRadii(a=0.0, b=b, a_defined=False)
        # ∫x⁻² dΘ = 1/(lo·hi)
        return RingRadii(a=math.sqrt(lo * hi), b=b)


class QuarterCircle(ThetaFamily):
    """Singular values of a normalized Ginibre matrix: density sqrt(4-x²)/π on [0, 2]."""

    name = "quarter-circle"

    @staticmethod
    def cdf(x: float) -> float:
        x = min(max(x, 0.0), 2.0)
        return (x * math.sqrt(4.0 - x * x) + 4.0 * math.asin(x / 2.0)) / (2.0 * math.pi)

    def quantile(self, q: np.ndarray) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        out = np.empty_like(q)
        for i, qi in enumerate(q):
            if qi <= 0:
                out[i] = 0.0
            elif qi >= 1:
                out[i] = 2.0
            else:
                out[i] = brentq(lambda x: self.cdf(x) - qi, 0.0, 2.0, xtol=1e-14)
        return out

    def radii(self) -> RingRadii:
        return RingRadii(a=0.0, b=1.0, a_defined=False)


def resolve_theta(spec: ThetaSpec) -> ThetaFamily:
    """Build the Θ family named by a config block."""
    if spec.family == "uniform-interval":
        return UniformInterval(spec.low, spec.high)
    if spec.family == "quarter-circle":
        return QuarterCircle()
    if spec.atoms is not None:
        measure = DiscreteMeasure.from_atoms(spec.atoms)
    else:
        measure = load_measure(spec.path)
    return AtomicTheta(measure, name=spec.family)


def quantile_diagonal(theta: Union[ThetaFamily, DiscreteMeasure], n: int) -> np.ndarray:
    """Entry i is the quantile of Θ at (i - 1/2)/n."""
    if n < 1:
        raise ConfigError("quantile_diagonal needs n >= 1")
    q = (np.arange(1, n + 1) - 0.5) / n
    return np.asarray(theta.quantile(q), dtype=float)


def load_config(path: Optional[str]) -> ExperimentConfig:
    """Read an ExperimentConfig from JSON; defaults when path is None."""
    if path is None:
        return ExperimentConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return ExperimentConfig.model_validate(json.load(fh))
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {path}") from e
    except (json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"Invalid config {path}: {e}") from e


def probe_radius(probe: ProbeSpec, radii: RingRadii) -> float:
    """ε of a probe, defaulting to a tenth of the distance from |z| to the nearer ring edge."""
    if probe.eps is not None:
        return probe.eps
    r = abs(probe.z)
    dist = min(abs(r - radii.a), abs(r - radii.b))
    if dist <= 0:
        raise ConfigError(f"Probe at z={probe.z} sits on the ring edge; give eps explicitly")
    return 0.1 * dist


# Trials

@dataclass
class TrialResult:
    n: int
    trial: int
    seed_u: int
    seed_v: int
    min_modulus: float = math.nan
    max_modulus: float = math.nan
    hits: List[bool] = field(default_factory=list)
    log_sigma: List[float] = field(default_factory=list)
    log_sigma_sq_small: List[float] = field(default_factory=list)
    moduli: Optional[np.ndarray] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class Table:
    fieldnames: List[str]
    rows: List[Dict[str, Any]]

    def write(self, path: Path) -> Path:
        return write_csv(path, self.fieldnames, self.rows)


def _run_trials(
    cfg: ExperimentConfig,
    family: ThetaFamily,
    body: Callable[[ensemble.EnsembleDraw, TrialResult], None],
) -> Dict[int, List[TrialResult]]:
    """
    Run every (n, trial) task and fold the results in (n, trial) order.

    A NumericalFailure in one trial is recorded on that trial and does not stop the run.
    """
    diagonals = {n: quantile_diagonal(family, n) for n in cfg.n_list}
    tasks = [(n, k) for n in cfg.n_list for k in range(cfg.trials)]

    def run(task: Tuple[int, int]) -> TrialResult:
        n, k = task
        su, sv = trial_seeds(cfg.seed, k, n)
        result = TrialResult(n=n, trial=k, seed_u=su, seed_v=sv)
        try:
            draw = ensemble.assemble(diagonals[n], su, sv)
            body(draw, result)
        except NumericalFailure as e:
            logger.warning(f"Trial {k} at n={n} failed: {e}")
            result.error = str(e)
        return result

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            done = list(pool.map(run, tasks))
    else:
        done = [run(t) for t in tasks]

    folded: Dict[int, List[TrialResult]] = {n: [] for n in cfg.n_list}
    for res in sorted(done, key=lambda r: (r.n, r.trial)):
        folded[res.n].append(res)
    return folded


def _mean_se(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    se = float(np.std(arr, ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(np.mean(arr)), se


# Support convergence

@dataclass
class SupportReport:
    a: float
    b: float
    a_defined: bool
    probe_rows: List[Dict[str, Any]]
    modulus_rows: List[Dict[str, Any]]
    failures: List[Dict[str, Any]]

    PROBE_FIELDS = [
        "n", "z_re", "z_im", "eps", "trials", "hits", "fraction", "mean_log_sigma", "mean_log_sigma_sq_small",
    ]
    MODULUS_FIELDS = [
        "n", "trials", "min_modulus", "mean_min_modulus", "mean_max_modulus", "max_modulus", "a_n", "b_n", "a", "b",
    ]

    def fraction(self, n: int, z: complex) -> float:
        for row in self.probe_rows:
            if row["n"] == n and complex(row["z_re"], row["z_im"]) == z:
                return row["fraction"]
        raise KeyError((n, z))

    def as_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "a_defined": self.a_defined,
            "probes": self.probe_rows,
            "moduli": self.modulus_rows,
            "failures": self.failures,
        }


def run_support_experiment(cfg: ExperimentConfig) -> SupportReport:
    """Probe hit fractions and modulus extremes of A_n = U T_n V over trials."""
    family = resolve_theta(cfg.theta)
    radii = family.radii()
    probes = [(p.z, probe_radius(p, radii)) for p in cfg.probes]
    delta = cfg.tolerances.sigma_delta
    logger.info(f"Support experiment: theta={family.name}, n_list={cfg.n_list}, trials={cfg.trials}, probes={len(probes)}")

    def body(draw: ensemble.EnsembleDraw, res: TrialResult) -> None:
        spec = ensemble.spectrum(draw)
        mod = spec.moduli
        res.min_modulus = float(mod.min())
        res.max_modulus = float(mod.max())
        threshold = draw.n ** (-delta)
        for z, eps in probes:
            res.hits.append(bool(np.min(np.abs(spec.eigenvalues - z)) < eps))
            smin = ensemble.sigma_min(draw, z)
            ls = math.log(smin) if smin > 0 else -math.inf
            res.log_sigma.append(ls)
            res.log_sigma_sq_small.append(ls * ls if smin < threshold else 0.0)

    folded = _run_trials(cfg, family, body)

    probe_rows, modulus_rows, failures = [], [], []
    for n, results in folded.items():
        ok = [r for r in results if r.ok]
        failures += [{"n": r.n, "trial": r.trial, "error": r.error} for r in results if not r.ok]
        realized = ring_radii(family.discretize(n))
        for j, (z, eps) in enumerate(probes):
            hits = sum(r.hits[j] for r in ok)
            probe_rows.append({
                "n": n,
                "z_re": z.real,
                "z_im": z.imag,
                "eps": eps,
                "trials": len(ok),
                "hits": hits,
                "fraction": hits / len(ok) if ok else math.nan,
                "mean_log_sigma": float(np.mean([r.log_sigma[j] for r in ok])) if ok else math.nan,
                "mean_log_sigma_sq_small": float(np.mean([r.log_sigma_sq_small[j] for r in ok])) if ok else math.nan,
            })
        modulus_rows.append({
            "n": n,
            "trials": len(ok),
            "min_modulus": min((r.min_modulus for r in ok), default=math.nan),
            "mean_min_modulus": _mean_se([r.min_modulus for r in ok])[0],
            "mean_max_modulus": _mean_se([r.max_modulus for r in ok])[0],
            "max_modulus": max((r.max_modulus for r in ok), default=math.nan),
            "a_n": realized.a,
            "b_n": realized.b,
            "a": radii.a,
            "b": radii.b,
        })

    return SupportReport(
        a=radii.a,
        b=radii.b,
        a_defined=radii.a_defined,
        probe_rows=probe_rows,
        modulus_rows=modulus_rows,
        failures=failures,
    )


def export_support_report(report: SupportReport, out_dir: Path) -> List[Path]:
    out_dir = Path(out_dir)
    return [
        write_csv(out_dir / "support_probes.csv", SupportReport.PROBE_FIELDS, report.probe_rows),
        write_csv(out_dir / "support_moduli.csv", SupportReport.MODULUS_FIELDS, report.modulus_rows),
        write_json(out_dir / "support_report.json", report.as_dict()),
    ]


# Sticking of the extreme eigenvalues

STICKING_FIELDS = ["n", "quantity", "trials", "mean", "stderr", "reference", "deviation", "applicable"]


def run_sticking_experiment(cfg: ExperimentConfig) -> Table:
    """Mean max|λ| and min|λ| per n with standard errors, paired against b and a."""
    family = resolve_theta(cfg.theta)
    radii = family.radii()
    logger.info(f"Sticking experiment: theta={family.name}, n_list={cfg.n_list}, trials={cfg.trials}")

    def body(draw: ensemble.EnsembleDraw, res: TrialResult) -> None:
        mod = ensemble.spectrum(draw).moduli
        res.min_modulus = float(mod.min())
        res.max_modulus = float(mod.max())

    folded = _run_trials(cfg, family, body)
    rows = []
    for n, results in folded.items():
        ok = [r for r in results if r.ok]
        mean_max, se_max = _mean_se([r.max_modulus for r in ok])
        mean_min, se_min = _mean_se([r.min_modulus for r in ok])
        rows.append({
            "n": n, "quantity": "max", "trials": len(ok), "mean": mean_max, "stderr": se_max,
            "reference": radii.b, "deviation": abs(mean_max - radii.b), "applicable": True,
        })
        rows.append({
            "n": n, "quantity": "min", "trials": len(ok), "mean": mean_min, "stderr": se_min,
            "reference": radii.a if radii.a_defined else None,
            "deviation": abs(mean_min - radii.a) if radii.a_defined else None,
            "applicable": radii.a_defined,
        })
    return Table(STICKING_FIELDS, rows)


# ν_n^z against Θ̃ ⊞ λ_|z|

LAW_FIELDS = ["n", "z_re", "z_im", "rho", "trials", "ks"]


def law_grid(theta_n: DiscreteMeasure, rho: float, points: int, x_max: Optional[float] = None) -> np.ndarray:
    """Symmetric grid covering the support of ν^ρ (contained in [-(max T + ρ), max T + ρ])."""
    half = x_max if x_max is not None else 1.2 * (theta_n.max_abs() + rho) + 0.1
    return np.linspace(-half, half, points)


def run_law_comparison(cfg: ExperimentConfig) -> Table:
    """
    Kolmogorov distance between the trial-averaged CDF of ν_n^z and the solver CDF.

    The solver side uses Θ̃_n = symmetrized L_{T_n}. Both CDFs are Cauchy-smoothed at the
    same height eps when ρ = 0; otherwise the empirical CDF is smoothed and the solver
    CDF integrates the inverted density.
    """
    family = resolve_theta(cfg.theta)
    eps = cfg.grids.eps
    zs = [p.z for p in cfg.probes]
    logger.info(f"Law comparison: theta={family.name}, n_list={cfg.n_list}, probes={zs}")

    grids: Dict[Tuple[int, complex], np.ndarray] = {}
    for n in cfg.n_list:
        theta_n = family.discretize(n)
        for z in zs:
            grids[(n, z)] = law_grid(theta_n, abs(z), cfg.grids.x_points, cfg.grids.x_max)

    cdfs: Dict[Tuple[int, int, complex], np.ndarray] = {}

    def body(draw: ensemble.EnsembleDraw, res: TrialResult) -> None:
        for z in zs:
            nu = ensemble.empirical_nu(draw, z)
            cdfs[(draw.n, res.trial, z)] = freeconv.smoothed_cdf(nu, grids[(draw.n, z)], eps)

    folded = _run_trials(cfg, family, body)
    rows = []
    for n, results in folded.items():
        ok = [r for r in results if r.ok]
        theta_sym = symmetrize(family.discretize(n))
        for z in zs:
            grid = grids[(n, z)]
            empirical = np.mean([cdfs[(n, r.trial, z)] for r in ok], axis=0)
            limit = freeconv.limit_cdf(
                theta_sym, abs(z), grid, eps, tol=cfg.tolerances.solver_tol, warm_start=True
            )
            ks = float(np.max(np.abs(empirical - limit)))
            logger.info(f"KS distance at n={n}, z={z}: {ks:.4f}")
            rows.append({"n": n, "z_re": z.real, "z_im": z.imag, "rho": abs(z), "trials": len(ok), "ks": ks})
    return Table(LAW_FIELDS, rows)


# Radial histogram against ∫ρ_A·2πr dr

RADIAL_FIELDS = ["bin_lo", "bin_hi", "expected", "observed", "stderr", "z_score", "within"]


def run_radial_comparison(cfg: ExperimentConfig, ring_density: RingDensity, sigmas: float = 3.0) -> Table:
    """
    Bin eigenvalue moduli at the largest n and compare bin masses with the ring density.

    Standard errors are binomial in the pooled eigenvalue count; ``within`` marks bins
    whose deviation is at most ``sigmas`` standard errors.
    """
    family = resolve_theta(cfg.theta)
    n = cfg.n_list[-1]
    sub = cfg.model_copy(update={"n_list": [n]})

    def body(draw: ensemble.EnsembleDraw, res: TrialResult) -> None:
        res.moduli = ensemble.spectrum(draw).moduli

    folded = _run_trials(sub, family, body)
    moduli = np.concatenate([r.moduli for r in folded[n] if r.ok])
    r = ring_density.radii
    cum = cumulative_trapezoid(np.clip(ring_density.density, 0.0, None) * 2.0 * math.pi * r, r, initial=0.0)
    edges = np.linspace(r[0], r[-1], cfg.tolerances.radial_bins + 1)
    cum_edges = np.interp(edges, r, cum)
    counts, _ = np.histogram(moduli, bins=edges)
    total = moduli.size

    rows = []
    for j in range(len(edges) - 1):
        expected = float(cum_edges[j + 1] - cum_edges[j])
        observed = counts[j] / total
        p = min(max(expected, 1.0 / total), 1.0)
        se = math.sqrt(p * (1.0 - p) / total)
        z_score = (observed - expected) / se
        rows.append({
            "bin_lo": float(edges[j]),
            "bin_hi": float(edges[j + 1]),
            "expected": expected,
            "observed": float(observed),
            "stderr": se,
            "z_score": z_score,
            "within": abs(z_score) <= sigmas,
        })
    passed = sum(row["within"] for row in rows)
    logger.info(f"Radial comparison at n={n}: {passed}/{len(rows)} bins within {sigmas} standard errors")
    return Table(RADIAL_FIELDS, rows)
