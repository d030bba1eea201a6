"""
The limiting annular law μ_A: support radii, radial density from the
log-potential, and boundary-density checks.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from singlering.services import freeconv
from singlering.services.errors import MeasureDomainError, ResolutionError
from singlering.services.measures import DiscreteMeasure, RingRadii, SymmetricMeasure, ring_radii
from singlering.utils.export import write_csv, write_json

logger = logging.getLogger(__name__)

MIN_RADIAL_POINTS = 80
MASS_TOL = 5e-2
GRID_UNIFORM_RTOL = 1e-6


@dataclass
class RingDensity:
    radii: np.ndarray
    potential: np.ndarray
    density: np.ndarray
    a: float
    b: float
    err_estimate: np.ndarray = field(default_factory=lambda: np.zeros(0))
    flagged: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def step(self) -> float:
        return float(self.radii[1] - self.radii[0])

    def mass(self) -> float:
        """∫ ρ_A(r)·2πr dr over the interior rows (boundary rows use one-sided stencils)."""
        r = self.radii[1:-1]
        return float(trapezoid(self.density[1:-1] * 2.0 * math.pi * r, r))


@dataclass(frozen=True)
class BoundaryReport:
    applicable: bool
    a: float
    b: float
    limit_a: Optional[float] = None
    limit_b: Optional[float] = None
    expected_a: Optional[float] = None
    expected_b: Optional[float] = None
    dev_a: Optional[float] = None
    dev_b: Optional[float] = None
    mass: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "applicable": self.applicable,
            "a": self.a,
            "b": self.b,
            "limit_a": self.limit_a,
            "limit_b": self.limit_b,
            "dev_a": self.dev_a,
            "dev_b": self.dev_b,
            "mass": self.mass,
        }


def ring_support(theta: DiscreteMeasure) -> Tuple[float, float]:
    """(a, b) of the ring generated by Θ; the same values as ring_radii."""
    radii = ring_radii(theta)
    return radii.a, radii.b


def folded_radii(theta_sym: SymmetricMeasure) -> RingRadii:
    """Ring radii of the law on [0, ∞) whose symmetrization is theta_sym."""
    return ring_radii(DiscreteMeasure.from_arrays(np.abs(theta_sym.locations), theta_sym.weights))


def _check_grid(r: np.ndarray, radii: RingRadii) -> None:
    if r.size < MIN_RADIAL_POINTS:
        raise ResolutionError(f"Radial grid needs at least {MIN_RADIAL_POINTS} points, got {r.size}")
    if np.any(r <= 0):
        raise MeasureDomainError("Radial grid must be strictly positive")
    steps = np.diff(r)
    if np.any(steps <= 0):
        raise MeasureDomainError("Radial grid must be strictly ascending")
    if not np.allclose(steps, steps[0], rtol=GRID_UNIFORM_RTOL, atol=0.0):
        raise ResolutionError("Radial grid must be uniform")
    if r[0] > 0.8 * radii.a or r[-1] < 1.2 * radii.b:
        raise ResolutionError(
            f"Radial grid [{r[0]:.4g}, {r[-1]:.4g}] does not cover [{0.8 * radii.a:.4g}, {1.2 * radii.b:.4g}]"
        )


def default_radial_grid(radii: RingRadii, points: int = 121) -> np.ndarray:
    """Uniform grid over [0.8a, 1.2b], starting just above 0 when a = 0."""
    lo = 0.8 * radii.a if radii.a > 0 else 1.2 * radii.b / points
    return np.linspace(lo, 1.2 * radii.b, max(points, MIN_RADIAL_POINTS))


def radial_laplacian(r: np.ndarray, U: np.ndarray) -> np.ndarray:
    """(1/2π)(U'' + U'/r) by second-order differences, one-sided at both ends."""
    h = float(r[1] - r[0])
    d1 = np.empty_like(U)
    d2 = np.empty_like(U)
    d1[1:-1] = (U[2:] - U[:-2]) / (2 * h)
    d2[1:-1] = (U[2:] - 2 * U[1:-1] + U[:-2]) / h**2
    d1[0] = (-3 * U[0] + 4 * U[1] - U[2]) / (2 * h)
    d1[-1] = (3 * U[-1] - 4 * U[-2] + U[-3]) / (2 * h)
    d2[0] = (2 * U[0] - 5 * U[1] + 4 * U[2] - U[3]) / h**2
    d2[-1] = (2 * U[-1] - 5 * U[-2] + 4 * U[-3] - U[-4]) / h**2
    return (d2 + d1 / r) / (2 * math.pi)


def radial_density(
    theta_sym: SymmetricMeasure,
    r_grid: Iterable[float],
    *,
    threads: int = 1,
) -> RingDensity:
    """
    Radial density of μ_A from U(r) = ∫ log|x| dν^r(x).

    Args:
        theta_sym: Symmetrized singular-value law
        r_grid: Uniform, positive, ascending grid covering [0.8a, 1.2b]
        threads: Worker threads for the independent log-potential solves

    Returns:
        RingDensity on the grid

    Raises:
        ResolutionError: Grid too coarse or not covering the ring, or mass off by more than 5e-2
    """
    r = np.asarray(list(r_grid), dtype=float)
    radii = folded_radii(theta_sym)
    _check_grid(r, radii)

    def solve(rho: float) -> freeconv.LogPotential:
        return freeconv.log_potential_estimate(theta_sym, float(rho))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(solve, r))
    else:
        values = [solve(rho) for rho in r]

    U = np.array([v.value for v in values])
    err = np.array([v.err_estimate for v in values])
    flagged = np.array([v.flagged for v in values], dtype=bool)
    if flagged.any():
        logger.warning(f"{int(flagged.sum())} log-potential values flagged on the radial grid")

    rd = RingDensity(
        radii=r,
        potential=U,
        density=radial_laplacian(r, U),
        a=radii.a,
        b=radii.b,
        err_estimate=err,
        flagged=flagged,
    )
    mass = rd.mass()
    logger.info(f"Radial density on {r.size} points: a={radii.a:.6g}, b={radii.b:.6g}, mass={mass:.6f}")
    if abs(mass - 1.0) > MASS_TOL:
        raise ResolutionError(f"Radial mass {mass:.4f} deviates from 1 by more than {MASS_TOL}")
    return rd


def _extrapolate(r: np.ndarray, values: np.ndarray, at: float) -> float:
    slope, intercept = np.polyfit(r, values, 1)
    return float(slope * at + intercept)


def boundary_check(rd: RingDensity) -> BoundaryReport:
    """
    One-sided limits of the density at a⁺ and b⁻ against 1/(πa²) and 1/(πb²).

    The limits come from a linear fit through the three grid points nearest to each
    edge whose stencils lie entirely inside (a, b). The a-side is skipped when a = 0.
    """
    if rd.b - rd.a <= 1e-12 * max(rd.b, 1.0):
        return BoundaryReport(applicable=False, a=rd.a, b=rd.b)

    r, h = rd.radii, rd.step
    inner = np.flatnonzero((r - h > rd.a) & (r + h < rd.b))
    if inner.size < 6:
        raise ResolutionError("Too few interior grid points between a and b for boundary extrapolation")
    near_a, near_b = inner[:3], inner[-3:]

    limit_b = _extrapolate(r[near_b], rd.density[near_b], rd.b)
    expected_b = 1.0 / (math.pi * rd.b**2)
    limit_a = expected_a = dev_a = None
    if rd.a > 0:
        limit_a = _extrapolate(r[near_a], rd.density[near_a], rd.a)
        expected_a = 1.0 / (math.pi * rd.a**2)
        dev_a = abs(limit_a - expected_a) / expected_a

    return BoundaryReport(
        applicable=True,
        a=rd.a,
        b=rd.b,
        limit_a=limit_a,
        limit_b=limit_b,
        expected_a=expected_a,
        expected_b=expected_b,
        dev_a=dev_a,
        dev_b=abs(limit_b - expected_b) / expected_b,
        mass=rd.mass(),
    )


def export_ring_density(rd: RingDensity, path: Path) -> Path:
    rows = ({"r": r, "U": u, "density": d} for r, u, d in zip(rd.radii, rd.potential, rd.density))
    return write_csv(path, ["r", "U", "density"], rows)


def export_boundary_report(report: BoundaryReport, path: Path) -> Path:
    return write_json(path, report.as_dict())
