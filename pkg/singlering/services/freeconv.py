"""
Limiting Schwinger-Dyson system for ν^z = Θ̃ ⊞ λ_ρ, ρ = |z|.

For z1 in the upper half plane the system reads

    G_U  = (-1 + sqrt(1 + 4ρ²G²)) / (4ρ)
    psi  = z1 - ρ²G / (1 + 2ρ G_U)
    G    = G_Θ̃(psi)

It is iterated in subordination form: with ω₂ = z1 + 1/G - psi the update is
psi ← z1 - ρ²/ω₂, and G_U = (ω₂G - 1)/(2ρ) follows without a square root, so
1 + 4ρG_U is the analytic continuation of sqrt(1 + 4ρ²G²) from +i∞. The map is
a holomorphic self-map of the upper half plane with a unique fixed point there.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import cumulative_trapezoid, trapezoid

from singlering.config import settings
from singlering.services.errors import BranchError, ConvergenceError, MeasureDomainError, NumericalFailure
from singlering.services.measures import DiscreteMeasure, SymmetricMeasure
from singlering.utils.export import write_csv

logger = logging.getLogger(__name__)

INTERMEDIATE_TOL = 1e-8
STAGNATION_STEPS = 200


@dataclass(frozen=True)
class SDState:
    """One solved point of the limit system."""

    z1: complex
    rho: float
    G: complex
    G_U: complex
    psi: complex
    branch_ok: bool
    path_branch_ok: bool = True
    residual: float = 0.0
    iterations: int = 0
    levels: int = 0

    @property
    def sqrt_term(self) -> complex:
        """1 + 4ρG_U, the continued square root of 1 + 4ρ²G²."""
        return 1.0 + 4.0 * self.rho * self.G_U

    @property
    def branch_quantity(self) -> complex:
        """1 + 4ρ²G², whose real part certifies the principal branch."""
        return 1.0 + 4.0 * self.rho**2 * self.G**2


@dataclass
class LimitLaw:
    """Density of ν^z sampled on a real grid, with the detected support components."""

    rho: float
    grid: np.ndarray
    density: np.ndarray
    components: List[Tuple[float, float]]
    eps: float
    failed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def mass(self) -> float:
        return float(trapezoid(self.density, self.grid))

    def moment(self, p: int) -> float:
        return float(trapezoid(self.density * self.grid**p, self.grid))

    def cdf(self) -> np.ndarray:
        """Distribution function on the grid, normalized to end at 1."""
        cum = cumulative_trapezoid(self.density, self.grid, initial=0.0)
        return cum / cum[-1] if cum[-1] > 0 else cum


@dataclass(frozen=True)
class LogPotential:
    rho: float
    value: float
    err_estimate: float
    flagged: bool = False


def _is_delta_zero(theta: DiscreteMeasure) -> bool:
    return theta.size == 1 and abs(float(theta.locations[0])) <= settings.ATOM_MERGE_TOL


def _cauchy_d(theta: DiscreteMeasure, psi: complex) -> Tuple[complex, complex]:
    """G_Θ̃(psi) and its derivative."""
    d = 1.0 / (psi - theta.locations)
    wd = theta.weights * d
    return complex(np.sum(wd)), complex(-np.sum(wd * d))


def _make_state(
    theta: DiscreteMeasure,
    rho: float,
    z1: complex,
    psi: complex,
    G: complex,
    residual: float,
    iterations: int,
    levels: int,
    path_ok: bool,
) -> SDState:
    if rho == 0.0:
        G_U = 0j
        psi_formula = z1
    else:
        w2 = z1 + 1.0 / G - psi
        G_U = (w2 * G - 1.0) / (2.0 * rho)
        psi_formula = z1 - rho**2 * G / (1.0 + 2.0 * rho * G_U)
    sq = 1.0 + 4.0 * rho * G_U
    bq = 1.0 + 4.0 * rho**2 * G**2
    branch_ok = bool(bq.real > 0.0 and sq.real > 0.0)
    return SDState(
        z1=complex(z1),
        rho=float(rho),
        G=complex(G),
        G_U=complex(G_U),
        psi=complex(psi_formula),
        branch_ok=branch_ok,
        path_branch_ok=bool(path_ok and branch_ok),
        residual=float(residual),
        iterations=iterations,
        levels=levels,
    )


def _closed_form(theta: DiscreteMeasure, rho: float, z1: complex) -> Tuple[complex, complex]:
    """(psi, G) for ρ = 0 or Θ̃ = δ_0."""
    if rho == 0.0:
        return z1, theta.cauchy(z1)
    # Θ̃ = δ_0: ν = λ_ρ
    return (z1 * z1 - rho**2) / z1, z1 / (z1 * z1 - rho**2)


def _iterate_level(
    theta: DiscreteMeasure,
    rho: float,
    z: complex,
    psi: complex,
    tol: float,
    max_iter: int,
) -> Tuple[complex, complex, float, int, bool]:
    """
    Solve psi = z - ρ²/ω₂(psi) at a fixed z.

    Safeguarded Newton steps are taken when they lower the residual; otherwise a
    damped fixed-point step, with the damping halved whenever the residual grows.

    Returns:
        (psi, G, residual, iterations, converged)
    """
    rho2 = rho * rho
    omega = settings.SD_DAMPING
    unit = 64.0 * np.finfo(float).eps

    def threshold(p: complex, G: complex) -> float:
        # Relative below |G| = 1, floored at the rounding level of G_Θ̃(p)
        spread = float(np.sum(theta.weights / np.abs(p - theta.locations)))
        return max(tol * min(1.0, abs(G)), unit * spread)

    def evaluate(p: complex):
        G, dG = _cauchy_d(theta, p)
        w2 = z + 1.0 / G - p
        target = z - rho2 / w2
        res = abs(G - theta.cauchy(target))
        return G, dG, w2, target, res

    G, dG, w2, target, res = evaluate(psi)
    best, since_best = res, 0
    for it in range(1, max_iter + 1):
        if res <= threshold(psi, G):
            return psi, G, res, it - 1, True
        if res < 0.5 * best:
            best, since_best = res, 0
        else:
            since_best += 1
        if since_best >= STAGNATION_STEPS and res <= tol:
            logger.debug(f"Residual stalled at {res:.3g} (|G|={abs(G):.3g}) at z={z}; accepting")
            return psi, G, res, it - 1, True

        # Newton on F(psi) = target - psi
        fprime = rho2 * (-dG / (G * G) - 1.0) / (w2 * w2)
        denom = fprime - 1.0
        if denom != 0:
            cand = psi - (target - psi) / denom
            if math.isfinite(cand.real) and math.isfinite(cand.imag) and cand.imag > 0:
                c_eval = evaluate(cand)
                if c_eval[4] < res:
                    psi = cand
                    G, dG, w2, target, res = c_eval
                    continue

        step = psi + omega * (target - psi)
        s_eval = evaluate(step)
        if s_eval[4] > res and omega > settings.SD_MIN_DAMPING:
            omega *= 0.5
            logger.debug(f"Damping halved to {omega:g} at z={z}")
        psi = step
        G, dG, w2, target, res = s_eval

    return psi, G, res, max_iter, res <= max(threshold(psi, G), tol)


def _heights(y_target: float) -> List[float]:
    """Geometric continuation schedule from SD_HEIGHT down to y_target."""
    top = settings.SD_HEIGHT
    if y_target >= top:
        return [y_target]
    heights = []
    y = top
    while y > y_target:
        heights.append(y)
        y *= settings.SD_RATIO
    heights.append(y_target)
    return heights


def solve_sd(
    theta_sym: SymmetricMeasure,
    rho: float,
    z1: complex,
    tol: Optional[float] = None,
    *,
    principal_only: Optional[bool] = None,
    start: Optional[complex] = None,
) -> SDState:
    """
    Solve the limit Schwinger-Dyson system at z1.

    Args:
        theta_sym: Symmetrized limiting singular-value law Θ̃
        rho: Modulus |z| ≥ 0
        z1: Evaluation point with Im z1 > 0
        tol: Residual tolerance on |G - G_Θ̃(psi)|, relative once |G| < 1
        principal_only: Abort with BranchError when the principal square root stops
            matching the continued one (defaults to SD_PRINCIPAL_BRANCH_ONLY)
        start: Warm-start value of psi; skips the vertical continuation

    Returns:
        The solved SDState

    Raises:
        BranchError: principal_only and the branch certificate fails on the path
        ConvergenceError: The final level did not reach ``tol``
    """
    z1 = complex(z1)
    if z1.imag <= 0:
        raise MeasureDomainError(f"solve_sd needs Im z1 > 0, got {z1}")
    if rho < 0:
        raise MeasureDomainError(f"rho must be nonnegative, got {rho}")
    tol = settings.SD_TOL if tol is None else tol
    principal_only = settings.SD_PRINCIPAL_BRANCH_ONLY if principal_only is None else principal_only
    rho = float(rho)
    x = z1.real

    if start is not None:
        heights = [z1.imag]
    else:
        heights = _heights(z1.imag)

    closed = rho == 0.0 or _is_delta_zero(theta_sym)
    path_ok = True
    last_good: Optional[SDState] = None
    total_iter = 0
    psi = complex(start) if start is not None else None

    for level, y in enumerate(heights, start=1):
        z = complex(x, y) if level < len(heights) else z1
        final = level == len(heights)
        if closed:
            psi, G = _closed_form(theta_sym, rho, z)
            res, its, ok = 0.0, 0, True
        else:
            if psi is None:
                psi = z - rho * rho / z
            psi, G, res, its, ok = _iterate_level(
                theta_sym, rho, z, psi, tol if final else max(tol, INTERMEDIATE_TOL), settings.SD_MAX_ITER
            )
        total_iter += its
        state = _make_state(theta_sym, rho, z, psi, G, res, total_iter, level, path_ok)
        path_ok = state.path_branch_ok

        if principal_only and not state.branch_ok:
            raise BranchError(
                f"Principal branch lost at z1={z} (rho={rho}): Re(1+4rho^2G^2)={state.branch_quantity.real:.3g}",
                last_good=last_good,
            )
        if not ok:
            if final:
                raise ConvergenceError(
                    f"Schwinger-Dyson iteration did not converge at z1={z1} (rho={rho}), residual {res:.3g}",
                    residual=res,
                    z1=z1,
                )
            logger.debug(f"Level {level} at z={z} stopped at residual {res:.3g}; continuing")
        last_good = state

    return last_good


def r_transform(rho: float, g: complex) -> complex:
    """
    ρR_ρ(g) = (sqrt(1 + 4ρ²g²) - 1)/(2g) on the principal branch.

    Evaluated as 2ρ²g/(1 + sqrt(1 + 4ρ²g²)), which has no cancellation as g → 0.
    """
    g = complex(g)
    return 2.0 * rho * rho * g / (1.0 + np.sqrt(1.0 + 4.0 * rho * rho * g * g))


def _solve_grid(
    theta_sym: SymmetricMeasure,
    rho: float,
    points: Sequence[complex],
    tol: Optional[float],
    threads: int,
    warm_start: bool,
) -> List[SDState | NumericalFailure]:
    """Solve at each point, keeping per-point failures instead of raising."""

    def one(z1: complex, start: Optional[complex] = None):
        try:
            return solve_sd(theta_sym, rho, z1, tol, start=start)
        except NumericalFailure as e:
            logger.warning(f"Solver failed at z1={z1}, rho={rho}: {e}")
            return e

    if warm_start:
        results = []
        prev: Optional[complex] = None
        for z1 in points:
            out = one(z1, prev)
            if isinstance(out, SDState):
                prev = out.psi
            results.append(out)
        return results

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, points))
    return [one(z1) for z1 in points]


def _components(grid: np.ndarray, density: np.ndarray, threshold: float) -> List[Tuple[float, float]]:
    """Maximal runs of grid points where density exceeds the threshold."""
    above = density > threshold
    comps = []
    j = 0
    while j < len(grid):
        if above[j]:
            k = j
            while k + 1 < len(grid) and above[k + 1]:
                k += 1
            comps.append((float(grid[j]), float(grid[k])))
            j = k + 1
        else:
            j += 1
    return comps


def density(
    theta_sym: SymmetricMeasure,
    rho: float,
    grid: Iterable[float],
    eps: float,
    *,
    tol: Optional[float] = None,
    threads: int = 1,
    warm_start: bool = False,
    gap_threshold: Optional[float] = None,
) -> LimitLaw:
    """
    Recover the density of ν^z by Stieltjes inversion at height ``eps``.

    density[j] = max(-Im G(grid[j] + i eps)/π, 0). A failed grid point is linearly
    interpolated when both neighbours succeeded; otherwise the first failure is raised.
    """
    if eps <= 0:
        raise MeasureDomainError("Inversion height eps must be positive")
    grid = np.asarray(list(grid), dtype=float)
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise MeasureDomainError("Density grid must be ascending with at least two points")
    if not np.allclose(grid, -grid[::-1], atol=1e-9):
        raise MeasureDomainError("Density grid must be symmetric about 0")
    threshold = settings.GAP_THRESHOLD if gap_threshold is None else gap_threshold

    results = _solve_grid(theta_sym, rho, [complex(x, eps) for x in grid], tol, threads, warm_start)
    dens = np.full(grid.size, np.nan)
    failed = np.zeros(grid.size, dtype=bool)
    for j, out in enumerate(results):
        if isinstance(out, SDState):
            dens[j] = max(-out.G.imag / math.pi, 0.0)
        else:
            failed[j] = True

    for j in np.flatnonzero(failed):
        left_ok = j > 0 and not failed[j - 1]
        right_ok = j + 1 < grid.size and not failed[j + 1]
        if not (left_ok and right_ok):
            raise results[j]
        t = (grid[j] - grid[j - 1]) / (grid[j + 1] - grid[j - 1])
        dens[j] = (1 - t) * dens[j - 1] + t * dens[j + 1]
        logger.warning(f"Interpolated isolated failed density point x={grid[j]:.6g}")

    return LimitLaw(
        rho=float(rho),
        grid=grid,
        density=dens,
        components=_components(grid, dens, threshold),
        eps=float(eps),
        failed=failed,
    )


def max_density_near_zero(theta_sym: SymmetricMeasure, rho: float, halfwidth: float) -> float:
    """Largest inverted density on [-halfwidth, halfwidth] at height EPS_PROBE."""
    if halfwidth <= 0:
        raise MeasureDomainError("halfwidth must be positive")
    grid = np.linspace(-halfwidth, halfwidth, settings.GAP_PROBE_POINTS)
    law = density(theta_sym, rho, grid, settings.EPS_PROBE, warm_start=True)
    return float(np.max(law.density))


def gap_probe(theta_sym: SymmetricMeasure, rho: float, halfwidth: float) -> bool:
    """True iff ν^z has (numerically) no mass on [-halfwidth, halfwidth]."""
    peak = max_density_near_zero(theta_sym, rho, halfwidth)
    logger.debug(f"Gap probe rho={rho}, halfwidth={halfwidth}: max density {peak:.3g}")
    return peak < settings.GAP_THRESHOLD


def _imaginary_axis_integral(
    theta_sym: SymmetricMeasure, rho: float, panels: int, nodes: int
) -> Tuple[float, int]:
    """
    ∫_0^Y -Im G(iy) dy by composite Gauss-Legendre in u = log y on [log y_min, log Y].

    The integrand in u is analytic in the strip |Im u| < π/2, so fixed panels give a
    value that is smooth in rho. The piece on [0, y_min] is taken as y_min·g(y_min).

    Below the lowest height where the solver converges, g(y) is continued linearly
    through the origin, g(y) ≈ y·g(y₀)/y₀, which is the small-y behaviour when ν^ρ
    has a gap at 0.

    Returns:
        (integral, number of heights filled by the linear continuation)
    """
    lo, hi = math.log(settings.LOGPOT_Y_MIN), math.log(settings.LOGPOT_Y_MAX)
    t, wt = leggauss(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    w = (half[:, None] * wt[None, :]).ravel()

    # Descend along the imaginary axis so each solve warm-starts the next
    order = np.argsort(-u)
    g = np.empty(u.size)
    psi: Optional[complex] = None
    anchor: Optional[Tuple[float, float]] = None
    filled = 0

    def value_at(y: float) -> float:
        nonlocal psi, anchor, filled
        if anchor is not None and anchor[0] > y and filled:
            filled += 1
            return y * anchor[1] / anchor[0]
        try:
            state = solve_sd(theta_sym, rho, complex(0.0, y), start=psi)
        except ConvergenceError as e:
            if anchor is None:
                raise
            logger.debug(f"Continuing g(y) linearly below y={anchor[0]:.3g} (rho={rho}): {e}")
            filled += 1
            return y * anchor[1] / anchor[0]
        psi = state.psi
        anchor = (y, -state.G.imag)
        return anchor[1]

    for k in order:
        g[k] = value_at(math.exp(u[k]))
    head = settings.LOGPOT_Y_MIN * value_at(settings.LOGPOT_Y_MIN)
    return float(np.sum(w * g * np.exp(u)) + head), filled


def log_potential_estimate(theta_sym: SymmetricMeasure, rho: float) -> LogPotential:
    """
    U(ρ) = ∫ log|x| dν^ρ(x) with an error estimate.

    Uses U = log Y + m₂/(2Y²) - ∫_0^Y g(y) dy with g(y) = -Im G(iy) (exact for
    symmetric ν up to O(Y⁻⁴)); m₂ = ρ² + ∫x² dΘ̃ by additivity of free variances.
    The error estimate is the difference between two panel resolutions.
    """
    if rho < 0:
        raise MeasureDomainError("rho must be nonnegative")
    if rho == 0.0:
        with np.errstate(divide="ignore"):
            value = float(np.sum(theta_sym.weights * np.log(np.abs(theta_sym.locations))))
        return LogPotential(rho=0.0, value=value, err_estimate=0.0)

    Y = settings.LOGPOT_Y_MAX
    m2 = rho * rho + theta_sym.moment(2)
    base = math.log(Y) + m2 / (2.0 * Y * Y)
    fine_int, fine_filled = _imaginary_axis_integral(theta_sym, rho, settings.LOGPOT_PANELS, settings.LOGPOT_NODES)
    coarse_int, coarse_filled = _imaginary_axis_integral(
        theta_sym, rho, max(settings.LOGPOT_PANELS // 2, 1), settings.LOGPOT_NODES
    )
    fine, coarse = base - fine_int, base - coarse_int
    err = abs(fine - coarse)
    filled = fine_filled + coarse_filled
    flagged = filled > 0 or err > settings.LOGPOT_REL_TOL * max(1.0, abs(fine))
    if flagged:
        err *= 10.0
        logger.warning(
            f"Log-potential at rho={rho} flagged: resolution difference {err / 10.0:.3g}, "
            f"{filled} heights continued linearly"
        )
    return LogPotential(rho=float(rho), value=fine, err_estimate=err, flagged=flagged)


def log_potential(theta_sym: SymmetricMeasure, rho: float) -> float:
    """U(ρ) = ∫ log|x| dν^ρ(x)."""
    return log_potential_estimate(theta_sym, rho).value


def limit_cdf(theta_sym: SymmetricMeasure, rho: float, grid: Sequence[float], eps: float, **kwargs) -> np.ndarray:
    """
    Distribution function of ν^ρ on ``grid``.

    For ρ = 0 the law is Θ̃ itself and the Cauchy-smoothed CDF at height eps is
    returned in closed form; otherwise the inverted density is integrated.
    """
    grid = np.asarray(grid, dtype=float)
    if rho == 0.0:
        return smoothed_cdf(theta_sym, grid, eps)
    return density(theta_sym, rho, grid, eps, **kwargs).cdf()


def smoothed_cdf(mu: DiscreteMeasure, grid: Sequence[float], eps: float) -> np.ndarray:
    """CDF of mu convolved with the Cauchy kernel of width eps."""
    grid = np.asarray(grid, dtype=float)
    return np.sum(
        mu.weights[None, :] * (0.5 + np.arctan((grid[:, None] - mu.locations[None, :]) / eps) / math.pi),
        axis=1,
    )


def export_density(law: LimitLaw, path: Path) -> Path:
    rows = ({"x": float(x), "density": float(d)} for x, d in zip(law.grid, law.density))
    return write_csv(path, ["x", "density"], rows)


def export_log_potential(values: Iterable[LogPotential], path: Path) -> Path:
    rows = ({"rho": v.rho, "U": v.value, "err_estimate": v.err_estimate} for v in values)
    return write_csv(path, ["rho", "U", "err_estimate"], rows)
