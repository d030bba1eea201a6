"""
Norm calculus for perturbations of R-diagonal operators.

Power-norm bounds ‖Aᵖ‖ ≤ (1+p)C‖A‖₂^{p-1}, the majorizing series
F(γ) = Σ γⁿ(1+n)sⁿ⁻¹, the admissible perturbation size η, and matrix-side
estimators used to test the bounds on finite models.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import scipy.linalg

from singlering.config import settings
from singlering.services.errors import DivergenceError, MeasureDomainError
from singlering.services.measures import DiscreteMeasure, ring_radii
from singlering.utils.export import write_csv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RDiagonalBoundParams:
    c0: float
    s: float
    eps: float
    C: float
    gamma: float
    F: float
    eta: float

    @property
    def margin(self) -> float:
        """C·c0·η·γ·(1+F); equals 1/4 for parameters built by bound_params."""
        return self.C * self.c0 * self.eta * self.gamma * (1.0 + self.F)

    def as_dict(self) -> dict:
        return {"eps": self.eps, "c0": self.c0, "s": self.s, "C": self.C, "eta": self.eta}


@dataclass(frozen=True)
class GapCertificate:
    """Outcome of the invertibility argument at modulus rho."""

    regime: str  # "outside", "hole" or "ring"
    rho: float
    zeta: float
    c0: float
    eta: float


def power_norm_bound(p: int, s: float, C: Optional[float] = None) -> float:
    """(1+p)·C·s^(p-1)."""
    if p < 1:
        raise MeasureDomainError("power_norm_bound needs p >= 1")
    if s <= 0:
        raise MeasureDomainError("power_norm_bound needs s > 0")
    C = settings.RDIAG_C if C is None else C
    return (1 + p) * C * s ** (p - 1)


def F_gamma(gamma: float, s: float) -> float:
    """
    Closed form of F(γ) = Σ_{n≥1} γⁿ(1+n)sⁿ⁻¹ = γ(1/(1-γs)² + 1/(1-γs)).

    Raises:
        DivergenceError: If γs ≥ 1
    """
    if gamma <= 0 or s <= 0:
        raise MeasureDomainError("F_gamma needs gamma > 0 and s > 0")
    q = gamma * s
    if q >= 1.0:
        raise DivergenceError(f"F(gamma) diverges for gamma*s = {q:.6g} >= 1")
    return gamma * (1.0 / (1.0 - q) ** 2 + 1.0 / (1.0 - q))


def F_gamma_partial(gamma: float, s: float, terms: int = 60) -> float:
    """Partial sum of the defining series."""
    q = gamma * s
    return math.fsum((1 + n) * gamma * q ** (n - 1) for n in range(1, terms + 1))


def bound_params(eps: float, c0: float, s: float, C: Optional[float] = None) -> RDiagonalBoundParams:
    """
    Admissible perturbation size at γ = 1/(s + eps).

    η = 1/(4·C·c0·γ·(1+F(γ))), so C·c0·η·γ·(1+F) = 1/4 < 1/2.
    """
    C = settings.RDIAG_C if C is None else C
    if min(eps, c0, s, C) <= 0:
        raise MeasureDomainError("eps, c0, s and C must all be positive")
    gamma = 1.0 / (s + eps)
    F = F_gamma(gamma, s)
    eta = 1.0 / (4.0 * C * c0 * gamma * (1.0 + F))
    return RDiagonalBoundParams(c0=c0, s=s, eps=eps, C=C, gamma=gamma, F=F, eta=eta)


def eta_bound(eps: float, c0: float, s: float, C: Optional[float] = None) -> float:
    return bound_params(eps, c0, s, C).eta


def operator_norm(M: np.ndarray, steps: Optional[int] = None, tol: Optional[float] = None) -> float:
    """
    Largest singular value of M by power iteration on M*M.

    Stops when the Rayleigh quotient changes by less than ``tol`` (relative).
    """
    steps = settings.POWER_ITER_STEPS if steps is None else steps
    tol = settings.POWER_ITER_TOL if tol is None else tol
    M = np.asarray(M)
    n = M.shape[1]
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(steps):
        w = M @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        prev, est = est, nw
        v = M.conj().T @ w
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            break
        v /= nv
        if abs(est - prev) <= tol * est:
            break
    return est


def spectral_radius_estimate(A: np.ndarray, k_max: int = 16) -> float:
    """
    min over k in [ceil(k_max/2), k_max] of ‖Aᵏ‖^(1/k).

    Powers are kept rescaled to unit Frobenius norm; the accumulated log-scale is
    added back before taking k-th roots.
    """
    if k_max < 8:
        raise MeasureDomainError("spectral_radius_estimate needs k_max >= 8")
    A = np.asarray(A, dtype=complex)
    P = np.eye(A.shape[0], dtype=complex)
    log_scale = 0.0
    best = math.inf
    for k in range(1, k_max + 1):
        P = P @ A
        fro = float(np.linalg.norm(P))
        if fro == 0.0:
            return 0.0
        P /= fro
        log_scale += math.log(fro)
        if k >= math.ceil(k_max / 2):
            nrm = operator_norm(P)
            if nrm == 0.0:
                return 0.0
            best = min(best, math.exp((log_scale + math.log(nrm)) / k))
    logger.debug(f"Spectral radius estimate {best:.6g} (k_max={k_max})")
    return best


def recursion_majorization_gap(A: np.ndarray, B: np.ndarray, eta: float, k_max: int = 12) -> float:
    """
    Largest value over k ≤ k_max of

        ‖(A+ηB)ᵏ‖ - ‖Aᵏ‖ - Σ_{j<k} ‖Aʲ‖·‖ηB‖·‖(A+ηB)^(k-1-j)‖

    with exact operator norms; nonpositive when sub-additivity majorizes the recursion.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    n = A.shape[0]
    S = A + eta * B
    norm = lambda M: float(scipy.linalg.norm(M, 2))
    a_pows = [np.eye(n, dtype=complex)]
    s_pows = [np.eye(n, dtype=complex)]
    for _ in range(k_max):
        a_pows.append(a_pows[-1] @ A)
        s_pows.append(s_pows[-1] @ S)
    a_n = [norm(M) for M in a_pows]
    s_n = [norm(M) for M in s_pows]
    eb = norm(eta * B)
    worst = -math.inf
    for k in range(1, k_max + 1):
        rhs = a_n[k] + sum(a_n[j] * eb * s_n[k - 1 - j] for j in range(k))
        worst = max(worst, s_n[k] - rhs)
    return worst


def recursion_majorization_check(A: np.ndarray, B: np.ndarray, eta: float, k_max: int = 12, slack: float = 1e-9) -> bool:
    return recursion_majorization_gap(A, B, eta, k_max) <= slack


def gap_certificate(theta: DiscreteMeasure, rho: float, eps: float = 1.0, C: Optional[float] = None) -> GapCertificate:
    """
    Admissible half-width of a spectral gap around 0 at modulus rho.

    Outside the ring (ρ > b) the argument runs with A = X⁻¹Y, B = X⁻¹ and ‖A‖₂ = b/ρ;
    inside the hole (ρ < a) with A = Y⁻¹X, B = Y⁻¹ and ‖A‖₂ = ρ/a. Here X is ρ times
    a Haar unitary and Y is R-diagonal with singular-value law Θ.
    """
    if rho <= 0:
        raise MeasureDomainError("gap_certificate needs rho > 0")
    radii = ring_radii(theta)
    top = theta.max_abs()
    if rho > radii.b:
        zeta = radii.b / rho
        c0 = max(top / rho, 1.0 / rho)
        regime = "outside"
    elif radii.a_defined and rho < radii.a:
        low = float(np.min(theta.locations))
        zeta = rho / radii.a
        c0 = max(rho / low, 1.0 / low)
        regime = "hole"
    else:
        return GapCertificate(regime="ring", rho=rho, zeta=math.nan, c0=math.nan, eta=0.0)
    eta = eta_bound(eps, c0, zeta, C)
    logger.debug(f"Gap certificate at rho={rho}: regime={regime}, zeta={zeta:.6g}, eta={eta:.6g}")
    return GapCertificate(regime=regime, rho=rho, zeta=zeta, c0=c0, eta=eta)


def export_eta_table(params: Iterable[RDiagonalBoundParams], path: Path) -> Path:
    return write_csv(path, ["eps", "c0", "s", "C", "eta"], (p.as_dict() for p in params))
