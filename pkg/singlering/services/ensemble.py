"""
Seeded sampling of A = U T V with U, V independent Haar unitaries and T a
nonnegative diagonal, plus the hermitization of zI - A and exact finite-n spectra.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import scipy.linalg

from singlering.services.errors import EnsembleDomainError, NumericalFailure
from singlering.services.measures import DiscreteMeasure, SymmetricMeasure, symmetrize
from singlering.utils.export import write_csv

logger = logging.getLogger(__name__)

DET_REL_TOL = 1e-6


def haar_unitary(n: int, seed: int) -> np.ndarray:
    """
    Sample an n x n Haar unitary, deterministically in (n, seed).

    QR of a standard complex Ginibre matrix, with the phases of R's diagonal
    moved into Q so that R has a positive real diagonal.
    """
    if n < 1:
        raise EnsembleDomainError(f"Unitary size must be positive, got {n}")
    rng = np.random.default_rng(int(seed) % 2**64)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = scipy.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


@dataclass(frozen=True, eq=False)
class EnsembleDraw:
    """One realization (T, U, V, A = U diag(T) V). T, U and V are None for injected matrices."""

    n: int
    seed: int
    seed_v: int
    T: Optional[np.ndarray]
    U: Optional[np.ndarray]
    V: Optional[np.ndarray]
    A: np.ndarray

    @classmethod
    def from_matrix(cls, A: np.ndarray, seed: int = 0) -> "EnsembleDraw":
        A = np.asarray(A, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise EnsembleDomainError(f"Expected a non-empty square matrix, got shape {A.shape}")
        return cls(n=A.shape[0], seed=seed, seed_v=seed, T=None, U=None, V=None, A=A)

    def shifted(self, z: complex) -> np.ndarray:
        """Return zI - A."""
        return z * np.eye(self.n, dtype=complex) - self.A


@dataclass(frozen=True, eq=False)
class Hermitization:
    """The 2n x 2n Hermitian matrix [[0, zI-A], [(zI-A)*, 0]]."""

    z: complex
    H: np.ndarray

    def spectrum(self) -> np.ndarray:
        return scipy.linalg.eigvalsh(self.H)


@dataclass(frozen=True, eq=False)
class EmpiricalSpectrum:
    """Eigenvalues of A together with singular-value queries on zI - A."""

    draw: EnsembleDraw
    eigenvalues: np.ndarray

    def singular_values(self, z: complex) -> np.ndarray:
        """The n singular values of zI - A, ascending."""
        return singular_values(self.draw, z)

    def sigma_min(self, z: complex) -> float:
        return float(self.singular_values(z)[0])

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)


def assemble(T: Iterable[float], seed_u: int, seed_v: int) -> EnsembleDraw:
    """
    Build A = U diag(T) V from independent seeds.

    Args:
        T: Nonnegative diagonal entries
        seed_u: Seed of the left unitary
        seed_v: Seed of the right unitary

    Returns:
        The draw; diag(T) is never materialized
    """
    T = np.asarray(list(T) if not isinstance(T, np.ndarray) else T, dtype=float).ravel()
    if T.size == 0:
        raise EnsembleDomainError("T must have at least one entry")
    if np.any(T < 0):
        raise EnsembleDomainError("T entries must be nonnegative")
    n = T.size
    U = haar_unitary(n, seed_u)
    V = haar_unitary(n, seed_v)
    A = (U * T[None, :]) @ V
    return EnsembleDraw(n=n, seed=int(seed_u), seed_v=int(seed_v), T=T, U=U, V=V, A=A)


def hermitize(draw: EnsembleDraw, z: complex) -> Hermitization:
    M = draw.shifted(z)
    zero = np.zeros_like(M)
    H = np.block([[zero, M], [M.conj().T, zero]])
    return Hermitization(z=complex(z), H=H)


def singular_values(draw: EnsembleDraw, z: complex) -> np.ndarray:
    try:
        sigma = scipy.linalg.svdvals(draw.shifted(z))
    except np.linalg.LinAlgError as e:
        raise NumericalFailure(f"SVD of zI - A did not converge at z={z}: {e}") from e
    return np.sort(sigma)


def sigma_min(draw: EnsembleDraw, z: complex) -> float:
    """Minimal singular value of zI - A."""
    return float(singular_values(draw, z)[0])


def empirical_nu(draw: EnsembleDraw, z: complex) -> SymmetricMeasure:
    """ESD of the hermitization: weight 1/(2n) at each ±σ_i(zI - A)."""
    sigma = singular_values(draw, z)
    return symmetrize(DiscreteMeasure.from_arrays(sigma))


def empirical_log_potential(draw: EnsembleDraw, z: complex) -> float:
    """(1/n) log|det(zI - A)| = ∫ log|x| dν_n^z."""
    return float(np.mean(np.log(singular_values(draw, z))))


def spectrum(draw: EnsembleDraw) -> EmpiricalSpectrum:
    """
    Eigenvalues of the dense non-Hermitian A (LAPACK Hessenberg reduction + shifted QR).

    Raises:
        NumericalFailure: If the QR iteration fails or |det A| = det T is violated
    """
    try:
        eig = scipy.linalg.eigvals(draw.A, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalFailure(f"Eigenvalue iteration failed for n={draw.n}, seed={draw.seed}: {e}") from e

    if draw.T is not None and np.all(draw.T > 0):
        log_det_eig = float(np.sum(np.log(np.abs(eig))))
        log_det_t = float(np.sum(np.log(draw.T)))
        if abs(np.expm1(log_det_eig - log_det_t)) > DET_REL_TOL:
            raise NumericalFailure(
                f"|det A| check failed for n={draw.n}, seed={draw.seed}: "
                f"log prod|lambda|={log_det_eig:.12g}, log det T={log_det_t:.12g}"
            )
    return EmpiricalSpectrum(draw=draw, eigenvalues=eig)


def export_eigenvalue_cloud(spectra: Iterable[EmpiricalSpectrum], path: Path) -> Path:
    """CSV with header seed,n,re,im."""
    rows = (
        {"seed": s.draw.seed, "n": s.draw.n, "re": float(lam.real), "im": float(lam.imag)}
        for s in spectra
        for lam in s.eigenvalues
    )
    return write_csv(path, ["seed", "n", "re", "im"], rows)


def export_sigma_queries(draws: Iterable[EnsembleDraw], zs: Iterable[complex], path: Path) -> Path:
    """CSV with header seed,n,z_re,z_im,sigma_min."""
    zs = list(zs)
    rows = (
        {"seed": d.seed, "n": d.n, "z_re": z.real, "z_im": z.imag, "sigma_min": sigma_min(d, z)}
        for d in draws
        for z in zs
    )
    return write_csv(path, ["seed", "n", "z_re", "z_im", "sigma_min"], rows)
