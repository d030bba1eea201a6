"""
Discrete probability measures on the real line.

Measures are finite atomic: Θ, the empirical law of T_n, the symmetrized Θ̃
and empirical singular-value laws are all represented the same way. Every
limit computation downstream only needs Stieltjes transforms of these.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from singlering.config import settings
from singlering.models import MeasureDocument
from singlering.services.errors import MeasureDomainError

logger = logging.getLogger(__name__)

ComplexLike = Union[complex, float, np.ndarray]
ArrayLike = Union[Sequence[float], np.ndarray]


def _merge_atoms(locations: np.ndarray, weights: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Sort atoms and merge locations closer than ``tol``; merged weights add up."""
    order = np.argsort(locations, kind="stable")
    locations = locations[order]
    weights = weights[order]
    if locations.size <= 1:
        return locations, weights

    # Start a new cluster whenever the gap to the previous atom exceeds tol
    starts = np.concatenate(([True], np.diff(locations) > tol))
    labels = np.cumsum(starts) - 1
    merged_w = np.bincount(labels, weights=weights)
    merged_x = np.bincount(labels, weights=weights * locations) / merged_w
    return merged_x, merged_w


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted real atoms with strictly increasing locations and weights summing to one."""

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        for name in ("locations", "weights"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_atoms(
        cls,
        atoms: Iterable[Sequence[float]],
        sum_tol: float | None = None,
    ) -> "DiscreteMeasure":
        """
        Build a normalized measure from (location, weight) pairs.

        Args:
            atoms: Iterable of (location, weight) pairs
            sum_tol: Accepted deviation of the weight sum from one before renormalizing

        Returns:
            The measure with duplicates merged and weights renormalized to sum one
        """
        pairs = np.asarray(list(atoms), dtype=float)
        if pairs.size == 0:
            raise MeasureDomainError("A measure needs at least one atom")
        pairs = pairs.reshape(-1, 2)
        return cls.from_arrays(pairs[:, 0], pairs[:, 1], sum_tol=sum_tol)

    @classmethod
    def from_arrays(
        cls,
        locations: ArrayLike,
        weights: ArrayLike | None = None,
        sum_tol: float | None = None,
    ) -> "DiscreteMeasure":
        """Build a measure from parallel arrays; equal weights when ``weights`` is None."""
        x = np.asarray(locations, dtype=float).ravel()
        if x.size == 0:
            raise MeasureDomainError("A measure needs at least one atom")
        w = np.full(x.size, 1.0 / x.size) if weights is None else np.asarray(weights, dtype=float).ravel()
        if w.shape != x.shape:
            raise MeasureDomainError(f"{x.size} locations but {w.size} weights")
        if not np.all(np.isfinite(x)):
            raise MeasureDomainError("Atom locations must be finite")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise MeasureDomainError("Atom weights must be strictly positive")

        tol = settings.WEIGHT_SUM_TOL if sum_tol is None else sum_tol
        total = float(np.sum(w))
        if abs(total - 1.0) > tol:
            raise MeasureDomainError(f"Weights sum to {total!r}, not 1 within {tol:g}")

        x, w = _merge_atoms(x, w, settings.ATOM_MERGE_TOL)
        return cls(locations=x, weights=w / np.sum(w))

    @classmethod
    def dirac(cls, x: float) -> "DiscreteMeasure":
        return cls.from_arrays([x], [1.0])

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return [(float(x), float(w)) for x, w in zip(self.locations, self.weights)]

    @property
    def size(self) -> int:
        return int(self.locations.size)

    def moment(self, p: float) -> float:
        """Return Σ w_i x_i^p."""
        return float(np.sum(self.weights * self.locations ** p))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.locations)))

    def cdf(self, x: ArrayLike) -> np.ndarray:
        """Right-continuous distribution function evaluated at ``x``."""
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(self.locations, np.asarray(x, dtype=float), side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def quantile(self, q: ArrayLike) -> np.ndarray:
        """Generalized inverse of the distribution function: smallest x with F(x) ≥ q."""
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, np.asarray(q, dtype=float), side="left")
        return self.locations[np.minimum(idx, self.size - 1)]

    def cauchy(self, y: ComplexLike) -> ComplexLike:
        """Unchecked Stieltjes sum; the solver's inner loop calls this directly."""
        if np.ndim(y) == 0:
            return complex(np.sum(self.weights / (y - self.locations)))
        y = np.asarray(y, dtype=complex)
        return (self.weights[None, :] / (y.reshape(-1, 1) - self.locations[None, :])).sum(axis=1).reshape(y.shape)

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.locations, -self.locations[::-1], rtol=0.0, atol=max(tol, settings.ATOM_MERGE_TOL))
            and np.allclose(self.weights, self.weights[::-1], rtol=0.0, atol=tol)
        )

    def to_json(self) -> str:
        return MeasureDocument(atoms=self.atoms).model_dump_json()

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMeasure":
        doc = MeasureDocument.model_validate_json(text)
        return cls.from_atoms(doc.atoms)

    def __repr__(self) -> str:
        head = ", ".join(f"({x:.6g}, {w:.4g})" for x, w in self.atoms[:4])
        more = f", ... {self.size} atoms" if self.size > 4 else ""
        return f"{type(self).__name__}([{head}{more}])"


@dataclass(frozen=True, eq=False)
class SymmetricMeasure(DiscreteMeasure):
    """A DiscreteMeasure invariant under x ↦ −x; an atom at 0 is self-paired."""

    def __post_init__(self):
        super().__post_init__()
        if not self.is_symmetric():
            raise MeasureDomainError("Measure is not invariant under x -> -x")


@dataclass(frozen=True)
class RingRadii:
    """Inner and outer radii a ≤ b of the single ring generated by a measure on [0, ∞)."""

    a: float
    b: float
    a_defined: bool = True

    def as_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "a_defined": self.a_defined}


@dataclass(frozen=True)
class RegularityReport:
    """Computable versions of the norm-bound and Stieltjes-density regularity conditions."""

    n: int
    kappa: float
    M: float
    max_atom: float
    norm_ok: bool
    eta: float  # n^{-kappa}, the distance to the real axis
    grid_step: float
    imG_sup: float
    imG_argmax: float = field(default=0.0)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "kappa": self.kappa,
            "M": self.M,
            "max_atom": self.max_atom,
            "norm_ok": self.norm_ok,
            "eta": self.eta,
            "grid_step": self.grid_step,
            "imG_sup": self.imG_sup,
            "imG_argmax": self.imG_argmax,
        }


def symmetrize(mu: DiscreteMeasure) -> SymmetricMeasure:
    """
    Return the symmetrized measure (mu(A) + mu(-A)) / 2.

    Each atom (x, w) becomes (±x, w/2); atoms at 0 stay where they are.
    Symmetric inputs are returned unchanged.
    """
    if isinstance(mu, SymmetricMeasure):
        return mu

    # Fold onto |x| first so that the two halves are exact mirror images
    r, m = _merge_atoms(np.abs(mu.locations), mu.weights.copy(), settings.ATOM_MERGE_TOL)
    zero = r <= settings.ATOM_MERGE_TOL
    r_pos, m_pos = r[~zero], m[~zero]
    locations = [-r_pos[::-1]]
    weights = [m_pos[::-1] / 2.0]
    if np.any(zero):
        locations.append(np.zeros(1))
        weights.append(np.array([float(np.sum(m[zero]))]))
    locations.append(r_pos)
    weights.append(m_pos / 2.0)
    return SymmetricMeasure(locations=np.concatenate(locations), weights=np.concatenate(weights))


def stieltjes(mu: DiscreteMeasure, y: ComplexLike) -> ComplexLike:
    """
    Evaluate G_mu(y) = Σ w_i / (y - x_i).

    Args:
        mu: The measure
        y: Evaluation point(s); real points must avoid the atoms

    Returns:
        The exact finite sum, complex scalar or array shaped like ``y``

    Raises:
        MeasureDomainError: If a real evaluation point sits on an atom
    """
    y_arr = np.asarray(y, dtype=complex)
    real_pts = y_arr[y_arr.imag == 0].real
    if real_pts.size:
        idx = np.clip(np.searchsorted(mu.locations, real_pts), 0, mu.size - 1)
        nearest = np.minimum(
            np.abs(mu.locations[idx] - real_pts),
            np.abs(mu.locations[np.maximum(idx - 1, 0)] - real_pts),
        )
        if np.any(nearest <= settings.ATOM_MERGE_TOL):
            raise MeasureDomainError("Stieltjes transform evaluated at an atom location")
    return mu.cauchy(y if np.ndim(y) == 0 else y_arr)


def ring_radii(mu: DiscreteMeasure) -> RingRadii:
    """
    Compute a = 1/sqrt(∫x⁻² dmu) and b = sqrt(∫x² dmu).

    Raises:
        MeasureDomainError: If mu charges the negative half-line
    """
    if np.any(mu.locations < -settings.ATOM_MERGE_TOL):
        raise MeasureDomainError("Ring radii need a measure supported on [0, inf)")
    b = math.sqrt(mu.moment(2))
    if np.any(np.abs(mu.locations) <= settings.ATOM_MERGE_TOL):
        return RingRadii(a=0.0, b=b, a_defined=False)
    a = 1.0 / math.sqrt(float(np.sum(mu.weights / mu.locations ** 2)))
    return RingRadii(a=a, b=b, a_defined=True)


def regularity_diagnostics(mu: DiscreteMeasure, n: int, kappa: float, M: float) -> RegularityReport:
    """
    Evaluate the norm bound ``max atom ≤ M`` and sup |Im G_{mu~}(x + i n^{-kappa})| over x in [-M, M].

    The grid has step at most n^{-kappa} and always contains the atoms lying in [-M, M],
    where the Cauchy kernel peaks.
    """
    if n < 1 or kappa <= 0:
        raise MeasureDomainError("regularity_diagnostics needs n >= 1 and kappa > 0")
    eta = float(n) ** (-kappa)
    sym = symmetrize(mu)
    num = int(math.ceil(2.0 * M / eta)) + 1
    grid = np.linspace(-M, M, max(num, 2))
    inside = sym.locations[np.abs(sym.locations) <= M]
    grid = np.union1d(grid, inside)
    im_g = np.abs(sym.cauchy(grid + 1j * eta).imag)
    k = int(np.argmax(im_g))
    max_atom = mu.max_abs()
    report = RegularityReport(
        n=n,
        kappa=kappa,
        M=M,
        max_atom=max_atom,
        norm_ok=bool(max_atom <= M),
        eta=eta,
        grid_step=float(np.max(np.diff(grid))) if grid.size > 1 else 0.0,
        imG_sup=float(im_g[k]),
        imG_argmax=float(grid[k]),
    )
    logger.debug(f"Regularity diagnostics: {report}")
    return report


def load_measure(path: str) -> DiscreteMeasure:
    """Read a measure from a JSON document {"atoms": [[x, w], ...]}."""
    with open(path, "r", encoding="utf-8") as fh:
        return DiscreteMeasure.from_json(fh.read())


def save_measure(mu: DiscreteMeasure, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(json.loads(mu.to_json()), indent=2))
