"""
Pydantic documents: measure serialization, experiment configuration and HTTP request bodies.
"""
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from singlering.config import settings


class MeasureDocument(BaseModel):
    """JSON form of a discrete measure: {"atoms": [[x, w], ...]}."""

    atoms: List[Tuple[float, float]] = Field(..., min_length=1)

    @field_validator("atoms")
    @classmethod
    def check_atoms(cls, atoms: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        locations = [x for x, _ in atoms]
        if any(b <= a for a, b in zip(locations, locations[1:])):
            raise ValueError("atom locations must be strictly ascending")
        if any(w <= 0 for _, w in atoms):
            raise ValueError("atom weights must be positive")
        total = sum(w for _, w in atoms)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"atom weights sum to {total}, not 1 within 1e-9")
        return atoms


class ThetaSpec(BaseModel):
    """The limiting singular-value law Θ: a named family or explicit atoms."""

    family: Literal["two-atom", "uniform-interval", "quarter-circle", "custom"] = "uniform-interval"
    atoms: Optional[List[Tuple[float, float]]] = None
    low: float = 0.5
    high: float = 2.0
    path: Optional[str] = None  # custom JSON measure document on disk

    @model_validator(mode="after")
    def check_family(self) -> "ThetaSpec":
        if self.family == "uniform-interval" and not (0 <= self.low < self.high):
            raise ValueError("uniform-interval needs 0 <= low < high")
        if self.family == "two-atom" and (self.atoms is None or len(self.atoms) != 2):
            raise ValueError("two-atom family needs exactly two atoms")
        if self.family == "custom" and self.atoms is None and self.path is None:
            raise ValueError("custom family needs atoms or a path")
        if self.atoms is not None and any(x < 0 for x, _ in self.atoms):
            raise ValueError("Θ must be supported on [0, inf)")
        return self


class ProbeSpec(BaseModel):
    """A probe disc B(z, eps); eps defaults to a tenth of the distance to the ring."""

    re: float
    im: float = 0.0
    eps: Optional[float] = Field(default=None, gt=0)

    @property
    def z(self) -> complex:
        return complex(self.re, self.im)


class GridSpec(BaseModel):
    """Radial grid for the ring density and real grid for ν^z; None means derived from (a, b)."""

    r_min: Optional[float] = Field(default=None, gt=0)
    r_max: Optional[float] = Field(default=None, gt=0)
    r_points: int = Field(default=121, ge=80)
    x_max: Optional[float] = Field(default=None, gt=0)
    x_points: int = Field(default=801, ge=11)
    eps: float = Field(default=1e-4, gt=0)


class Tolerances(BaseModel):
    solver_tol: float = Field(default=1e-12, gt=0)
    sigma_delta: float = Field(default=0.5, gt=0)  # threshold n^{-delta} for sigma_min diagnostics
    radial_bins: int = Field(default=20, ge=2)


class ExperimentConfig(BaseModel):
    """Deterministic description of an experiment run."""

    theta: ThetaSpec = Field(default_factory=ThetaSpec)
    n_list: List[int] = Field(default_factory=lambda: [200])
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)
    trials: int = Field(default=20, ge=1)
    probes: List[ProbeSpec] = Field(default_factory=list)
    grids: GridSpec = Field(default_factory=GridSpec)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    output_dir: Optional[str] = None
    threads: int = Field(default_factory=lambda: settings.DEFAULT_THREADS, ge=1)

    @field_validator("n_list")
    @classmethod
    def check_n_list(cls, n_list: List[int]) -> List[int]:
        if not n_list:
            raise ValueError("n_list must not be empty")
        if any(n < 1 for n in n_list):
            raise ValueError("matrix sizes must be positive")
        if any(b <= a for a, b in zip(n_list, n_list[1:])):
            raise ValueError("n_list must be strictly ascending")
        return n_list


# HTTP request bodies

class SolveRequest(BaseModel):
    theta: MeasureDocument
    rho: float = Field(..., ge=0)
    re: float = 0.0
    im: float = Field(..., gt=0)
    tol: float = Field(default=1e-12, gt=0)
    principal_only: bool = False


class GapProbeRequest(BaseModel):
    theta: MeasureDocument
    rho: float = Field(..., ge=0)
    halfwidth: float = Field(..., gt=0)


class DiagnosticsRequest(BaseModel):
    theta: MeasureDocument
    n: int = Field(..., ge=1)
    kappa: float = Field(..., gt=0)
    M: float = Field(..., gt=0)


class EtaRequest(BaseModel):
    eps: float = Field(..., gt=0)
    c0: float = Field(..., gt=0)
    s: float = Field(..., gt=0)
    C: float = Field(default=1.0, gt=0)
