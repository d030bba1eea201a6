"""
Configuration settings for the single-ring toolkit.
Loads settings from environment variables with sensible defaults.
"""
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from pathlib import Path


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        case_sensitive=True,
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",  # Allow extra fields to be ignored
    )

    # Application settings
    APP_NAME: str = "Single Ring Toolkit"
    DEBUG: bool = Field(default=False)
    ENVIRONMENT: str = Field(default="development")
    LOG_LEVEL: str = Field(default="INFO")
    LOG_DIR: str = Field(default="logs")

    # Server settings (HTTP surface)
    HOST: str = Field(default="127.0.0.1")
    PORT: int = Field(default=8000)

    # Schwinger-Dyson solver
    SD_HEIGHT: float = Field(default=16.0)  # starting Im z1 of the continuation
    SD_RATIO: float = Field(default=0.7)  # geometric descent ratio
    SD_DAMPING: float = Field(default=0.5)
    SD_MIN_DAMPING: float = Field(default=1.0 / 1024)
    SD_MAX_ITER: int = Field(default=20000)  # per continuation level
    SD_TOL: float = Field(default=1e-12)
    SD_PRINCIPAL_BRANCH_ONLY: bool = Field(default=False)

    # Stieltjes inversion and gap detection
    EPS_PROBE: float = Field(default=1e-4)
    GAP_THRESHOLD: float = Field(default=1e-2)  # density units
    GAP_PROBE_POINTS: int = Field(default=41)

    # Log-potential quadrature (Gauss-Legendre panels in log y)
    LOGPOT_NODES: int = Field(default=8)
    LOGPOT_PANELS: int = Field(default=48)
    LOGPOT_Y_MIN: float = Field(default=1e-7)
    LOGPOT_Y_MAX: float = Field(default=1e6)
    LOGPOT_REL_TOL: float = Field(default=1e-3)

    # Measures
    ATOM_MERGE_TOL: float = Field(default=1e-12)
    WEIGHT_SUM_TOL: float = Field(default=1e-9)

    # Harness
    DEFAULT_SEED: int = Field(default=424242)
    DEFAULT_THREADS: int = Field(default=1)
    OUTPUT_DIR: str = Field(default="./results")

    # R-diagonal calculus
    RDIAG_C: float = Field(default=1.0)  # constant of the power-norm bound
    POWER_ITER_STEPS: int = Field(default=30)
    POWER_ITER_TOL: float = Field(default=1e-8)

    def get_output_dir(self, override: str | None = None) -> Path:
        """Return the output directory, creating it if needed."""
        path = Path(override or self.OUTPUT_DIR)
        path.mkdir(parents=True, exist_ok=True)
        return path


# Create settings instance
settings = Settings()
