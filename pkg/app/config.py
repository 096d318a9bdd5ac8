import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings

from app.errors import InputError
from app.models.glm import Criterion, Family


class Settings(BaseSettings):
    """Application settings"""

    # App Configuration
    APP_NAME: str = "LoS GLM"
    LOG_LEVEL: str = "INFO"

    # Split
    DEFAULT_SEED: int = 20080101
    DEFAULT_TRAIN_FRACTION: float = 0.7
    TRAIN_SIZE: Optional[int] = None  # Explicit override of round(n * fraction)

    # Model
    RESPONSE: str = "days"
    MAX_ITERATIONS: int = 25
    TOLERANCE: float = 1e-8

    # Stepwise candidate parallelism (None = number of processors)
    JOBS: Optional[int] = None

    # Ingestion
    MISSING_TOKENS: str = "?,"

    class Config:
        env_file = ".env"
        case_sensitive = True

    @property
    def missing_tokens(self) -> List[str]:
        return self.MISSING_TOKENS.split(",")


settings = Settings()


class RunConfig(BaseModel):
    """Everything a command needs to run, merged from settings, config file and flags"""

    model_config = ConfigDict(protected_namespaces=())

    input_path: Optional[Path] = None
    output_dir: Path = Path("out")
    schema_path: Optional[Path] = None
    family: Family = Family.POISSON_LOG
    criterion: Criterion = Criterion.BIC
    train_fraction: float = Field(default_factory=lambda: settings.DEFAULT_TRAIN_FRACTION)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)
    train_size: Optional[int] = Field(default_factory=lambda: settings.TRAIN_SIZE)
    terms: Optional[List[str]] = None  # None = every predictor in the cleaned table
    response: str = Field(default_factory=lambda: settings.RESPONSE)
    jobs: Optional[int] = Field(default_factory=lambda: settings.JOBS)
    max_iterations: int = Field(default_factory=lambda: settings.MAX_ITERATIONS, ge=1)
    tolerance: float = Field(default_factory=lambda: settings.TOLERANCE, gt=0)
    missing_tokens: List[str] = Field(default_factory=lambda: settings.missing_tokens)
    model_path: Optional[Path] = None
    newdata_path: Optional[Path] = None
    explain: bool = False
    dump_matrix: bool = False

    @field_validator("train_fraction")
    @classmethod
    def _fraction_in_unit_interval(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        return v

    @field_validator("train_size")
    @classmethod
    def _train_size_positive(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v <= 0:
            raise ValueError("train_size must be positive")
        return v

    @field_validator("jobs")
    @classmethod
    def _jobs_positive(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v < 1:
            raise ValueError("jobs must be at least 1")
        return v

    @model_validator(mode="after")
    def _response_not_a_term(self) -> "RunConfig":
        if self.terms is not None and self.response in self.terms:
            raise ValueError(f"response '{self.response}' cannot also be a term")
        return self

    @property
    def worker_count(self) -> int:
        return self.jobs or os.cpu_count() or 1

    @classmethod
    def from_sources(cls, config_path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """
        Build a RunConfig from an optional JSON config file and command-line overrides.

        Args:
            config_path: JSON document mirroring RunConfig fields
            overrides: flag values; None entries are ignored so file values survive

        Returns:
            Validated RunConfig
        """
        values: Dict[str, Any] = {}
        if config_path is not None:
            try:
                values.update(json.loads(Path(config_path).read_text(encoding="utf-8")))
            except FileNotFoundError:
                raise InputError(f"Config file not found: {config_path}")
            except json.JSONDecodeError as e:
                raise InputError(f"Config file {config_path} is not valid JSON: {e}")

        values.update({k: v for k, v in (overrides or {}).items() if v is not None})

        try:
            return cls(**values)
        except ValidationError as e:
            raise InputError(f"Invalid run configuration: {e}")
