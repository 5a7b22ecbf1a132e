from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ouqsd.core.config import settings
from ouqsd.core.exceptions import ConfigurationError
from ouqsd.schemas.params import (
    HeavyTailDensity,
    InitialDensity,
    LogParetoDensity,
    OUParams,
    ParetoDensity,
    QuadratureSpec,
)

SEED_MIN = -(2**63)
SEED_MAX = 2**64 - 1


def _check_checkpoints(checkpoints: List[float]) -> List[float]:
    if not checkpoints:
        raise ValueError("at least one checkpoint is required")
    if any(t <= 0 for t in checkpoints):
        raise ValueError("checkpoints must be positive")
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly ascending")
    return checkpoints


class SimConfig(BaseModel):
    """One Monte Carlo run of the absorbed process"""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    params: OUParams
    init: InitialDensity
    checkpoints: List[float]
    n_paths: int = Field(..., ge=1)
    seed: int = Field(default=42, ge=SEED_MIN, le=SEED_MAX)
    dg_step: Optional[float] = Field(
        default=None, gt=0, description="Grid spacing in transformed time g"
    )

    @field_validator("checkpoints")
    @classmethod
    def check_checkpoints(cls, value: List[float]) -> List[float]:
        return _check_checkpoints(value)


class RunConfig(BaseModel):
    """Flat run configuration, loadable from a JSON document"""

    model_config = ConfigDict(extra="forbid", populate_by_name=True, allow_inf_nan=False)

    a: float = Field(default=1.0, gt=0)
    eta: float = Field(default=0.5, gt=0)
    family: Literal["pareto", "log_pareto"] = "pareto"
    x_m: float = Field(default=1.0, gt=0)
    lambda_: Optional[float] = Field(default=None, alias="lambda", gt=0)
    checkpoints: List[float] = Field(default_factory=lambda: [2.0, 4.0, 6.0, 8.0])
    n_paths: int = Field(default=100_000, ge=1)
    seed: int = Field(default=42, ge=SEED_MIN, le=SEED_MAX)
    dg_step: Optional[float] = Field(default=None, gt=0)
    quad_tol: float = Field(default_factory=lambda: settings.quad_tol, gt=0)
    series_tol: float = Field(default_factory=lambda: settings.series_tol, gt=0)
    u_max: Optional[float] = Field(default=None, gt=0)
    output_dir: Path = Path(".")

    @field_validator("checkpoints")
    @classmethod
    def check_checkpoints(cls, value: List[float]) -> List[float]:
        return _check_checkpoints(value)

    @model_validator(mode="after")
    def _check_lambda(self) -> "RunConfig":
        if self.lambda_ is not None and self.lambda_ > self.a:
            raise ValueError("lambda must lie in (0, a]")
        return self

    @classmethod
    def from_file(cls, path: Path, **overrides: object) -> "RunConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigurationError(f"cannot read config {path}: {e}") from e
        config = cls.model_validate_json(text)
        if overrides:
            merged = config.model_dump(by_alias=True)
            merged.update({k: v for k, v in overrides.items() if v is not None})
            config = cls.model_validate(merged)
        return config

    @property
    def exploratory(self) -> bool:
        return self.eta >= 1.0

    @property
    def params(self) -> OUParams:
        return OUParams(a=self.a)

    @property
    def target_rate(self) -> Optional[float]:
        """lambda* = a eta for eta in (0, 1), None otherwise"""
        if self.exploratory:
            return None
        return self.a * self.eta

    @property
    def qsd_rate(self) -> float:
        if self.lambda_ is not None:
            return self.lambda_
        return self.target_rate if self.target_rate is not None else self.a

    @property
    def initial_density(self) -> HeavyTailDensity:
        family = LogParetoDensity if self.family == "log_pareto" else ParetoDensity
        return family(eta=self.eta, x_m=self.x_m, exploratory=self.exploratory)

    @property
    def resolved_u_max(self) -> float:
        return self.u_max if self.u_max is not None else self.params.default_u_max()

    def quadrature_spec(self) -> QuadratureSpec:
        return QuadratureSpec(abs_tol=self.quad_tol)

    def sim_config(self) -> SimConfig:
        return SimConfig(
            params=self.params,
            init=self.initial_density,
            checkpoints=self.checkpoints,
            n_paths=self.n_paths,
            seed=self.seed,
            dg_step=self.dg_step,
        )
