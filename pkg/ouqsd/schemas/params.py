import math
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ouqsd.core.config import settings


class OUParams(BaseModel):
    """Linear drift alpha(x) = a x of the Ornstein-Uhlenbeck process"""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    a: float = Field(..., gt=0, description="Drift rate, units 1/time")

    @property
    def minimal_rate(self) -> float:
        """Bottom of the spectrum; the minimal QSD is nu_a"""
        return self.a

    def default_u_max(self) -> float:
        return settings.u_max * max(1.0, 1.0 / math.sqrt(2.0 * self.a))


class _HeavyTail(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    eta: float = Field(..., gt=0, description="Tail exponent is -(1 + eta)")
    x_m: float = Field(default=1.0, gt=0, description="Left endpoint of the support")
    exploratory: bool = Field(
        default=False, description="Permit eta >= 1, where no limit rate is predicted"
    )

    @model_validator(mode="after")
    def _check_eta(self) -> "_HeavyTail":
        if self.eta >= 1.0 and not self.exploratory:
            raise ValueError("eta must lie in (0, 1); pass exploratory=True for eta >= 1")
        return self

    @property
    def in_attraction_class(self) -> bool:
        return self.eta < 1.0


class ParetoDensity(_HeavyTail):
    """f(x) = eta x_m^eta x^-(1+eta) on [x_m, inf)"""

    kind: Literal["pareto"] = "pareto"


class LogParetoDensity(_HeavyTail):
    """f(x) proportional to ln(e + x) x^-(1+eta) on [x_m, inf)"""

    kind: Literal["log_pareto"] = "log_pareto"


class PointMassInit(BaseModel):
    """Degenerate start at a fixed point, for exact-killing checks"""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    kind: Literal["point_mass"] = "point_mass"
    x0: float = Field(..., gt=0)


HeavyTailDensity = Union[ParetoDensity, LogParetoDensity]

InitialDensity = Annotated[
    Union[ParetoDensity, LogParetoDensity, PointMassInit],
    Field(discriminator="kind"),
]


class QuadratureSpec(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    abs_tol: float = Field(default_factory=lambda: settings.quad_tol, gt=0)
    max_depth: int = Field(default_factory=lambda: settings.max_depth, ge=10)
    domain_cut: float = Field(default_factory=lambda: settings.domain_cut, gt=0)

    def with_tol(self, abs_tol: float) -> "QuadratureSpec":
        return self.model_copy(update={"abs_tol": abs_tol})
