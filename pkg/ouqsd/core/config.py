from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Runtime settings"""

    # Workers
    threads: Optional[int] = Field(default=None, gt=0)

    # Logging
    log_level: str = "INFO"

    # Numerics
    quad_tol: float = 1e-10
    series_tol: float = 1e-12
    u_max: float = 12.0
    max_depth: int = 50
    domain_cut: float = 50.0

    # Simulation
    max_grid_points: int = 200_000

    model_config = SettingsConfigDict(
        env_prefix="OUQSD_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )


settings = Settings()
