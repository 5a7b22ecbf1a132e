from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid


@dataclass(frozen=True)
class ConditionalDensityTable:
    """Density of X_t given T_0 > t on a grid, with the mass off the grid"""

    t: float
    grid: np.ndarray
    density: np.ndarray
    survival: float
    head_mass: float  # below grid[0]
    tail_mass: float  # above grid[-1]

    def mass(self) -> float:
        return float(trapezoid(self.density, self.grid) + self.head_mass + self.tail_mass)

    def sup_distance(self, other: np.ndarray) -> float:
        return float(np.max(np.abs(self.density - np.asarray(other))))
