"""Result objects of a Monte Carlo run."""

import math
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class ECDF:
    """Right-continuous empirical CDF of a sample"""

    values: np.ndarray  # sorted

    @classmethod
    def from_sample(cls, sample: np.ndarray) -> "ECDF":
        return cls(values=np.sort(np.asarray(sample, dtype=float)))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def __call__(self, y: ArrayLike) -> ArrayLike:
        counts = np.searchsorted(self.values, y, side="right")
        value = counts / self.n
        return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class SurvivalEnsemble:
    """Positions of the surviving paths at each checkpoint"""

    checkpoints: Tuple[float, ...]
    survivors: Tuple[np.ndarray, ...]
    n_paths_total: int
    seed: int

    def survivor_count(self, index: int) -> int:
        return int(self.survivors[index].shape[0])

    def survival_fraction(self, index: int) -> float:
        return self.survivor_count(index) / self.n_paths_total

    def standard_error(self, index: int) -> float:
        p = self.survival_fraction(index)
        return math.sqrt(p * (1.0 - p) / self.n_paths_total)

    def survival_curve(self) -> List[Tuple[float, float]]:
        return [(t, self.survival_fraction(i)) for i, t in enumerate(self.checkpoints)]
