import math
import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import List, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy import stats

from ouqsd.core.config import settings
from ouqsd.core.exceptions import (
    ConfigurationError,
    DomainError,
    EmptyConditioningError,
    InsufficientDataError,
)
from ouqsd.models.ensemble import ECDF, SurvivalEnsemble
from ouqsd.models.spectral import QsdDistribution
from ouqsd.schemas.config import SimConfig
from ouqsd.services.heavytail import sample_many
from ouqsd.services.kernels import time_change

# paths per RNG substream; fixed so results never depend on the worker count
BLOCK_SIZE = 65_536
# largest 2 a t for which e^{2at} stays comfortably finite
MAX_EXPONENT = 700.0

_UINT64 = (1 << 64) - 1

Curve = Sequence[Tuple[float, float]]


def g_grid(config: SimConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Transformed-time grid and the positions of the checkpoints on it"""
    a = config.params.a
    t_max = config.checkpoints[-1]
    if 2.0 * a * t_max > MAX_EXPONENT:
        raise ConfigurationError(
            f"checkpoint t={t_max} is beyond the representable range of g(t) for a={a}"
        )
    _, g_checks = time_change(config.params, np.asarray(config.checkpoints, dtype=float))
    g_checks = np.atleast_1d(g_checks)
    grid = g_checks
    if config.dg_step is not None:
        n_steps = math.ceil(g_checks[-1] / config.dg_step)
        if n_steps + g_checks.size > settings.max_grid_points:
            raise ConfigurationError(
                f"dg_step={config.dg_step} needs {n_steps} grid points, "
                f"limit is {settings.max_grid_points}"
            )
        refinement = config.dg_step * np.arange(1, n_steps)
        grid = np.union1d(refinement[refinement < g_checks[-1]], g_checks)
    return grid, np.searchsorted(grid, g_checks)


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Philox stream keyed by the seed in the low word and the block in the high word"""
    return np.random.Generator(np.random.Philox(key=(block << 64) | (seed & _UINT64)))


def _simulate_block(
    config: SimConfig, grid: np.ndarray, check_index: np.ndarray, block: int
) -> List[np.ndarray]:
    size = min(BLOCK_SIZE, config.n_paths - block * BLOCK_SIZE)
    rng = block_generator(config.seed, block)
    position = sample_many(config.init, rng.random(size))
    shrink = np.exp(-config.params.a * np.asarray(config.checkpoints, dtype=float))

    out: List[np.ndarray] = []
    g_prev = 0.0
    for step, g in enumerate(grid):
        dg = g - g_prev
        nxt = position + math.sqrt(dg) * rng.standard_normal(position.size)
        with np.errstate(over="ignore"):
            crossing = np.exp(-2.0 * position * np.maximum(nxt, 0.0) / dg)
        alive = (nxt > 0.0) & (rng.random(position.size) >= crossing)
        position = nxt[alive]
        g_prev = g
        if len(out) < check_index.size and step == check_index[len(out)]:
            out.append(shrink[len(out)] * position)
    logger.debug(f"block {block}: {position.size}/{size} paths alive at the last checkpoint")
    return out


def _worker_count(n_blocks: int) -> int:
    return max(1, min(settings.threads or os.cpu_count() or 1, n_blocks))


def simulate_ensemble(config: SimConfig) -> SurvivalEnsemble:
    """Run config.n_paths paths and collect survivor positions at each checkpoint.

    Output depends only on (seed, config): blocks are keyed substreams and
    are reassembled in block order whatever the number of workers.
    """
    grid, check_index = g_grid(config)
    n_blocks = math.ceil(config.n_paths / BLOCK_SIZE)
    workers = _worker_count(n_blocks)
    run_block = partial(_simulate_block, config, grid, check_index)
    logger.info(
        f"simulating {config.n_paths} paths in {n_blocks} blocks on {workers} workers, "
        f"{grid.size} grid points"
    )
    if workers == 1:
        results = [run_block(block) for block in range(n_blocks)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_block, range(n_blocks)))

    survivors = tuple(
        np.concatenate([result[i] for result in results]) for i in range(check_index.size)
    )
    ensemble = SurvivalEnsemble(
        checkpoints=tuple(config.checkpoints),
        survivors=survivors,
        n_paths_total=config.n_paths,
        seed=config.seed,
    )
    for i, t in enumerate(ensemble.checkpoints):
        logger.info(f"t={t}: {ensemble.survivor_count(i)} survivors")
    return ensemble


def _survivors(ensemble: SurvivalEnsemble, index: int) -> np.ndarray:
    values = ensemble.survivors[index]
    if values.size == 0:
        raise EmptyConditioningError(
            f"no surviving paths at checkpoint t={ensemble.checkpoints[index]}"
        )
    return values


def conditional_ecdf(ensemble: SurvivalEnsemble, index: int) -> ECDF:
    return ECDF.from_sample(_survivors(ensemble, index))


def conditional_moment(ensemble: SurvivalEnsemble, index: int, gamma: float) -> float:
    """Sample mean of X_t^gamma over the survivors"""
    if not 0.0 < gamma <= 1.0:
        raise DomainError(f"gamma must lie in (0, 1], got {gamma}")
    return float(np.mean(_survivors(ensemble, index) ** gamma))


def _window(curve: Curve, window: Tuple[float, float]) -> Tuple[np.ndarray, np.ndarray]:
    t_lo, t_hi = window
    points = [(t, p) for t, p in curve if t_lo <= t <= t_hi and p > 0]
    if len(points) < 2:
        raise InsufficientDataError(
            f"need two positive survival values in [{t_lo}, {t_hi}], got {len(points)}"
        )
    t, p = np.asarray(points, dtype=float).T
    return t, p


def decay_rate(curve: Curve, window: Tuple[float, float]) -> float:
    """Least-squares slope of -ln P(T > t) against t over the window"""
    t, p = _window(curve, window)
    return float(stats.linregress(t, -np.log(p)).slope)


def decay_rate_stderr(curve: Curve, window: Tuple[float, float], n_paths: int) -> float:
    """Delta-method standard error of decay_rate for a Monte Carlo curve.

    Survival events are nested, so Cov(ln P_i, ln P_j) = (1 - p_i)/(n p_i)
    for t_i <= t_j.
    """
    t, p = _window(curve, window)
    order = np.argsort(t)
    t, p = t[order], p[order]
    centred = t - t.mean()
    weights = centred / np.sum(centred**2)
    earlier = np.minimum.outer(np.arange(t.size), np.arange(t.size))
    cov = ((1.0 - p) / (n_paths * p))[earlier]
    return float(math.sqrt(max(weights @ cov @ weights, 0.0)))


def ks_distance(ecdf: ECDF, dist: QsdDistribution) -> float:
    """sup |ECDF - CDF_nu|, both one-sided limits taken at each jump"""
    return float(stats.kstest(ecdf.values, dist.cdf, method="asymp").statistic)


def dkw_bound(n: int, alpha: float = 0.05) -> float:
    """Half-width of the DKW confidence band at level 1 - alpha"""
    if n < 1:
        raise DomainError("sample size must be positive")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))

