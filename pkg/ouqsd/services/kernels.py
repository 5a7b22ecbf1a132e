from typing import Tuple, Union

import numpy as np
from scipy.special import erf, erfc

from ouqsd.core.exceptions import DomainError
from ouqsd.schemas.params import OUParams

ArrayLike = Union[float, np.ndarray]

# sinh(z) is used below this argument, the expm1 difference form above it
SINH_SWITCH = 30.0


def _finish(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def _positive_time(t: ArrayLike) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t <= 0):
        raise DomainError("time must be positive and finite")
    return t


def time_change(params: OUParams, t: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """Return (h(t), g(t)) with h = (1 - e^{-2at})/2a and g = (e^{2at} - 1)/2a"""
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("time must be finite")
    if np.any(t < 0):
        raise DomainError("time must be nonnegative")
    two_a = 2.0 * params.a
    with np.errstate(over="ignore"):
        h = -np.expm1(-two_a * t) / two_a
        g = np.expm1(two_a * t) / two_a
    return _finish(h), _finish(g)


def _mean_and_variance(params: OUParams, t: np.ndarray, x: ArrayLike):
    h, _ = time_change(params, t)
    return np.exp(-params.a * t) * np.asarray(x, dtype=float), np.asarray(h)


def transition_density(params: OUParams, t: ArrayLike, x: ArrayLike, y: ArrayLike) -> ArrayLike:
    """p(t, x, y): Gaussian in y with mean e^{-at}x and variance h(t)"""
    t = _positive_time(t)
    m, h = _mean_and_variance(params, t, x)
    y = np.asarray(y, dtype=float)
    value = np.exp(-((y - m) ** 2) / (2.0 * h)) / np.sqrt(2.0 * np.pi * h)
    return _finish(value)


def absorbed_density(params: OUParams, t: ArrayLike, x: ArrayLike, y: ArrayLike) -> ArrayLike:
    """q(t, x, y) = p(t, x, y) - p(t, x, -y), density of X_t on {T_0 > t}"""
    t = _positive_time(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise DomainError("absorbed density needs x >= 0 and y >= 0")
    m, h = _mean_and_variance(params, t, x)
    arg = m * y / h

    small = arg < SINH_SWITCH
    with np.errstate(over="ignore", invalid="ignore"):
        sinh_form = (
            np.sqrt(2.0 / (np.pi * h))
            * np.exp(-(m * m + y * y) / (2.0 * h))
            * np.sinh(np.where(small, arg, 0.0))
        )
        diff_form = (
            np.exp(-((y - m) ** 2) / (2.0 * h))
            * -np.expm1(-2.0 * np.where(small, SINH_SWITCH, arg))
            / np.sqrt(2.0 * np.pi * h)
        )
    return _finish(np.where(small, sinh_form, diff_form))


def brownian_survival(x: ArrayLike, t: ArrayLike) -> ArrayLike:
    """P_x(T_0^B > t) = erf(x / sqrt(2t))"""
    t = _positive_time(t)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("starting point must be nonnegative")
    return _finish(erf(x / np.sqrt(2.0 * t)))


def ou_survival(params: OUParams, x: ArrayLike, t: ArrayLike) -> ArrayLike:
    """P_x(T_0^X > t) = P_{e^{-at}x}(T_0^B > h(t))"""
    t = _positive_time(t)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("starting point must be nonnegative")
    m, h = _mean_and_variance(params, t, x)
    return brownian_survival(m, h)


def conditional_tail(params: OUParams, x: ArrayLike, t: ArrayLike, y: ArrayLike) -> ArrayLike:
    """P_x(X_t > y, T_0 > t), the absorbed mass above level y"""
    t = _positive_time(t)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("level must be nonnegative")
    m, h = _mean_and_variance(params, t, x)
    scale = np.sqrt(2.0 * h)
    value = 0.5 * (erfc((y - m) / scale) - erfc((y + m) / scale))
    return _finish(np.maximum(value, 0.0))
