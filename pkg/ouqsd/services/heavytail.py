import math
from functools import lru_cache, singledispatch
from typing import NamedTuple, Union

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from ouqsd.core.exceptions import DomainError
from ouqsd.schemas.params import (
    LogParetoDensity,
    ParetoDensity,
    PointMassInit,
    QuadratureSpec,
)
from ouqsd.services.quadrature import integrate_adaptive

ArrayLike = Union[float, np.ndarray]

# Gauss-Legendre rule used per table interval
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_TABLE_SIZE = 4001


def _finish(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


# ---------------------------------------------------------------- density


@singledispatch
def density_eval(f, x: ArrayLike) -> ArrayLike:
    raise TypeError(f"unsupported density {type(f).__name__}")


@density_eval.register
def _(f: ParetoDensity, x: ArrayLike) -> ArrayLike:
    x = np.asarray(x, dtype=float)
    inside = x >= f.x_m
    safe = np.where(inside, x, f.x_m)
    value = f.eta * f.x_m**f.eta * safe ** (-(1.0 + f.eta))
    return _finish(np.where(inside, value, 0.0))


@density_eval.register
def _(f: LogParetoDensity, x: ArrayLike) -> ArrayLike:
    x = np.asarray(x, dtype=float)
    inside = x >= f.x_m
    safe = np.where(inside, x, f.x_m)
    value = _log_pareto_table(f).norm * np.log(math.e + safe) * safe ** (-(1.0 + f.eta))
    return _finish(np.where(inside, value, 0.0))


def log_density_exponent(f, u: ArrayLike) -> ArrayLike:
    """ln f(u) / ln u, which tends to -(1 + eta)"""
    u = np.asarray(u, dtype=float)
    if np.any(u <= max(1.0, f.x_m)):
        raise DomainError("need u > max(1, x_m)")
    return _finish(np.log(density_eval(f, u)) / np.log(u))


# ------------------------------------------------------------ distribution


@singledispatch
def cdf(f, x: ArrayLike) -> ArrayLike:
    raise TypeError(f"unsupported density {type(f).__name__}")


@cdf.register
def _(f: ParetoDensity, x: ArrayLike) -> ArrayLike:
    return _finish(1.0 - np.asarray(tail_mass(f, x)))


@cdf.register
def _(f: LogParetoDensity, x: ArrayLike) -> ArrayLike:
    x = np.asarray(x, dtype=float)
    table = _log_pareto_table(f)
    v = np.log(np.maximum(x, f.x_m))
    inside = v <= table.v[-1]
    value = np.where(
        inside,
        table.cdf_spline(np.minimum(v, table.v[-1])),
        1.0 - table.norm * _log_pareto_tail_integral(f.eta, np.maximum(v, table.v[-1])),
    )
    return _finish(np.where(x < f.x_m, 0.0, value))


@singledispatch
def tail_mass(f, x: ArrayLike) -> ArrayLike:
    """Mass of f above x"""
    raise TypeError(f"unsupported density {type(f).__name__}")


@tail_mass.register
def _(f: ParetoDensity, x: ArrayLike) -> ArrayLike:
    x = np.maximum(np.asarray(x, dtype=float), f.x_m)
    return _finish((f.x_m / x) ** f.eta)


@tail_mass.register
def _(f: LogParetoDensity, x: ArrayLike) -> ArrayLike:
    return _finish(1.0 - np.asarray(cdf(f, x)))


@singledispatch
def tail_moment(f, x: float, gamma: float) -> float:
    """Integral of y^gamma f(y) over y > x"""
    raise TypeError(f"unsupported density {type(f).__name__}")


@tail_moment.register
def _(f: ParetoDensity, x: float, gamma: float) -> float:
    if gamma >= f.eta:
        return math.inf
    x = max(x, f.x_m)
    return f.eta * f.x_m**f.eta * x ** (gamma - f.eta) / (f.eta - gamma)


@tail_moment.register
def _(f: LogParetoDensity, x: float, gamma: float) -> float:
    if gamma >= f.eta:
        return math.inf
    spec = QuadratureSpec(abs_tol=1e-12)
    kappa = f.eta - gamma
    v0 = math.log(max(x, f.x_m))
    v1 = v0 + 60.0 / kappa

    def integrand(v: np.ndarray) -> np.ndarray:
        return np.logaddexp(1.0, v) * np.exp(-kappa * v)

    body = integrate_adaptive(integrand, v0, v1, spec).value
    tail = math.exp(-kappa * v1) * (kappa * v1 + 1.0) / kappa**2
    return _log_pareto_table(f).norm * (body + tail)


# ---------------------------------------------------------------- sampling


@singledispatch
def sample_many(f, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF transform of an array of uniforms in [0, 1)"""
    raise TypeError(f"unsupported density {type(f).__name__}")


def _check_uniforms(uniforms: ArrayLike) -> np.ndarray:
    u = np.asarray(uniforms, dtype=float)
    if np.any(u < 0.0) or np.any(u >= 1.0):
        raise DomainError("uniform draws must lie in [0, 1)")
    return u


@sample_many.register
def _(f: ParetoDensity, uniforms: np.ndarray) -> np.ndarray:
    u = _check_uniforms(uniforms)
    return f.x_m * np.exp(-np.log1p(-u) / f.eta)


@sample_many.register
def _(f: LogParetoDensity, uniforms: np.ndarray) -> np.ndarray:
    u = _check_uniforms(uniforms)
    table = _log_pareto_table(f)
    v = table.inverse(np.minimum(u, table.cdf[-1]))
    # one Newton step on the exact density in v
    fv = table.norm * np.logaddexp(1.0, v) * np.exp(-f.eta * v)
    v = v - (table.cdf_spline(v) - u) / fv
    return np.exp(np.clip(v, table.v[0], None))


@sample_many.register
def _(f: PointMassInit, uniforms: np.ndarray) -> np.ndarray:
    u = _check_uniforms(uniforms)
    return np.full(u.shape, f.x0)


def sample(f, uniform: float) -> float:
    return float(sample_many(f, np.asarray([uniform]))[0])


# ------------------------------------------------- truncated moments


def moment_ratio_limit(f, gamma: float) -> float:
    """(1 - eta) / (eta - gamma)"""
    return (1.0 - f.eta) / (f.eta - gamma)


@singledispatch
def truncated_moment_ratio(f, u: float, gamma: float) -> float:
    """u^{1-gamma} * int_u^inf x^gamma f / int_0^u x f"""
    raise TypeError(f"unsupported density {type(f).__name__}")


def _check_ratio_args(f, u: float, gamma: float) -> None:
    if not f.in_attraction_class:
        raise DomainError("truncated moment ratio needs eta in (0, 1)")
    if not 0.0 < gamma < f.eta:
        raise DomainError("gamma must lie in (0, eta); the upper integral diverges otherwise")
    if not u > f.x_m:
        raise DomainError("u must exceed x_m")


@truncated_moment_ratio.register
def _(f: ParetoDensity, u: float, gamma: float) -> float:
    _check_ratio_args(f, u, gamma)
    shrink = -math.expm1((1.0 - f.eta) * math.log(f.x_m / u))
    return moment_ratio_limit(f, gamma) / shrink


@truncated_moment_ratio.register
def _(f: LogParetoDensity, u: float, gamma: float) -> float:
    _check_ratio_args(f, u, gamma)
    spec = QuadratureSpec(abs_tol=1e-8 * u ** (1.0 - f.eta))
    exponent = 1.0 - f.eta

    def first_moment(v: np.ndarray) -> np.ndarray:
        return np.logaddexp(1.0, v) * np.exp(exponent * v)

    lower = _log_pareto_table(f).norm * integrate_adaptive(
        first_moment, math.log(f.x_m), math.log(u), spec
    ).value
    return u ** (1.0 - gamma) * tail_moment(f, u, gamma) / lower


# ------------------------------------------------------- log-pareto table


class _LogParetoTable(NamedTuple):
    norm: float
    v: np.ndarray
    cdf: np.ndarray
    cdf_spline: CubicHermiteSpline
    inverse: PchipInterpolator


def _log_pareto_tail_integral(eta: float, v: ArrayLike) -> ArrayLike:
    """Unnormalized mass above e^v, from ln(e + x) = ln x + O(e/x)"""
    v = np.asarray(v, dtype=float)
    return np.exp(-eta * v) * (eta * v + 1.0) / eta**2


@lru_cache(maxsize=32)
def _log_pareto_table(f: LogParetoDensity) -> _LogParetoTable:
    eta = f.eta
    v = np.linspace(math.log(f.x_m), math.log(f.x_m) + 60.0 / eta, _TABLE_SIZE)
    mid = 0.5 * (v[1:] + v[:-1])
    half = 0.5 * np.diff(v)
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    g = np.logaddexp(1.0, nodes) * np.exp(-eta * nodes)
    pieces = half * (g * _GL_WEIGHTS[None, :]).sum(axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(pieces)])
    total = cumulative[-1] + _log_pareto_tail_integral(eta, v[-1])
    norm = 1.0 / total
    table_cdf = cumulative * norm
    slope = norm * np.logaddexp(1.0, v) * np.exp(-eta * v)
    cdf_spline = CubicHermiteSpline(v, table_cdf, slope, extrapolate=True)
    keep = np.concatenate([[True], np.diff(table_cdf) > 0])
    inverse = PchipInterpolator(table_cdf[keep], v[keep])
    return _LogParetoTable(
        norm=norm, v=v, cdf=table_cdf, cdf_spline=cdf_spline, inverse=inverse
    )
