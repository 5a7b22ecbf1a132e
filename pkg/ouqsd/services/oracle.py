import math
from functools import singledispatch
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.special import gamma as gamma_fn
from scipy.special import binom, hyp1f1

from ouqsd.core.exceptions import DomainError
from ouqsd.models.tables import ConditionalDensityTable
from ouqsd.schemas.params import (
    LogParetoDensity,
    OUParams,
    ParetoDensity,
    PointMassInit,
    QuadratureSpec,
)
from ouqsd.services import heavytail
from ouqsd.services.eigen import spectral_coefficients, tail_expansion
from ouqsd.services.kernels import (
    absorbed_density,
    brownian_survival,
    conditional_tail,
    ou_survival,
    time_change,
)
from ouqsd.services.quadrature import QuadratureResult, integrate_adaptive

__all__ = [
    "integrate_adaptive",
    "survival_oracle",
    "survival_curve_oracle",
    "conditional_density_oracle",
    "conditional_moment_oracle",
    "eigen_relation_residual",
    "boundary_layer_ratio",
    "boundary_layer_parts",
]

# above this standardized mean the signed moment uses its large-mean expansion
_LARGE_MEAN = 20.0
_EXPANSION_TERMS = 12
# x-integrals stop below e^690, where every integrand has reached its limit
_LOG_X_MAX = 690.0

XFunction = Callable[[np.ndarray], np.ndarray]
# (x_cut, tail mass above it) -> (estimate, bound) of the discarded piece
TailRule = Callable[[float, float], Tuple[np.ndarray, np.ndarray]]


# ----------------------------------------------------------- x-integrals


def _pareto_log_cut(f, spec: QuadratureSpec) -> float:
    """ln x where the Pareto tail mass (x_m/x)^eta reaches abs_tol/10"""
    v = math.log(f.x_m) + (math.log(10.0) - math.log(spec.abs_tol)) / f.eta
    return min(max(math.log(spec.domain_cut), v), _LOG_X_MAX)


@singledispatch
def _log_cut(f, spec: QuadratureSpec) -> float:
    raise TypeError(f"unsupported density {type(f).__name__}")


@_log_cut.register
def _(f: ParetoDensity, spec: QuadratureSpec) -> float:
    return _pareto_log_cut(f, spec)


@_log_cut.register
def _(f: LogParetoDensity, spec: QuadratureSpec) -> float:
    v = _pareto_log_cut(f, spec)
    while v < _LOG_X_MAX and heavytail.tail_mass(f, math.exp(v)) >= spec.abs_tol / 10.0:
        v = min(v + math.log(10.0), _LOG_X_MAX)
    return v


def _integrate_x(f, fn: XFunction, tail_rule: TailRule, spec: QuadratureSpec) -> QuadratureResult:
    """Integral of f(x) fn(x) over the support of f"""
    if isinstance(f, PointMassInit):
        value = np.asarray(fn(np.asarray([f.x0])))[0]
        return QuadratureResult(value, np.zeros_like(value))

    v_cut = _log_cut(f, spec)
    x_cut = math.exp(v_cut)

    def integrand(v: np.ndarray) -> np.ndarray:
        x = np.maximum(np.exp(v), f.x_m)
        weight = np.asarray(heavytail.density_eval(f, x)) * x
        values = np.asarray(fn(x))
        return weight.reshape((-1,) + (1,) * (values.ndim - 1)) * values

    body = integrate_adaptive(integrand, math.log(f.x_m), v_cut, spec)
    estimate, bound = tail_rule(x_cut, float(heavytail.tail_mass(f, x_cut)))
    return QuadratureResult(body.value + estimate, body.error + bound)


def _spec(spec: Optional[QuadratureSpec]) -> QuadratureSpec:
    return QuadratureSpec() if spec is None else spec


# --------------------------------------------------------------- survival


def survival_curve_oracle(
    params: OUParams, f, times: Sequence[float], spec: Optional[QuadratureSpec] = None
) -> List[Tuple[float, float]]:
    """P_f(T_0 > t) at each time, all from one set of panels"""
    spec = _spec(spec)
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t <= 0):
        raise DomainError("times must be a nonempty list of positive values")

    def fn(x: np.ndarray) -> np.ndarray:
        return np.asarray(ou_survival(params, x[:, None], t[None, :]))

    def tail_rule(x_cut: float, mass: float):
        # survival lies in [S(x_cut), 1] above the cut
        at_cut = np.atleast_1d(ou_survival(params, x_cut, t))
        return mass * at_cut, mass * (1.0 - at_cut)

    result = _integrate_x(f, fn, tail_rule, spec)
    values = np.atleast_1d(result.value)
    logger.debug(f"survival oracle at {t.size} times, error bound {np.max(result.error):.2g}")
    return [(float(ti), float(v)) for ti, v in zip(t, values)]


def survival_oracle(params: OUParams, f, t: float, spec: Optional[QuadratureSpec] = None) -> float:
    """P_f(T_0 > t) = int f(x) P_x(T_0 > t) dx"""
    return survival_curve_oracle(params, f, [t], spec)[0][1]


# ---------------------------------------------------- conditional density


def conditional_density_oracle(
    params: OUParams,
    f,
    t: float,
    y_grid: Sequence[float],
    spec: Optional[QuadratureSpec] = None,
) -> ConditionalDensityTable:
    """Density of X_t given T_0 > t on y_grid, with the off-grid mass certified"""
    spec = _spec(spec)
    y = np.asarray(y_grid, dtype=float)
    if y.ndim != 1 or y.size == 0 or np.any(y <= 0) or np.any(np.diff(y) <= 0):
        raise DomainError("y_grid must be a nonempty ascending list of positive values")
    if not t > 0:
        raise DomainError(f"time must be positive, got {t}")
    h, _ = time_change(params, t)
    peak = 1.0 / math.sqrt(2.0 * math.pi * h)
    ends = np.array([y[0], y[-1]])

    # columns: q(t, x, y_j), P_x(T_0 > t), P_x(X_t > y_0), P_x(X_t > y_last)
    def fn(x: np.ndarray) -> np.ndarray:
        q = np.asarray(absorbed_density(params, t, x[:, None], y[None, :]))
        survival = np.asarray(ou_survival(params, x, t))[:, None]
        above = np.asarray(conditional_tail(params, x[:, None], t, ends[None, :]))
        return np.hstack([q, survival, above])

    def tail_rule(x_cut: float, mass: float):
        at_cut = fn(np.asarray([x_cut]))[0]
        bound = np.full(at_cut.shape, mass)
        bound[: y.size] = mass * peak
        return mass * at_cut, bound

    result = _integrate_x(f, fn, tail_rule, spec)
    values = np.asarray(result.value)
    survival = float(values[y.size])
    if survival <= 0:
        raise DomainError(f"survival probability at t={t} underflows")
    below_first, above_last = values[y.size + 1], values[y.size + 2]
    return ConditionalDensityTable(
        t=float(t),
        grid=y,
        density=values[: y.size] / survival,
        survival=survival,
        head_mass=float((survival - below_first) / survival),
        tail_mass=float(above_last / survival),
    )


# ---------------------------------------------------- conditional moments


def signed_moment(m: np.ndarray, h: float, gamma: float) -> np.ndarray:
    """E[sign(Y) |Y|^gamma] for Y ~ N(m, h), which is E_x(X_t^gamma; T_0 > t)"""
    mu = np.asarray(m, dtype=float) / math.sqrt(h)
    out = np.empty_like(mu)
    small = mu <= _LARGE_MEAN
    z = 0.5 * mu[small] ** 2
    out[small] = (
        math.sqrt(2.0 / math.pi)
        * 2.0 ** (gamma / 2.0)
        * gamma_fn(gamma / 2.0 + 1.0)
        * mu[small]
        * np.exp(-z)
        * hyp1f1(gamma / 2.0 + 1.0, 1.5, z)
    )
    if (~small).any():
        k = np.arange(_EXPANSION_TERMS)
        double_fact = np.concatenate([[1.0], np.cumprod(2.0 * k[1:] - 1.0)])
        weights = binom(gamma, 2.0 * k) * double_fact
        big = mu[~small]
        expansion = (weights[None, :] * big[:, None] ** (-2.0 * k[None, :])).sum(axis=1)
        out[~small] = big**gamma * expansion
    return h ** (gamma / 2.0) * out


def conditional_moment_oracle(
    params: OUParams, f, t: float, gamma: float, spec: Optional[QuadratureSpec] = None
) -> float:
    """E_f(X_t^gamma | T_0 > t)"""
    spec = _spec(spec)
    if not 0.0 <= gamma < getattr(f, "eta", math.inf):
        raise DomainError(f"moment of order {gamma} is infinite for this initial density")
    h, _ = time_change(params, t)
    shrink = math.exp(-params.a * t)

    def fn(x: np.ndarray) -> np.ndarray:
        moment = signed_moment(shrink * x, h, gamma)
        return np.column_stack([moment, ou_survival(params, x, t)])

    def tail_rule(x_cut: float, mass: float):
        # above the cut X_t^gamma is (e^{-at} x)^gamma up to e^{-72}
        moment_tail = shrink**gamma * heavytail.tail_moment(f, x_cut, gamma)
        return np.array([moment_tail, mass]), np.array([spec.abs_tol, mass])

    values = np.asarray(_integrate_x(f, fn, tail_rule, spec).value)
    return float(values[0] / values[1])


# -------------------------------------------------------- eigen relation


def eigen_relation_residual(
    params: OUParams,
    lam: float,
    s: float,
    y_grid: Sequence[float],
    spec: Optional[QuadratureSpec] = None,
) -> float:
    """max_y |Lambda(s, y)/phi(y) - e^{-lambda s}| / e^{-lambda s}.

    Lambda(s, y) = int q(s, x, y) phi_lambda(x) dx is computed by quadrature
    up to x = e^{as}(y_max + 12 sqrt(h)), beyond which q is below e^{-72}.
    phi comes from the series on the default validated range and from the
    tail expansion above it.
    """
    spec = _spec(spec)
    if not 0.0 < lam <= params.a:
        raise DomainError(f"lambda must lie in (0, a={params.a}], got {lam}")
    if not s > 0:
        raise DomainError(f"s must be positive, got {s}")
    y = np.asarray(y_grid, dtype=float)
    if y.size == 0 or np.any(y <= 0):
        raise DomainError("y_grid must hold positive values")
    h, _ = time_change(params, s)
    x_max = math.exp(params.a * s) * (float(y.max()) + 12.0 * math.sqrt(h))
    phi = _phi_half_line(params, lam)
    values = _lambda_transform(params, phi, s, y, x_max, spec)

    target = math.exp(-lam * s)
    ratio = values / phi(y)
    residual = float(np.max(np.abs(ratio - target)) / target)
    logger.debug(f"eigen relation lambda={lam} s={s}: residual {residual:.3g}")
    return residual


def _phi_half_line(params: OUParams, lam: float) -> XFunction:
    u_switch = params.default_u_max()
    series = spectral_coefficients(params, lam, u_max=u_switch)
    if series.exact:
        return lambda u: np.asarray(series.phi(u))
    tail = tail_expansion(params, lam, u_switch)

    def phi(u: np.ndarray) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        inner = np.asarray(series.phi(np.minimum(u, u_switch)))
        outer = np.asarray(tail.density(np.maximum(u, u_switch)))
        return np.where(u <= u_switch, inner, outer)

    return phi


def _lambda_transform(
    params: OUParams,
    phi: XFunction,
    s: float,
    y: np.ndarray,
    x_max: float,
    spec: QuadratureSpec,
) -> np.ndarray:
    def integrand(x: np.ndarray) -> np.ndarray:
        q = np.asarray(absorbed_density(params, s, x[:, None], y[None, :]))
        return q * phi(x)[:, None]

    return np.asarray(integrate_adaptive(integrand, 0.0, x_max, spec).value)


# --------------------------------------------------------- boundary layer


def boundary_layer_parts(
    f, u: float, c: float, t: float, spec: Optional[QuadratureSpec] = None
) -> Tuple[float, float]:
    """Numerator and denominator of the boundary-layer ratio.

    Both integrate f(x) P_{c x/u}(T_0^B > t); the numerator over
    x < ln(u)/c and the denominator over x > ln(u)/c.
    """
    spec = _spec(spec)
    if not u > math.e:
        raise DomainError(f"u must exceed e, got {u}")
    if not (c > 0 and t > 0):
        raise DomainError("c and t must be positive")
    split = math.log(u) / c

    def fn(x: np.ndarray) -> np.ndarray:
        return np.asarray(brownian_survival(c * x / u, t))

    def weighted(v: np.ndarray) -> np.ndarray:
        x = np.maximum(np.exp(v), f.x_m)
        return np.asarray(heavytail.density_eval(f, x)) * x * fn(x)

    lower = math.log(f.x_m)
    numerator = 0.0
    if split > f.x_m:
        numerator = integrate_adaptive(weighted, lower, math.log(split), spec).value
    start = max(split, f.x_m)
    cut = max(math.exp(_log_cut(f, spec)), 10.0 * start)
    body = integrate_adaptive(weighted, math.log(start), math.log(cut), spec).value
    denominator = body + float(heavytail.tail_mass(f, cut)) * float(fn(np.asarray(cut)))
    return float(numerator), float(denominator)


def boundary_layer_ratio(
    f, u: float, c: float, t: float, spec: Optional[QuadratureSpec] = None
) -> float:
    numerator, denominator = boundary_layer_parts(f, u, c, t, spec)
    return numerator / denominator
