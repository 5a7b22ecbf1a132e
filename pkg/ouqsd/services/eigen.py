import math
from typing import Optional, Union

import numpy as np
from loguru import logger
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq
from scipy.special import gamma as gamma_fn
from scipy.special import logsumexp, poch, rgamma, zeta

from ouqsd.core.config import settings
from ouqsd.core.exceptions import DomainError, RangeError
from ouqsd.models.spectral import QsdDistribution, SpectralSeries, TailExpansion
from ouqsd.schemas.params import OUParams

ArrayLike = Union[float, np.ndarray]

_CHUNK = 256
_MAX_TERMS = 1_000_000
_MASS_TERMS = 64
_SCAN_POINTS = 10_000
_TABLE_INTERVALS = 4000
_GRADING = 2.0
_TAIL_TERMS = 24


def _resolve(params: OUParams, tol: Optional[float], u_max: Optional[float]):
    tol = settings.series_tol if tol is None else tol
    u_max = params.default_u_max() if u_max is None else u_max
    if not (tol > 0 and math.isfinite(tol)):
        raise DomainError(f"tol must be positive, got {tol}")
    if not (u_max > 0 and math.isfinite(u_max)):
        raise DomainError(f"u_max must be positive, got {u_max}")
    return tol, u_max


def spectral_coefficients(
    params: OUParams,
    lam: float,
    tol: Optional[float] = None,
    u_max: Optional[float] = None,
) -> SpectralSeries:
    """Coefficients b_1, b_3, ... of psi_lambda, truncated for accuracy on [0, u_max].

    b_{2k+3} = b_{2k+1} * 2(a(2k+1) - lambda) / ((2k+2)(2k+3)), each term
    derived from its predecessor so no factorial is ever formed.
    """
    if not math.isfinite(lam):
        raise DomainError(f"lambda must be finite, got {lam}")
    tol, u_max = _resolve(params, tol, u_max)
    a = params.a
    log_u = math.log(u_max)
    log_tol = math.log(tol)

    log_abs = np.zeros(1)
    signs = np.ones(1)
    exact = False
    while True:
        k = np.arange(log_abs.size - 1, log_abs.size - 1 + _CHUNK, dtype=float)
        ratio = 2.0 * (a * (2.0 * k + 1.0) - lam) / ((2.0 * k + 2.0) * (2.0 * k + 3.0))
        zeros = np.flatnonzero(ratio == 0.0)
        if zeros.size:
            ratio = ratio[: zeros[0]]
            exact = True
        log_abs = np.concatenate([log_abs, log_abs[-1] + np.cumsum(np.log(np.abs(ratio)))])
        signs = np.concatenate([signs, signs[-1] * np.cumprod(np.sign(ratio))])
        if exact:
            break

        terms = log_abs + (2.0 * np.arange(log_abs.size) + 1.0) * log_u
        peak = int(np.argmax(terms))
        small = np.flatnonzero(terms[peak + 1 :] < log_tol + logsumexp(terms))
        # past the peak the terms fall monotonically, so the first small one is final
        if small.size:
            stop = peak + 1 + int(small[0])
            log_abs, signs = log_abs[: stop + 1], signs[: stop + 1]
            break
        if log_abs.size > _MAX_TERMS:
            raise DomainError(f"series does not reach tol={tol} at u_max={u_max}")

    logger.debug(f"series a={a} lambda={lam}: {log_abs.size} terms, u_max={u_max}")
    return SpectralSeries(
        a=a, lam=lam, log_abs=log_abs, signs=signs, u_max=u_max, tol=tol, exact=exact
    )


def _check_range(series: SpectralSeries, u: np.ndarray) -> None:
    if np.any(u < 0) or not np.all(np.isfinite(u)):
        raise RangeError("phi is evaluated on u >= 0 only")
    if not series.exact and np.any(u > series.u_max * (1.0 + 1e-12)):
        raise RangeError(f"series is validated on [0, {series.u_max}] only")


def phi_eval(series: SpectralSeries, u: ArrayLike) -> ArrayLike:
    """phi_lambda(u) = e^{-a u^2} psi_lambda(u)"""
    _check_range(series, np.asarray(u, dtype=float))
    return series.phi(u)


def _check_qsd_rate(a: float, lam: float) -> None:
    if not 0.0 < lam <= a:
        raise DomainError(f"lambda must lie in (0, a={a}], got {lam}")


def phi_mass(series: SpectralSeries) -> float:
    """Integral of phi_lambda over (0, inf) = (1/2a) sum_k (k!/a^k) b_{2k+1}.

    With c_k = k! b_{2k+1} / a^k the terms obey c_{k+1} = c_k (2k+1-r)/(2k+3),
    r = lambda/a, and the remainder from K on telescopes to c_K (2K+1)/r.
    The partial sum is taken from the stored coefficients and closed with
    that remainder, which makes the value 1/(2 lambda).
    """
    a, lam = series.a, series.lam
    _check_qsd_rate(a, lam)
    n = min(series.n_terms - 1, _MASS_TERMS)
    k = np.arange(n + 1, dtype=float)
    log_factorial = np.array([math.lgamma(j + 1.0) for j in k])
    weights = series.log_abs[: n + 1] + log_factorial - k * math.log(a)
    c = series.signs[: n + 1] * np.exp(weights)
    remainder = c[n] * (2.0 * n + 1.0) * a / lam
    return float((c[:n].sum() + remainder) / (2.0 * a))


def mass_upper_bound(params: OUParams, lam: float, d: float = 1.0) -> float:
    """(1/2a) (1 + e^{lambda d / 2a} / 2 * zeta(1 + lambda/2a))"""
    _check_qsd_rate(params.a, lam)
    s = lam / (2.0 * params.a)
    return float((1.0 + 0.5 * math.exp(s * d) * zeta(1.0 + s)) / (2.0 * params.a))


def tail_expansion(params: OUParams, lam: float, u_from: float) -> Optional[TailExpansion]:
    """Large-u expansion of phi_lambda for lambda < a; None when the tail is Gaussian.

    psi_lambda(u) = u M(alpha, 3/2, a u^2) with alpha = (1 - lambda/a)/2, and
    Kummer's asymptotics turn the e^{a u^2} growth into an algebraic tail.
    The expansion is asymptotic, so it is cut before its terms start growing
    at u_from.
    """
    a = params.a
    r = lam / a
    alpha = 0.5 * (1.0 - r)
    scale = float(gamma_fn(1.5) * rgamma(alpha) * a ** (alpha - 1.5))
    if scale == 0.0:
        return None
    s = np.arange(_TAIL_TERMS, dtype=float)
    d = poch(1.5 - alpha, s) * poch(1.0 - alpha, s) / gamma_fn(s + 1.0)
    weights = d * a**-s
    size = np.abs(weights) * u_from ** (-2.0 * s)
    rising = np.flatnonzero(np.diff(size) > 0)
    if rising.size:
        weights = weights[: rising[0] + 1]
    return TailExpansion(r=r, scale=scale, weights=weights)


def _graded_grid(u_max: float) -> np.ndarray:
    s = np.linspace(0.0, 1.0, _TABLE_INTERVALS + 1)
    return u_max * np.sinh(_GRADING * s) / math.sinh(_GRADING)


def build_qsd(
    params: OUParams,
    lam: float,
    tol: Optional[float] = None,
    u_max: Optional[float] = None,
) -> QsdDistribution:
    """nu_lambda, tabulated on [0, u_max] and continued analytically above it."""
    _check_qsd_rate(params.a, lam)
    series = spectral_coefficients(params, lam, tol, u_max)
    mass = phi_mass(series)
    grid = _graded_grid(series.u_max)

    nodes, weights = np.polynomial.legendre.leggauss(8)
    mid = 0.5 * (grid[1:] + grid[:-1])
    half = 0.5 * np.diff(grid)
    points = mid[:, None] + half[:, None] * nodes[None, :]
    values = series.phi(points.ravel()).reshape(points.shape)
    pieces = (values * weights[None, :]).sum(axis=1) * half
    cdf_table = np.concatenate([[0.0], np.cumsum(pieces)]) / mass
    density_table = np.asarray(series.phi(grid)) / mass

    cdf_spline = CubicHermiteSpline(grid, cdf_table, density_table)
    # the table is strictly increasing wherever the density is positive
    keep = np.concatenate([[True], np.diff(cdf_table) > 0])
    quantile_spline = PchipInterpolator(cdf_table[keep], grid[keep])

    dist = QsdDistribution(
        a=params.a,
        lam=lam,
        mass_c=mass,
        series=series,
        grid=grid,
        cdf_table=cdf_table,
        density_table=density_table,
        tail=tail_expansion(params, lam, series.u_max) if lam < params.a else None,
        _cdf_spline=cdf_spline,
        _quantile_spline=quantile_spline,
    )
    logger.debug(
        f"nu_{lam}: mass={mass:.12g}, table mass={cdf_table[-1]:.12g}, "
        f"analytic tail={dist.tail_bound():.3g}"
    )
    return dist


def first_sign_change(series: SpectralSeries, u_max: float) -> Optional[float]:
    """Smallest zero of psi_lambda in (0, u_max], or None if psi stays positive."""
    if not u_max > 0:
        raise DomainError(f"u_max must be positive, got {u_max}")
    if not series.exact and u_max > series.u_max * (1.0 + 1e-12):
        raise RangeError(f"series is validated on [0, {series.u_max}] only")
    grid = np.linspace(0.0, u_max, _SCAN_POINTS + 1)[1:]
    values = np.asarray(series.psi_scaled(grid))
    crossing = np.flatnonzero(values <= 0)
    if crossing.size == 0:
        return None
    i = int(crossing[0])
    if values[i] == 0:
        return float(grid[i])
    lo = grid[i - 1] if i > 0 else 0.5 * grid[0]
    return float(brentq(series.psi_scaled, lo, grid[i], xtol=1e-13, rtol=4 * np.finfo(float).eps))


def generator_residual(series: SpectralSeries, u: ArrayLike, step: float = 1e-4) -> ArrayLike:
    """Central-difference value of 1/2 phi'' + (a u phi)' + lambda phi"""
    u = np.asarray(u, dtype=float)
    _check_range(series, u + step)
    _check_range(series, u - step)
    a = series.a
    lo, mid, hi = (np.asarray(series.phi(u + d)) for d in (-step, 0.0, step))
    second = (hi - 2.0 * mid + lo) / step**2
    drift = (a * (u + step) * hi - a * (u - step) * lo) / (2.0 * step)
    value = 0.5 * second + drift + series.lam * mid
    return float(value) if value.ndim == 0 else value


def _psi_rhs(a: float, lam: float):
    def rhs(u: float, state: np.ndarray) -> np.ndarray:
        psi, dpsi = state
        return np.array([dpsi, 2.0 * a * u * dpsi - 2.0 * lam * psi])

    return rhs


def ode_psi(params: OUParams, lam: float, u: ArrayLike) -> ArrayLike:
    """psi_lambda by direct integration of psi'' = 2 a u psi' - 2 lambda psi."""
    u = np.asarray(u, dtype=float)
    flat = np.atleast_1d(u)
    if np.any(flat < 0):
        raise DomainError("psi is integrated on u >= 0 only")
    order = np.argsort(flat)
    solution = solve_ivp(
        _psi_rhs(params.a, lam),
        (0.0, float(flat.max())),
        [0.0, 1.0],
        method="DOP853",
        t_eval=flat[order],
        rtol=1e-13,
        atol=1e-15,
    )
    out = np.empty_like(flat)
    out[order] = solution.y[0]
    return float(out[0]) if u.ndim == 0 else out


def ode_first_zero(params: OUParams, lam: float, u_max: float) -> Optional[float]:
    """First zero of psi_lambda on (0, u_max] located by the integrator's event finder."""

    def crosses(u: float, state: np.ndarray) -> float:
        return state[0]

    crosses.terminal = True
    crosses.direction = -1.0
    solution = solve_ivp(
        _psi_rhs(params.a, lam),
        (0.0, u_max),
        [0.0, 1.0],
        method="DOP853",
        events=crosses,
        rtol=1e-13,
        atol=1e-15,
    )
    events = solution.t_events[0]
    return float(events[0]) if events.size else None
