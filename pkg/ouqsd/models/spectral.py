"""Eigenfunction series and the quasi-stationary distributions built from them."""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

ArrayLike = Union[float, np.ndarray]

# bound on the size of the (points x terms) evaluation matrix
_EVAL_CELLS = 4_000_000
_TAIL_NEWTON_STEPS = 12


def _finish(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class SpectralSeries:
    """Odd power series psi_lambda(u) = sum_k b_{2k+1} u^{2k+1}.

    Coefficients are kept as log-magnitudes and signs: past k ~ 170 they
    underflow double precision while their products with u^{2k+1} do not.
    """

    a: float
    lam: float
    log_abs: np.ndarray
    signs: np.ndarray
    u_max: float
    tol: float
    exact: bool = False  # the recursion terminated, psi is a polynomial

    @property
    def coeffs(self) -> np.ndarray:
        return self.signs * np.exp(self.log_abs)

    @property
    def n_terms(self) -> int:
        return int(self.log_abs.shape[0])

    @property
    def powers(self) -> np.ndarray:
        return 2.0 * np.arange(self.n_terms) + 1.0

    def _exponents(self, u: np.ndarray) -> np.ndarray:
        return self.log_abs[None, :] + self.powers[None, :] * np.log(u)[:, None]

    def _reduce(self, u: np.ndarray, gaussian: bool, scaled: bool) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.zeros(u.shape)
        positive = u > 0
        idx = np.flatnonzero(positive)
        chunk = max(1, _EVAL_CELLS // self.n_terms)
        for start in range(0, idx.size, chunk):
            sel = idx[start : start + chunk]
            exps = self._exponents(u[sel])
            shift = exps.max(axis=1)
            total = (self.signs[None, :] * np.exp(exps - shift[:, None])).sum(axis=1)
            if scaled:
                out[sel] = total
            else:
                damp = self.a * u[sel] ** 2 if gaussian else 0.0
                out[sel] = total * np.exp(shift - damp)
        return out

    def phi(self, u: ArrayLike) -> ArrayLike:
        """phi_lambda(u) = e^{-a u^2} psi_lambda(u)"""
        scalar = np.ndim(u) == 0
        value = self._reduce(u, gaussian=True, scaled=False)
        return float(value[0]) if scalar else value

    def psi_scaled(self, u: ArrayLike) -> ArrayLike:
        """psi_lambda(u) divided by its largest term; continuous, same sign as psi"""
        scalar = np.ndim(u) == 0
        value = self._reduce(u, gaussian=False, scaled=True)
        return float(value[0]) if scalar else value


@dataclass(frozen=True)
class TailExpansion:
    """phi(u) ~ scale * sum_s weights[s] * u^{-1-r-2s} for large u"""

    r: float
    scale: float
    weights: np.ndarray

    @property
    def powers(self) -> np.ndarray:
        return 1.0 + self.r + 2.0 * np.arange(self.weights.shape[0])

    def density(self, u: ArrayLike) -> ArrayLike:
        u = np.asarray(u, dtype=float)
        terms = self.weights[None, :] * np.atleast_1d(u)[:, None] ** -self.powers[None, :]
        value = self.scale * terms.sum(axis=1)
        return float(value[0]) if u.ndim == 0 else value

    def log_integral(self, v: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """ln of the integral above y = e^v, and its derivative in v"""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        s = np.arange(self.weights.shape[0], dtype=float)
        decay = np.exp(-2.0 * s[None, :] * v[:, None])
        terms = (self.weights / (self.powers - 1.0))[None, :] * decay
        total = terms.sum(axis=1)
        slope = (-2.0 * s[None, :] * terms).sum(axis=1)
        return math.log(self.scale) - self.r * v + np.log(total), slope / total - self.r

    def integral(self, u: ArrayLike, gamma: float = 0.0) -> ArrayLike:
        """Integral of y^gamma phi(y) over y > u"""
        u = np.asarray(u, dtype=float)
        exponent = self.powers - 1.0 - gamma
        terms = self.weights[None, :] * np.atleast_1d(u)[:, None] ** -exponent[None, :]
        value = self.scale * (terms / exponent[None, :]).sum(axis=1)
        return float(value[0]) if u.ndim == 0 else value


@dataclass(frozen=True)
class QsdDistribution:
    """nu_lambda: density phi_lambda / mass_c on (0, inf).

    The CDF is tabulated on [0, u_max] and continued above u_max by the
    tail expansion, anchored so that it reaches 1 exactly.
    """

    a: float
    lam: float
    mass_c: float
    series: SpectralSeries
    grid: np.ndarray
    cdf_table: np.ndarray
    density_table: np.ndarray
    tail: Optional[TailExpansion]
    _cdf_spline: CubicHermiteSpline = field(repr=False)
    _quantile_spline: PchipInterpolator = field(repr=False)

    @property
    def u_max(self) -> float:
        return float(self.grid[-1])

    @property
    def tail_at_u_max(self) -> float:
        """Mass above u_max implied by the table and the exact normalization"""
        return float(1.0 - self.cdf_table[-1])

    def tail_bound(self) -> float:
        """Analytic mass above u_max from the tail expansion"""
        if self.tail is None:
            return math.exp(-self.a * self.u_max**2)
        return float(self.tail.integral(self.u_max)) / self.mass_c

    # -- evaluators

    def density(self, y: ArrayLike) -> ArrayLike:
        y = np.asarray(y, dtype=float)
        flat = np.atleast_1d(y)
        out = np.zeros(flat.shape)
        inner = (flat > 0) & ((flat <= self.u_max) | self.series.exact)
        outer = (flat > self.u_max) & ~self.series.exact
        out[inner] = self.series.phi(flat[inner]) / self.mass_c
        if outer.any() and self.tail is not None:
            out[outer] = self.tail.density(flat[outer]) / self.mass_c
        return float(out[0]) if y.ndim == 0 else out

    def tail_mass(self, y: ArrayLike) -> ArrayLike:
        """nu(y, inf) for y >= u_max"""
        y = np.asarray(y, dtype=float)
        if self.tail is None:
            return _finish(np.exp(-self.a * y**2))
        anchor = self.tail_at_u_max / self.tail.integral(self.u_max)
        return _finish(anchor * np.asarray(self.tail.integral(y)))

    def cdf(self, y: ArrayLike) -> ArrayLike:
        y = np.asarray(y, dtype=float)
        flat = np.atleast_1d(y)
        out = np.zeros(flat.shape)
        inner = (flat > 0) & (flat <= self.u_max)
        outer = flat > self.u_max
        out[inner] = self._cdf_spline(flat[inner])
        if outer.any():
            out[outer] = 1.0 - np.atleast_1d(self.tail_mass(flat[outer]))
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if y.ndim == 0 else out

    def quantile(self, p: ArrayLike) -> ArrayLike:
        p = np.asarray(p, dtype=float)
        flat = np.atleast_1d(p)
        if np.any(flat < 0) or np.any(flat >= 1):
            raise ValueError("probabilities must lie in [0, 1)")
        out = np.zeros(flat.shape)
        inner = flat <= self.cdf_table[-1]
        if inner.any():
            y = self._quantile_spline(flat[inner])
            dens = np.asarray(self.density(y))
            safe = np.where(dens > 0, dens, 1.0)
            step = np.where(dens > 0, (self._cdf_spline(y) - flat[inner]) / safe, 0.0)
            out[inner] = np.clip(y - step, 0.0, self.u_max)
        if (~inner).any():
            out[~inner] = self._tail_quantile(flat[~inner])
        return float(out[0]) if p.ndim == 0 else out

    def _tail_quantile(self, p: np.ndarray) -> np.ndarray:
        target = 1.0 - p
        if self.tail is None:
            return np.sqrt(-np.log(target) / self.a)
        v_min = math.log(self.u_max)
        log_anchor = math.log(self.tail_at_u_max) - float(self.tail.log_integral(v_min)[0][0])
        log_target = np.log(target)
        # leading-order power law, then Newton on ln(tail mass) against ln y,
        # which is linear up to the correction terms
        v = v_min + (math.log(self.tail_at_u_max) - log_target) / self.tail.r
        for _ in range(_TAIL_NEWTON_STEPS):
            log_mass, slope = self.tail.log_integral(v)
            v = np.maximum(v - (log_anchor + log_mass - log_target) / slope, v_min)
        return np.exp(v)

    def moment(self, gamma: float) -> float:
        """Integral of y^gamma against nu_lambda"""
        r = 2.0 if self.tail is None else self.tail.r
        if not 0.0 <= gamma < r:
            raise ValueError(f"moment of order {gamma} is infinite for this tail")
        nodes, weights = np.polynomial.legendre.leggauss(8)
        mid = 0.5 * (self.grid[1:] + self.grid[:-1])
        half = 0.5 * np.diff(self.grid)
        y = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        body = (half[:, None] * weights[None, :]).ravel() @ (y**gamma * np.asarray(self.density(y)))
        if self.tail is None:
            return float(body)
        return float(body + self.tail.integral(self.u_max, gamma) / self.mass_c)
