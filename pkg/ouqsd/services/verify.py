"""Consistency checks behind ``ouqsd verify``."""

import math
from functools import partial
from typing import Callable, List

import numpy as np
from loguru import logger

from ouqsd.core.exceptions import OuqsdError
from ouqsd.schemas.config import SimConfig
from ouqsd.schemas.params import OUParams, ParetoDensity, PointMassInit, QuadratureSpec
from ouqsd.schemas.verify import CheckResult, VerifyReport
from ouqsd.services import eigen, heavytail, kernels, oracle, simulate

Check = Callable[[], CheckResult]

DECAY_BAND = (0.475, 0.525)


def _bounded(name: str, value: float, threshold: float, detail: str = "") -> CheckResult:
    return CheckResult(
        name=name, passed=bool(value <= threshold), value=value, threshold=threshold, detail=detail
    )


# ----------------------------------------------------------- fast suites


def check_closed_form_qsd() -> CheckResult:
    worst = 0.0
    y = np.linspace(0.0, 6.0, 601)
    for a in (0.5, 1.0, 2.0):
        dist = eigen.build_qsd(OUParams(a=a), a)
        exact = 2.0 * a * y * np.exp(-a * y**2)
        worst = max(worst, float(np.max(np.abs(dist.density(y) - exact))))
    return _bounded("closed_form_qsd", worst, 1e-8, "nu_a density against 2ay e^{-ay^2}")


def check_qsd_normalization() -> CheckResult:
    dist = eigen.build_qsd(OUParams(a=1.0), 0.5)
    defect = abs(dist.cdf_table[-1] + dist.tail_bound() - 1.0)
    return _bounded("qsd_normalization", defect, 1e-8, "table mass plus analytic tail")


def check_spectral_dichotomy() -> CheckResult:
    params = OUParams(a=1.0)
    worst = 0.0
    for lam in (0.25, 0.5, 1.0):
        zero = eigen.first_sign_change(eigen.spectral_coefficients(params, lam), 10.0)
        if zero is not None:
            return CheckResult(
                name="spectral_dichotomy",
                passed=False,
                detail=f"lambda={lam} changes sign at {zero}",
            )
    for lam in (1.2, 1.5, 2.5):
        zero = eigen.first_sign_change(eigen.spectral_coefficients(params, lam), 10.0)
        reference = eigen.ode_first_zero(params, lam, 10.0)
        if zero is None or reference is None:
            return CheckResult(
                name="spectral_dichotomy", passed=False, detail=f"lambda={lam} has no zero"
            )
        worst = max(worst, abs(zero - reference))
    return _bounded("spectral_dichotomy", worst, 1e-8, "series zeros against the ODE integrator")


def check_generator_residual() -> CheckResult:
    params = OUParams(a=1.0)
    u = np.array([0.5, 1.0, 2.0])
    worst = max(
        float(np.max(np.abs(eigen.generator_residual(eigen.spectral_coefficients(params, lam), u))))
        for lam in (0.3, 0.6, 1.0)
    )
    return _bounded("generator_residual", worst, 1e-5)


def check_eigen_relation(tol: float) -> CheckResult:
    params = OUParams(a=1.0)
    spec = QuadratureSpec(abs_tol=1e-11)
    worst = max(
        oracle.eigen_relation_residual(params, lam, s, [0.5, 1.0, 2.0], spec)
        for lam in (0.3, 0.5, 1.0)
        for s in (0.5, 1.0, 2.0)
    )
    return _bounded("eigen_relation", worst, tol)


def check_moment_ratio() -> CheckResult:
    f = ParetoDensity(eta=0.5)
    ratio = heavytail.truncated_moment_ratio(f, 1e8, 0.25)
    return _bounded("moment_ratio", abs(ratio - 2.0), 1e-3, f"ratio={ratio:.9g}")


def check_survival_ratio_bound(n: int = 10_000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    x = np.exp(rng.uniform(math.log(0.01), math.log(10.0), n))
    b, c = np.sort(np.exp(rng.uniform(math.log(0.01), math.log(10.0), (2, n))), axis=0)
    keep = b < c
    x, b, c = x[keep], b[keep], c[keep]
    ratio = np.asarray(kernels.brownian_survival(x, b)) / np.asarray(
        kernels.brownian_survival(x, c)
    )
    slack = 1e-12
    bad = (ratio < 1.0 - slack) | (ratio > (c / b) ** 1.5 * (1.0 + slack))
    return CheckResult(
        name="survival_ratio_bound",
        passed=not bool(bad.any()),
        value=float(bad.sum()),
        threshold=0.0,
        detail=f"{x.size} triples",
    )


def check_oracle_decay() -> CheckResult:
    params = OUParams(a=1.0)
    curve = oracle.survival_curve_oracle(params, ParetoDensity(eta=0.5), [6, 7, 8, 9, 10])
    rate = simulate.decay_rate(curve, (6.0, 10.0))
    lo, hi = DECAY_BAND
    return CheckResult(
        name="oracle_decay", passed=lo <= rate <= hi, value=rate, detail=f"band [{lo}, {hi}]"
    )


def check_oracle_convergence() -> CheckResult:
    params = OUParams(a=1.0)
    y = np.linspace(0.05, 4.0, 80)
    table = oracle.conditional_density_oracle(params, ParetoDensity(eta=0.5), 10.0, y)
    dist = eigen.build_qsd(params, 0.5)
    return _bounded("oracle_convergence", table.sup_distance(dist.density(y)), 0.01, "t=10")


def fast_checks(tol: float = 1e-6) -> List[Check]:
    return [
        check_closed_form_qsd,
        check_qsd_normalization,
        check_spectral_dichotomy,
        check_generator_residual,
        partial(check_eigen_relation, tol),
        check_moment_ratio,
        check_survival_ratio_bound,
        check_oracle_decay,
        check_oracle_convergence,
    ]


# ---------------------------------------------------- monte carlo suites


def check_exact_killing(n_paths: int, seed: int) -> CheckResult:
    params = OUParams(a=1.0)
    times = [0.5, 1.0, 2.0]
    ensemble = simulate.simulate_ensemble(
        SimConfig(
            params=params,
            init=PointMassInit(x0=1.0),
            checkpoints=times,
            n_paths=n_paths,
            seed=seed,
        )
    )
    worst = 0.0
    for i, t in enumerate(times):
        exact = float(kernels.ou_survival(params, 1.0, t))
        se = math.sqrt(exact * (1.0 - exact) / n_paths)
        worst = max(worst, abs(ensemble.survival_fraction(i) - exact) / se)
    return _bounded("exact_killing", worst, 3.0, "largest deviation in standard errors")


def check_monte_carlo_convergence(n_paths: int, seed: int) -> CheckResult:
    params = OUParams(a=1.0)
    times = [2.0, 4.0, 6.0, 8.0]
    ensemble = simulate.simulate_ensemble(
        SimConfig(
            params=params,
            init=ParetoDensity(eta=0.5),
            checkpoints=times,
            n_paths=n_paths,
            seed=seed,
        )
    )
    dist = eigen.build_qsd(params, 0.5)
    distances, noise = [], []
    for i in range(len(times)):
        ecdf = simulate.conditional_ecdf(ensemble, i)
        distances.append(simulate.ks_distance(ecdf, dist))
        noise.append(simulate.dkw_bound(ecdf.n))
    monotone = all(d1 <= d0 + 2.0 * n1 for d0, d1, n1 in zip(distances, distances[1:], noise[1:]))
    threshold = 0.02 + 2.0 * noise[-1]
    return CheckResult(
        name="monte_carlo_convergence",
        passed=monotone and distances[-1] <= threshold,
        value=distances[-1],
        threshold=threshold,
        detail="ks " + ", ".join(f"{d:.4f}" for d in distances),
    )


def check_monte_carlo_decay(n_paths: int, seed: int) -> CheckResult:
    params = OUParams(a=1.0)
    times = [6.0, 7.0, 8.0, 9.0, 10.0]
    ensemble = simulate.simulate_ensemble(
        SimConfig(
            params=params,
            init=ParetoDensity(eta=0.5),
            checkpoints=times,
            n_paths=n_paths,
            seed=seed,
        )
    )
    curve = ensemble.survival_curve()
    rate = simulate.decay_rate(curve, (6.0, 10.0))
    slack = 3.0 * simulate.decay_rate_stderr(curve, (6.0, 10.0), n_paths)
    lo, hi = DECAY_BAND[0] - slack, DECAY_BAND[1] + slack
    return CheckResult(
        name="monte_carlo_decay",
        passed=lo <= rate <= hi,
        value=rate,
        detail=f"band [{lo:.4f}, {hi:.4f}]",
    )


def monte_carlo_checks(n_paths: int, seed: int) -> List[Check]:
    return [
        partial(check_exact_killing, n_paths, seed),
        partial(check_monte_carlo_convergence, n_paths, seed),
        partial(check_monte_carlo_decay, n_paths, seed),
    ]


def run_checks(checks: List[Check]) -> VerifyReport:
    results = []
    for check in checks:
        try:
            result = check()
        except OuqsdError as e:
            name = getattr(check, "func", check).__name__.removeprefix("check_")
            result = CheckResult(name=name, passed=False, detail=f"{type(e).__name__}: {e}")
        line = f"{result.name} value={result.value} threshold={result.threshold} {result.detail}"
        if result.passed:
            logger.info(f"PASS {line}")
        else:
            logger.error(f"FAIL {line}")
        results.append(result)
    return VerifyReport(checks=results)
