import math

import numpy as np
import pytest
from scipy import integrate, special

from ouqsd.core.exceptions import DomainError
from ouqsd.schemas.params import ParetoDensity, PointMassInit, QuadratureSpec
from ouqsd.services import oracle
from ouqsd.services.kernels import absorbed_density, brownian_survival, ou_survival
from ouqsd.services.simulate import decay_rate


class TestSurvival:
    def test_short_time(self, params, pareto):
        assert oracle.survival_oracle(params, pareto, 1e-3) == pytest.approx(1.0, abs=1e-8)

    def test_point_mass(self, params):
        value = oracle.survival_oracle(params, PointMassInit(x0=1.0), 1.0)
        assert value == pytest.approx(ou_survival(params, 1.0, 1.0), rel=1e-15)

    def test_curve_matches_single_times(self, params, pareto):
        times = [0.5, 1.0, 4.0]
        curve = oracle.survival_curve_oracle(params, pareto, times)
        for t, p in curve:
            assert p == pytest.approx(oracle.survival_oracle(params, pareto, t), abs=1e-9)

    def test_against_scipy(self, params, pareto):
        expected, _ = integrate.quad(
            lambda v: 0.5 * math.exp(-0.5 * v) * ou_survival(params, math.exp(v), 2.0),
            0.0,
            np.inf,
            epsabs=1e-12,
            limit=400,
        )
        assert oracle.survival_oracle(params, pareto, 2.0) == pytest.approx(expected, abs=1e-8)

    def test_decreasing_and_log_linear(self, params, pareto):
        times = np.arange(6.0, 11.0)
        curve = oracle.survival_curve_oracle(params, pareto, times)
        p = np.array([value for _, value in curve])
        assert np.all(np.diff(p) < 0)
        slopes = -np.diff(np.log(p))
        deviation = np.abs(slopes - 0.5)
        assert np.all(np.diff(deviation) < 1e-3)
        assert np.polyfit(times, -np.log(p), 1)[0] == pytest.approx(0.5, rel=0.05)

    def test_rejects_bad_times(self, params, pareto):
        with pytest.raises(DomainError):
            oracle.survival_curve_oracle(params, pareto, [0.0, 1.0])

    @pytest.mark.parametrize("eta", [0.03, 0.01])
    def test_very_heavy_tail(self, params, eta):
        def integrand(v):
            return eta * math.exp(-eta * v) * ou_survival(params, math.exp(v), 1.0)

        # survival is exactly 1 in double precision beyond x = e^60
        body, _ = integrate.quad(integrand, 0.0, 60.0, epsabs=1e-12, limit=400)
        expected = body + math.exp(-60.0 * eta)
        value = oracle.survival_oracle(params, ParetoDensity(eta=eta), 1.0)
        assert value == pytest.approx(expected, abs=1e-8)


class TestConditionalDensity:
    def test_vanishes_at_boundary(self, params, pareto):
        table = oracle.conditional_density_oracle(params, pareto, 2.0, [1e-6, 0.5])
        assert table.density[0] == pytest.approx(0.0, abs=1e-5)

    def test_mass(self, params, pareto):
        y = np.linspace(1e-3, 8.0, 4000)
        table = oracle.conditional_density_oracle(params, pareto, 4.0, y)
        assert table.mass() == pytest.approx(1.0, abs=1e-6)
        assert 0 < table.tail_mass < 1

    def test_point_mass_start(self, params):
        y = np.array([0.5, 1.0, 2.0])
        table = oracle.conditional_density_oracle(params, PointMassInit(x0=1.0), 1.0, y)
        expected = absorbed_density(params, 1.0, 1.0, y) / ou_survival(params, 1.0, 1.0)
        np.testing.assert_allclose(table.density, expected, rtol=1e-14)

    def test_approaches_qsd(self, params, pareto, nu_half):
        y = np.linspace(0.05, 4.0, 80)
        target = nu_half.density(y)
        distances = [
            oracle.conditional_density_oracle(params, pareto, t, y).sup_distance(target)
            for t in (4.0, 8.0, 10.0)
        ]
        assert distances[1] < distances[0]
        assert distances[2] < 0.01

    def test_very_heavy_tail(self, params):
        f = ParetoDensity(eta=0.01)
        table = oracle.conditional_density_oracle(params, f, 4.0, np.linspace(1e-3, 8.0, 400))
        assert np.all(np.isfinite(table.density))
        assert 0.0 < table.survival < 1.0
        assert table.tail_mass > 0.9

    def test_rejects_bad_grid(self, params, pareto):
        with pytest.raises(DomainError):
            oracle.conditional_density_oracle(params, pareto, 1.0, [1.0, 0.5])


class TestLogCorrectedStart:
    def test_conditioned_law_approaches_qsd(self, params, log_pareto, nu_half):
        y = np.linspace(0.05, 4.0, 80)
        distances = [
            oracle.conditional_density_oracle(params, log_pareto, t, y).sup_distance(
                nu_half.density(y)
            )
            for t in (4.0, 8.0, 12.0, 16.0)
        ]
        assert np.all(np.diff(distances) < 0)

    def test_decay_rate_moves_toward_target(self, params, log_pareto):
        times = np.arange(4.0, 17.0)
        curve = oracle.survival_curve_oracle(params, log_pareto, times)
        rates = [decay_rate(curve, (t, t + 4.0)) for t in (4.0, 8.0, 12.0)]
        gaps = np.abs(np.array(rates) - 0.5)
        assert np.all(np.diff(gaps) < 0)
        assert all(rate < 0.5 for rate in rates)


class TestConditionalMoment:
    @pytest.mark.parametrize("m,h", [(0.3, 0.4), (2.0, 0.5), (25.0, 0.5)])
    @pytest.mark.parametrize("gamma", [0.25, 0.5])
    def test_signed_moment(self, m, h, gamma):
        def p(z):
            return math.exp(-((z - m) ** 2) / (2 * h)) / math.sqrt(2 * math.pi * h)

        def integrand(y):
            return y**gamma * (p(y) - p(-y))

        upper = m + 40 * math.sqrt(h)
        expected, _ = integrate.quad(integrand, 0.0, upper, points=[m], epsabs=1e-13, limit=200)
        value = oracle.signed_moment(np.array([m]), h, gamma)[0]
        assert value == pytest.approx(expected, rel=1e-9)

    def test_signed_moment_low_orders(self):
        m = np.array([0.1, 1.0, 5.0, 30.0])
        np.testing.assert_allclose(oracle.signed_moment(m, 0.5, 0.0), special.erf(m), rtol=1e-12)
        np.testing.assert_allclose(oracle.signed_moment(m, 0.5, 1.0), m, rtol=1e-12)

    def test_tightness(self, params, pareto, nu_half):
        reference = nu_half.moment(0.25)
        for t in (2.0, 4.0, 8.0, 12.0):
            value = oracle.conditional_moment_oracle(params, pareto, t, 0.25)
            assert 0.5 * reference <= value <= 2.0 * reference

    def test_point_mass(self, params):
        value = oracle.conditional_moment_oracle(params, PointMassInit(x0=1.0), 1.0, 0.5)
        def integrand(y):
            return y**0.5 * absorbed_density(params, 1.0, 1.0, y)

        expected, _ = integrate.quad(integrand, 0, 20)
        assert value == pytest.approx(expected / ou_survival(params, 1.0, 1.0), rel=1e-8)

    def test_infinite_moment(self, params, pareto):
        with pytest.raises(DomainError):
            oracle.conditional_moment_oracle(params, pareto, 1.0, 0.5)


class TestEigenRelation:
    @pytest.mark.parametrize("lam", [0.3, 0.5, 1.0])
    @pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
    def test_gate(self, params, lam, s):
        spec = QuadratureSpec(abs_tol=1e-11)
        assert oracle.eigen_relation_residual(params, lam, s, [0.5, 1.0, 2.0], spec) <= 1e-6

    @pytest.mark.parametrize("lam", [0.3, 0.5])
    @pytest.mark.parametrize("s", [5.0, 6.0])
    def test_long_horizon(self, params, lam, s):
        spec = QuadratureSpec(abs_tol=1e-11)
        assert oracle.eigen_relation_residual(params, lam, s, [0.5, 2.0, 20.0], spec) <= 1e-6

    @pytest.mark.parametrize("lam,s", [(0.0, 1.0), (1.5, 1.0), (0.5, 0.0)])
    def test_rejects(self, params, lam, s):
        with pytest.raises(DomainError):
            oracle.eigen_relation_residual(params, lam, s, [1.0])


class TestBoundaryLayer:
    def test_vanishes(self, pareto):
        near = oracle.boundary_layer_ratio(pareto, 1e3, 1.0, 0.5)
        far = oracle.boundary_layer_ratio(pareto, 1e6, 1.0, 0.5)
        assert far < near
        assert far < 0.05

    def test_numerator_bound(self, pareto):
        u = 1e6
        numerator, denominator = oracle.boundary_layer_parts(pareto, u, 1.0, 0.5)
        assert 0 < numerator <= brownian_survival(math.log(u) / u, 0.5)
        assert denominator > 0

    def test_rejects_small_u(self, pareto):
        with pytest.raises(DomainError):
            oracle.boundary_layer_ratio(pareto, 2.0, 1.0, 0.5)


def test_integrator_is_exposed():
    result = oracle.integrate_adaptive(lambda x: x, 0.0, 2.0, QuadratureSpec())
    assert result.value == pytest.approx(2.0)
