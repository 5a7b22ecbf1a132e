import math

import numpy as np
import pytest
from scipy import integrate

from ouqsd.core.exceptions import DomainError
from ouqsd.schemas.params import OUParams
from ouqsd.services.kernels import (
    SINH_SWITCH,
    absorbed_density,
    brownian_survival,
    conditional_tail,
    ou_survival,
    time_change,
    transition_density,
)


class TestTimeChange:
    def test_origin(self, params):
        assert time_change(params, 0.0) == (0.0, 0.0)

    def test_unit_time(self, params):
        h, g = time_change(params, 1.0)
        assert h == pytest.approx(0.4323323583816936, rel=1e-12)
        assert g == pytest.approx(3.1945280494653248, rel=1e-12)

    def test_h_saturates(self, params):
        h, _ = time_change(params, 40.0)
        assert h == pytest.approx(0.5, rel=1e-15)

    def test_conjugation(self):
        params = OUParams(a=0.7)
        t = np.array([0.01, 0.5, 3.0, 10.0])
        h, g = time_change(params, t)
        np.testing.assert_allclose(h * np.exp(2 * 0.7 * t), g, rtol=1e-13)
        assert np.all(np.diff(h) > 0) and np.all(np.diff(g) > 0)

    @pytest.mark.parametrize("t", [-1.0, math.inf, math.nan])
    def test_rejects_bad_time(self, params, t):
        with pytest.raises(DomainError):
            time_change(params, t)


class TestTransitionDensity:
    def test_peak(self, params):
        assert transition_density(params, 1.0, 0.0, 0.0) == pytest.approx(0.60674, abs=1e-5)

    def test_symmetric_about_mean(self, params):
        x, y, t = 2.0, 0.3, 0.8
        mirrored = 2 * math.exp(-t) * x - y
        assert transition_density(params, t, x, y) == pytest.approx(
            transition_density(params, t, x, mirrored), rel=1e-14
        )

    def test_normalized(self, params):
        total, _ = integrate.quad(
            lambda y: transition_density(params, 1.0, 2.0, y), -np.inf, np.inf, epsabs=1e-12
        )
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_chapman_kolmogorov(self, params):
        def through(z):
            return transition_density(params, 0.5, 1.0, z) * transition_density(params, 0.5, z, 1.0)

        composed, _ = integrate.quad(
            through,
            -np.inf,
            np.inf,
            epsabs=1e-12,
        )
        assert composed == pytest.approx(transition_density(params, 1.0, 1.0, 1.0), abs=1e-6)

    def test_rejects_zero_time(self, params):
        with pytest.raises(DomainError):
            transition_density(params, 0.0, 1.0, 1.0)


class TestAbsorbedDensity:
    def test_vanishes_at_boundary(self, params):
        assert absorbed_density(params, 1.0, 1e-300, 1.0) == pytest.approx(0.0, abs=1e-290)
        assert absorbed_density(params, 1.0, 0.0, 1.0) == 0.0

    def test_reflection(self, params):
        expected = transition_density(params, 1.0, 1.0, 1.0) - transition_density(
            params, 1.0, 1.0, -1.0
        )
        assert absorbed_density(params, 1.0, 1.0, 1.0) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("factor", [0.5, 0.999, 1.001, 4.0, 40.0])
    def test_both_forms_agree_with_reflection(self, params, factor):
        t = 1.0
        h, _ = time_change(params, t)
        # observe at the mean so both terms are O(1)
        m = math.sqrt(factor * SINH_SWITCH * h)
        x, y = m * math.exp(t), m
        expected = transition_density(params, t, x, y) - transition_density(params, t, x, -y)
        assert absorbed_density(params, t, x, y) == pytest.approx(expected, rel=1e-12)

    def test_bounded_by_free_density(self, params, rng):
        t = rng.uniform(0.05, 5.0, 500)
        x = rng.uniform(0.0, 10.0, 500)
        y = rng.uniform(0.0, 10.0, 500)
        q = absorbed_density(params, t, x, y)
        p = transition_density(params, t, x, y)
        assert np.all(q >= 0.0)
        assert np.all(q <= p * (1 + 1e-12))

    @pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("x", [0.5, 1.0, 2.0])
    def test_integrates_to_survival(self, params, t, x):
        mass, _ = integrate.quad(
            lambda y: absorbed_density(params, t, x, y), 0.0, np.inf, epsabs=1e-12, epsrel=1e-12
        )
        assert mass == pytest.approx(ou_survival(params, x, t), abs=1e-8)

    def test_rejects_negative_points(self, params):
        with pytest.raises(DomainError):
            absorbed_density(params, 1.0, -1.0, 1.0)
        with pytest.raises(DomainError):
            absorbed_density(params, 1.0, 1.0, -1.0)


class TestSurvival:
    def test_brownian_values(self):
        assert brownian_survival(0.0, 1.0) == 0.0
        assert brownian_survival(1.0, 1.0) == pytest.approx(0.6826894921370859, rel=1e-14)

    @pytest.mark.parametrize("x", [0.1, 1.0, 5.0])
    @pytest.mark.parametrize("b,c", [(0.1, 0.2), (0.4, 0.5), (0.4, 5.0)])
    def test_ratio_bound(self, x, b, c):
        ratio = brownian_survival(x, b) / brownian_survival(x, c)
        assert 1.0 <= ratio <= (c / b) ** 1.5

    def test_ratio_bound_random(self, rng):
        x = np.exp(rng.uniform(-4.0, 2.0, 10_000))
        b, c = np.sort(np.exp(rng.uniform(-4.0, 2.0, (2, 10_000))), axis=0)
        ratio = brownian_survival(x, b) / brownian_survival(x, c)
        assert np.all(ratio >= 1.0 - 1e-12)
        assert np.all(ratio <= (c / b) ** 1.5 * (1 + 1e-12))

    def test_ou_values(self, params):
        assert ou_survival(params, 0.0, 1.0) == 0.0
        assert ou_survival(params, 1.0, 1.0) == pytest.approx(0.42422, abs=1e-5)

    def test_ou_near_start(self, params):
        assert ou_survival(params, 10.0, 0.01) == pytest.approx(1.0, abs=1e-12)

    def test_monotone(self, params):
        x = np.linspace(0.1, 5.0, 50)
        assert np.all(np.diff(ou_survival(params, x, 1.0)) > 0)
        t = np.linspace(0.1, 5.0, 50)
        assert np.all(np.diff(ou_survival(params, 1.0, t)) < 0)

    def test_conditional_tail_at_zero_is_survival(self, params):
        assert conditional_tail(params, 1.5, 0.7, 0.0) == pytest.approx(
            ou_survival(params, 1.5, 0.7), rel=1e-14
        )

    def test_conditional_tail_matches_density(self, params):
        def density(y):
            return absorbed_density(params, 1.0, 2.0, y)

        above, _ = integrate.quad(density, 0.8, np.inf, epsabs=1e-13)
        assert conditional_tail(params, 2.0, 1.0, 0.8) == pytest.approx(above, abs=1e-10)

    def test_rejects_zero_time(self):
        with pytest.raises(DomainError):
            brownian_survival(1.0, 0.0)
