import math

import numpy as np
import pytest

from ouqsd.core.config import settings
from ouqsd.core.exceptions import (
    ConfigurationError,
    DomainError,
    EmptyConditioningError,
    InsufficientDataError,
)
from ouqsd.models.ensemble import ECDF, SurvivalEnsemble
from ouqsd.schemas.config import SimConfig
from ouqsd.schemas.params import OUParams, ParetoDensity, PointMassInit
from ouqsd.services import simulate
from ouqsd.services.eigen import build_qsd
from ouqsd.services.kernels import ou_survival, time_change
from ouqsd.services.oracle import survival_curve_oracle, survival_oracle


def ensemble_of(*samples) -> SurvivalEnsemble:
    return SurvivalEnsemble(
        checkpoints=tuple(float(i + 1) for i in range(len(samples))),
        survivors=tuple(np.asarray(s, dtype=float) for s in samples),
        n_paths_total=10,
        seed=0,
    )


class TestGrid:
    def test_checkpoints_only(self, params, pareto):
        config = SimConfig(params=params, init=pareto, checkpoints=[1.0, 2.0], n_paths=1)
        grid, index = simulate.g_grid(config)
        np.testing.assert_allclose(grid, time_change(params, np.array([1.0, 2.0]))[1])
        np.testing.assert_array_equal(index, [0, 1])

    def test_refined(self, params, pareto):
        config = SimConfig(
            params=params, init=pareto, checkpoints=[0.5, 1.0], n_paths=1, dg_step=0.1
        )
        grid, index = simulate.g_grid(config)
        _, g = time_change(params, np.array([0.5, 1.0]))
        np.testing.assert_array_equal(grid[index], g)
        assert np.all(np.diff(grid) > 0)
        assert np.max(np.diff(grid)) <= 0.1 + 1e-12

    def test_overflowing_horizon(self, params, pareto):
        config = SimConfig(params=params, init=pareto, checkpoints=[400.0], n_paths=1)
        with pytest.raises(ConfigurationError):
            simulate.g_grid(config)

    def test_grid_too_fine(self, params, pareto):
        config = SimConfig(params=params, init=pareto, checkpoints=[10.0], n_paths=1, dg_step=1e-3)
        with pytest.raises(ConfigurationError):
            simulate.g_grid(config)


class TestSimulateEnsemble:
    def test_single_path_reproducible(self, params, pareto, single_worker):
        config = SimConfig(params=params, init=pareto, checkpoints=[1.0], n_paths=1, seed=42)
        first = simulate.simulate_ensemble(config)
        second = simulate.simulate_ensemble(config)
        assert first.survivor_count(0) == second.survivor_count(0) <= 1
        np.testing.assert_array_equal(first.survivors[0], second.survivors[0])

    def test_survivors_positive(self, params, pareto, single_worker):
        config = SimConfig(
            params=params, init=pareto, checkpoints=[0.5, 1.0, 3.0], n_paths=5000, seed=7
        )
        ensemble = simulate.simulate_ensemble(config)
        counts = [ensemble.survivor_count(i) for i in range(3)]
        assert counts[0] >= counts[1] >= counts[2]
        assert counts[0] <= 5000
        assert all(np.all(values > 0) for values in ensemble.survivors)

    def test_independent_of_worker_count(self, params, pareto, monkeypatch):
        config = SimConfig(
            params=params,
            init=pareto,
            checkpoints=[1.0, 2.0],
            n_paths=simulate.BLOCK_SIZE + 1000,
            seed=3,
        )
        monkeypatch.setattr(settings, "threads", 1)
        serial = simulate.simulate_ensemble(config)
        monkeypatch.setattr(settings, "threads", 2)
        parallel = simulate.simulate_ensemble(config)
        for a, b in zip(serial.survivors, parallel.survivors):
            np.testing.assert_array_equal(a, b)

    def test_seed_changes_output(self, params, pareto, single_worker):
        def make(seed):
            return SimConfig(params=params, init=pareto, checkpoints=[1.0], n_paths=2000, seed=seed)

        a = simulate.simulate_ensemble(make(1)).survivors[0]
        b = simulate.simulate_ensemble(make(2)).survivors[0]
        assert a.shape != b.shape or not np.array_equal(a, b)

    def test_exact_killing_point_mass(self, params, single_worker):
        times = [0.5, 1.0, 2.0]
        n = 200_000
        config = SimConfig(
            params=params, init=PointMassInit(x0=1.0), checkpoints=times, n_paths=n, seed=11
        )
        ensemble = simulate.simulate_ensemble(config)
        for i, t in enumerate(times):
            p = ou_survival(params, 1.0, t)
            assert abs(ensemble.survival_fraction(i) - p) <= 4 * math.sqrt(p * (1 - p) / n)

    @pytest.mark.parametrize("family", ["pareto", "log_pareto"])
    def test_heavy_tail_survival_matches_oracle(self, params, family, request, single_worker):
        start = request.getfixturevalue(family)
        n = 200_000
        config = SimConfig(params=params, init=start, checkpoints=[1.0], n_paths=n, seed=5)
        ensemble = simulate.simulate_ensemble(config)
        p = survival_oracle(params, start, 1.0)
        assert abs(ensemble.survival_fraction(0) - p) <= 4 * math.sqrt(p * (1 - p) / n)

    @pytest.mark.slow
    def test_exact_killing_step_independent(self, params):
        times = [0.5, 1.0, 2.0]
        n = 1_000_000
        coarse = SimConfig(
            params=params,
            init=PointMassInit(x0=1.0),
            checkpoints=times,
            n_paths=n,
            seed=42,
            dg_step=0.2,
        )
        fine = coarse.model_copy(update={"dg_step": 0.1, "seed": 43})
        first = simulate.simulate_ensemble(coarse)
        second = simulate.simulate_ensemble(fine)
        for i, t in enumerate(times):
            p = ou_survival(params, 1.0, t)
            se = math.sqrt(p * (1 - p) / n)
            assert abs(first.survival_fraction(i) - p) <= 3 * se
            assert abs(second.survival_fraction(i) - p) <= 3 * se
            gap = abs(first.survival_fraction(i) - second.survival_fraction(i))
            assert gap <= 3 * math.sqrt(2) * se

    @pytest.mark.slow
    @pytest.mark.parametrize("a,eta", [(1.0, 0.5), (2.0, 0.3)])
    def test_conditioned_law_approaches_qsd(self, a, eta):
        params = OUParams(a=a)
        times = [2.0, 4.0, 6.0, 8.0]
        config = SimConfig(
            params=params,
            init=ParetoDensity(eta=eta),
            checkpoints=times,
            n_paths=1_000_000,
            seed=42,
        )
        ensemble = simulate.simulate_ensemble(config)
        dist = build_qsd(params, a * eta)
        distances, noise = [], []
        for i in range(len(times)):
            ecdf = simulate.conditional_ecdf(ensemble, i)
            distances.append(simulate.ks_distance(ecdf, dist))
            noise.append(simulate.dkw_bound(ecdf.n))
        for d0, d1, n1 in zip(distances, distances[1:], noise[1:]):
            assert d1 <= d0 + 2 * n1
        assert distances[-1] <= 0.02 + 2 * noise[-1]

    @pytest.mark.slow
    def test_monte_carlo_decay_rate(self, params, pareto):
        times = [6.0, 7.0, 8.0, 9.0, 10.0]
        n = 1_000_000
        config = SimConfig(params=params, init=pareto, checkpoints=times, n_paths=n, seed=42)
        curve = simulate.simulate_ensemble(config).survival_curve()
        rate = simulate.decay_rate(curve, (6.0, 10.0))
        slack = 3 * simulate.decay_rate_stderr(curve, (6.0, 10.0), n)
        assert 0.475 - slack <= rate <= 0.525 + slack


class TestConditioning:
    def test_single_survivor(self):
        ecdf = simulate.conditional_ecdf(ensemble_of([2.5]), 0)
        assert ecdf(2.4) == 0.0
        assert ecdf(2.5) == 1.0

    def test_counting(self):
        ecdf = simulate.conditional_ecdf(ensemble_of([3.0, 1.0, 2.0]), 0)
        assert ecdf(2.0) == pytest.approx(2 / 3)
        np.testing.assert_allclose(ecdf(np.array([0.5, 1.0, 3.5])), [0.0, 1 / 3, 1.0])

    def test_empty(self):
        with pytest.raises(EmptyConditioningError):
            simulate.conditional_ecdf(ensemble_of([]), 0)
        with pytest.raises(EmptyConditioningError):
            simulate.conditional_moment(ensemble_of([]), 0, 0.5)

    def test_moments(self):
        assert simulate.conditional_moment(ensemble_of([1.0, 1.0, 1.0]), 0, 0.5) == 1.0
        assert simulate.conditional_moment(ensemble_of([1.0, 4.0]), 0, 0.5) == 1.5

    @pytest.mark.parametrize("gamma", [0.0, 1.5])
    def test_moment_order(self, gamma):
        with pytest.raises(DomainError):
            simulate.conditional_moment(ensemble_of([1.0]), 0, gamma)

    def test_ensemble_accessors(self):
        ensemble = ensemble_of([1.0, 2.0, 3.0, 4.0], [1.0])
        assert ensemble.survival_fraction(0) == 0.4
        assert ensemble.standard_error(1) == pytest.approx(math.sqrt(0.1 * 0.9 / 10))
        assert ensemble.survival_curve() == [(1.0, 0.4), (2.0, 0.1)]


class TestDecayRate:
    def test_exact_exponential(self):
        curve = [(t, math.exp(-0.5 * t)) for t in range(5, 11)]
        assert simulate.decay_rate(curve, (5.0, 10.0)) == pytest.approx(0.5, rel=1e-12)

    def test_window_selects_points(self):
        curve = [(1.0, 0.9), (2.0, math.exp(-0.6)), (3.0, math.exp(-0.9)), (4.0, 0.0)]
        assert simulate.decay_rate(curve, (2.0, 4.0)) == pytest.approx(0.3, rel=1e-12)

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError):
            simulate.decay_rate([(1.0, 0.5), (2.0, 0.0)], (0.0, 5.0))

    def test_oracle_curve(self, params, pareto):
        curve = survival_curve_oracle(params, pareto, [6, 7, 8, 9, 10])
        assert simulate.decay_rate(curve, (6.0, 10.0)) == pytest.approx(0.5, rel=0.05)

    def test_stderr_two_points(self):
        n = 10_000
        curve = [(1.0, 0.5), (3.0, 0.2)]
        expected = math.sqrt((1 / 0.2 - 1 / 0.5) / n) / 2.0
        stderr = simulate.decay_rate_stderr(curve, (0.0, 5.0), n)
        assert stderr == pytest.approx(expected, rel=1e-12)


class TestDistances:
    def test_sampled_qsd(self, nu_half, rng):
        ecdf = ECDF.from_sample(nu_half.quantile(rng.random(1_000_000)))
        assert simulate.ks_distance(ecdf, nu_half) < 0.002

    def test_point_mass_at_median(self, nu_half):
        ecdf = ECDF.from_sample(np.array([nu_half.quantile(0.5)]))
        assert simulate.ks_distance(ecdf, nu_half) == pytest.approx(0.5, abs=1e-6)

    def test_dkw(self):
        assert simulate.dkw_bound(10**6, 0.05) == pytest.approx(math.sqrt(math.log(40) / 2e6))
        with pytest.raises(DomainError):
            simulate.dkw_bound(0)
