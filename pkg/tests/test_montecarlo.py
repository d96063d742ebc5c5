import math

import numpy as np
import pytest
from scipy import stats

from stablemild.convolution import SemigroupParams
from stablemild.errors import OverflowBudgetError, ParameterError
from stablemild.levy import StableCharacteristics, stable_parameters
from stablemild.montecarlo import (
    FUNCTIONAL_SOLUTION,
    EnsembleConfig,
    EstimateReport,
    Scenario,
    clopper_pearson_upper,
    continuity_modulus,
    empirical_moment,
    empirical_tail,
    picard_rate_study,
    run_ensemble,
    scenario_bound_inputs,
)
from stablemild.noise import PathGrid
from stablemild.presets import build_coefficients, make_drift, make_gain, make_profile

SYMMETRIC = StableCharacteristics(alpha=1.5, c_plus=0.5, c_minus=0.5)


def make_scenario(drift=("zero", []), gain=("const", ["1"]), profile=("const", ["1"]), p=0.75, **kwargs) -> Scenario:
    coeffs = build_coefficients(make_drift(drift[0], drift[1], p), make_profile(*profile), make_gain(*gain))
    return Scenario(chars=SYMMETRIC, coeffs=coeffs, semigroup=SemigroupParams(a=1.0), **kwargs)


def make_config(scenario: Scenario, n_paths=40, n_steps=32, **kwargs) -> EnsembleConfig:
    grid = PathGrid(1.0, n_steps)
    return EnsembleConfig(n_paths=n_paths, grid=grid, master_seed=20240611, scenario=scenario, **kwargs)


class TestScenario:

    def test_fixed_initial_value(self):
        cfg = make_config(make_scenario(x0=0.7))
        assert cfg.scenario.initial_value(cfg.seed(3)) == 0.7
        assert cfg.scenario.initial_moment(0.5) == pytest.approx(math.sqrt(0.7))

    def test_spread_initial_value(self):
        cfg = make_config(make_scenario(x0=1.0, x0_spread=0.5))
        draws = [cfg.scenario.initial_value(cfg.seed(i)) for i in range(50)]
        assert all(0.5 <= x <= 1.5 for x in draws)
        assert draws[0] == cfg.scenario.initial_value(cfg.seed(0))
        assert len(set(draws)) == 50

    @pytest.mark.parametrize("x0, spread, p, expected", [(1.0, 0.5, 1.0, 1.0), (0.0, 1.0, 2.0, 1.0 / 3.0)])
    def test_initial_moment(self, x0, spread, p, expected):
        assert make_scenario(x0=x0, x0_spread=spread).initial_moment(p) == pytest.approx(expected)

    def test_unknown_route(self):
        with pytest.raises(ParameterError, match="route"):
            make_scenario(route="bridge")

    def test_negative_spread(self):
        with pytest.raises(ParameterError, match="spread"):
            make_scenario(x0_spread=-1.0)


class TestEnsemble:

    def test_needs_two_paths(self):
        with pytest.raises(ParameterError, match="at least 2"):
            make_config(make_scenario(), n_paths=1)

    @pytest.mark.parametrize("threads", [0, -1])
    def test_needs_a_thread(self, threads):
        with pytest.raises(ParameterError, match="threads"):
            make_config(make_scenario(), threads=threads)

    def test_thread_count_does_not_change_results(self):
        scenario = make_scenario(drift=("affine", ["-0.5", "0.1"]))
        single = run_ensemble(make_config(scenario, chunk_size=8))
        pooled = run_ensemble(make_config(scenario, chunk_size=8, threads=4))
        np.testing.assert_array_equal(single.values, pooled.values)
        np.testing.assert_array_equal(single.convolution, pooled.convolution)

    def test_chunking_does_not_change_results(self):
        scenario = make_scenario(drift=("affine", ["-0.5", "0.1"]), x0=0.2, x0_spread=0.1)
        small = run_ensemble(make_config(scenario, chunk_size=7))
        whole = run_ensemble(make_config(scenario, chunk_size=1024))
        np.testing.assert_allclose(small.values, whole.values, rtol=1e-14, atol=1e-300)
        np.testing.assert_array_equal(small.x0, whole.x0)

    def test_selected_nodes(self):
        ensemble = run_ensemble(make_config(make_scenario(x0=0.5)), nodes=[0, 32])
        assert ensemble.values.shape == (40, 2)
        np.testing.assert_array_equal(ensemble.times, [0.0, 1.0])
        np.testing.assert_array_equal(ensemble.values[:, 0], 0.5)
        np.testing.assert_array_equal(ensemble.convolution[:, 0], 0.0)
        assert ensemble.n_paths == 40
        assert ensemble.n_flagged == 0

    def test_nodes_outside_the_grid(self):
        with pytest.raises(ParameterError, match="outside"):
            run_ensemble(make_config(make_scenario()), nodes=[33])

    def test_overflow_budget(self):
        scenario = make_scenario(drift=("affine", ["1e40", "0"]), x0=1.0)
        with pytest.raises(OverflowBudgetError, match="overflowed"):
            run_ensemble(make_config(scenario, n_paths=10, n_steps=8))

        ensemble = run_ensemble(make_config(scenario, n_paths=10, n_steps=8, overflow_budget=1.0))
        assert ensemble.n_flagged == 10
        assert np.all(np.isinf(ensemble.values[:, -1]))


class TestClopperPearson:

    def test_no_exceedances(self):
        assert clopper_pearson_upper(0, 200) == pytest.approx(1.0 - 0.01 ** (1.0 / 200))

    def test_all_exceedances(self):
        assert clopper_pearson_upper(50, 50) == 1.0

    def test_covers_the_estimate(self):
        assert 0.3 < clopper_pearson_upper(30, 100) < 0.5


class TestEmpiricalTail:

    def test_silent_noise(self):
        cfg = make_config(make_scenario(gain=("const", ["0"])), n_paths=200)
        inputs = scenario_bound_inputs(cfg.scenario, cfg.grid, 0.75, 2.0 * cfg.grid.dt)
        report = empirical_tail(cfg, [inputs.eta_val, 2.0 * inputs.eta_val], inputs=inputs)
        assert report.estimate == (0.0, 0.0)
        assert report.ci_upper[0] == pytest.approx(clopper_pearson_upper(0, 200))
        assert report.n_effective == 200
        assert report.flagged_paths == 0
        assert report.quantity == "tail:convolution"

    def test_solution_functional(self):
        cfg = make_config(make_scenario(gain=("const", ["0"]), x0=5.0))
        inputs = scenario_bound_inputs(cfg.scenario, cfg.grid, 0.75, 2.0 * cfg.grid.dt)
        report = empirical_tail(cfg, [inputs.eta_val], FUNCTIONAL_SOLUTION, inputs)
        # |X(1)| = 5/e > eta on every path
        assert report.estimate == (1.0,)
        assert report.ci_upper == (1.0,)

    def test_matches_the_exact_stable_tail(self):
        # With zero drift and unit gain the discrete convolution at T is sum_j exp(-a(T - t_j)) dZ_j, a symmetric
        # stable variable whose scale follows from the weights
        cfg = make_config(make_scenario(), n_paths=4000, n_steps=16)
        dt = cfg.grid.dt
        weights = np.exp(-(1.0 - cfg.grid.times[:-1]))
        scale = stable_parameters(SYMMETRIC)[0] * (dt * np.sum(weights ** 1.5)) ** (1.0 / 1.5)

        levels = [1.0, 2.0, 4.0, 8.0]
        report = empirical_tail(cfg, levels)
        for x, estimate in zip(levels, report.estimate):
            exact = 2.0 * stats.levy_stable.sf(x, 1.5, 0.0, scale=scale)
            assert abs(estimate - exact) < 4.5 * math.sqrt(exact * (1.0 - exact) / 4000)

    def test_levels_below_the_threshold(self):
        cfg = make_config(make_scenario())
        with pytest.raises(ParameterError, match="threshold"):
            empirical_tail(cfg, [1e-6])

    def test_unknown_functional(self):
        with pytest.raises(ParameterError, match="functional"):
            empirical_tail(make_config(make_scenario()), [10.0], "maximum")


class TestEmpiricalMoment:

    def test_deterministic_decay(self):
        cfg = make_config(make_scenario(gain=("const", ["0"]), x0=1.0), n_paths=20)
        report = empirical_moment(cfg, 0.75, [0.25, 0.5, 1.0], n_resamples=50)
        expected = np.exp(-0.75 * np.array([0.25, 0.5, 1.0]))
        np.testing.assert_allclose(report.estimate, expected, rtol=1e-10)
        np.testing.assert_allclose(report.ci_upper, expected, rtol=1e-10)
        assert report.points == (0.25, 0.5, 1.0)
        assert report.all_passed

    def test_order_must_stay_below_alpha(self):
        with pytest.raises(ParameterError, match="alpha"):
            empirical_moment(make_config(make_scenario()), 1.5, [1.0])

    def test_report_layout(self):
        cfg = make_config(make_scenario(), n_paths=30)
        report = empirical_moment(cfg, 0.75, [0.5, 1.0], n_resamples=50)
        assert isinstance(report, EstimateReport)
        assert len(report.rows()) == 2
        assert all(ci >= est for est, ci in zip(report.estimate, report.ci_upper))
        document = report.to_dict()
        assert document["pass"] == list(report.passed)
        assert document["all_pass"] == report.all_passed


class TestContinuityModulus:

    def test_deterministic_decay(self):
        cfg = make_config(make_scenario(gain=("const", ["0"]), x0=1.0), n_paths=20, n_steps=64)
        report = continuity_modulus(cfg, 0.75, [0.5, 0.25, 0.125, 0.0], n_resamples=50)
        expected = [(-math.expm1(-h)) ** 0.75 for h in (0.5, 0.25, 0.125)] + [0.0]
        np.testing.assert_allclose(report.estimate, expected, rtol=1e-10)
        assert report.ci_upper[-1] == 0.0
        assert report.bound[-1] == 0.0
        assert report.verdicts == {"spearman_positive": True, "monotone_within_ci": True}
        assert report.statistics["spearman_rho"] == pytest.approx(1.0)

    def test_lag_below_resolution(self):
        cfg = make_config(make_scenario(), n_steps=64)
        with pytest.raises(ParameterError, match="resolution"):
            continuity_modulus(cfg, 0.75, [1.0 / 64.0])

    def test_negative_lag(self):
        with pytest.raises(ParameterError, match="non-negative"):
            continuity_modulus(make_config(make_scenario()), 0.75, [-0.25])


class TestPicardStudy:

    def test_paths_converge_to_the_solver(self):
        scenario = make_scenario(drift=("affine", ["-0.1", "0"]), gain=("tanh", ["0.5", "1"]), x0=1.0, p=0.5)
        cfg = make_config(scenario, n_paths=4)
        report = picard_rate_study(cfg, 0.5, 1e-12, 200)
        assert report.non_converged == []
        assert [path.index for path in report.paths] == [0, 1, 2, 3]
        assert all(path.fixed_point_gap < 1e-8 for path in report.paths)
        assert len(report.rows()) == sum(path.iterations for path in report.paths)
        assert report.to_dict()["non_converged"] == []

    def test_iteration_budget(self):
        scenario = make_scenario(drift=("affine", ["-0.1", "1"]), x0=1.0, p=0.5)
        report = picard_rate_study(make_config(scenario, n_paths=3), 0.5, 1e-12, 1)
        assert report.non_converged == [0, 1, 2]
        assert not report.all_passed
        assert all(len(path.history) == 1 for path in report.paths)
