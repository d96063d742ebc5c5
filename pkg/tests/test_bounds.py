import math

import numpy as np
import pytest
from scipy import integrate

from stablemild.bounds import (
    CONJUGATE_LITERAL,
    GAMMA_TARGET,
    BoundInputs,
    bound_report,
    check_strong_condition,
    choose_gamma,
    conjugate_exponent,
    continuity_bound,
    contraction_constant,
    expanded_k_nu,
    critical_amplitude,
    default_x_levels,
    gronwall_bound,
    holder_exponent,
    k_nu,
    metric_dp_ensemble,
    moment_bound,
    norm_gamma,
    tail_bound,
)
from stablemild.convolution import SolutionPath, eta, metric_dp
from stablemild.errors import BoundsError, GammaSearchError, ParameterError
from stablemild.levy import StableCharacteristics, compute_tail_bounds
from stablemild.noise import PathGrid


def make_inputs(**overrides) -> BoundInputs:
    values = dict(
        a=1.0,
        b=0.0,
        phi_inf=1.0,
        T=1.0,
        h=0.1,
        beta=1.0,
        p=0.5,
        C1=1.0,
        C2=1.0,
        L_F=0.0,
        C=0.0,
        eta_val=0.6575,
        eta_window_val=0.3,
    )
    values.update(overrides)
    return BoundInputs(**values)


def zero(t):
    return np.zeros(np.shape(t))


def one(t):
    return np.ones(np.shape(t))


class TestInputs:

    @pytest.mark.parametrize("field", ["C1", "phi_inf", "eta_val", "L_F"])
    def test_rejects_negative(self, field):
        with pytest.raises(ParameterError, match=field):
            make_inputs(**{field: -1.0})

    @pytest.mark.parametrize("field", ["a", "T", "h", "beta", "p"])
    def test_rejects_non_positive(self, field):
        with pytest.raises(ParameterError, match="positive"):
            make_inputs(**{field: 0.0})

    def test_rejects_unknown_conjugate_mode(self):
        with pytest.raises(ParameterError, match="conjugate"):
            make_inputs(conjugate="dual")

    def test_admissible(self):
        assert make_inputs(p=0.5, beta=1.5).admissible
        assert not make_inputs(p=1.5, beta=1.5).admissible


class TestExponents:

    def test_conjugate(self):
        assert conjugate_exponent(2.0) == 2.0
        assert conjugate_exponent(4.0) == pytest.approx(4.0 / 3.0)
        assert conjugate_exponent(0.5) == 1.0
        assert conjugate_exponent(0.5, CONJUGATE_LITERAL) == -1.0
        assert conjugate_exponent(1.0, CONJUGATE_LITERAL) == math.inf

    def test_holder(self):
        assert holder_exponent(0.5) == 0.5
        assert holder_exponent(0.5, CONJUGATE_LITERAL) == -0.5
        assert holder_exponent(2.0) == 1.0

    def test_holder_rejects_non_positive_order(self):
        with pytest.raises(ParameterError):
            holder_exponent(0.0)


class TestKNu:

    def test_reference_value(self):
        assert k_nu(make_inputs(), 1.0) == pytest.approx(13.0)

    def test_zero_gain_keeps_only_the_horizon_term(self):
        assert k_nu(make_inputs(phi_inf=0.0, C1=0.7), 2.0) == pytest.approx(1.4)

    def test_horizon_gap(self):
        inputs = make_inputs(C1=0.8, C2=1.7, b=0.3, T=2.5, h=0.05)
        assert k_nu(inputs, inputs.T) - k_nu(inputs, inputs.h) == pytest.approx(2.45 * 0.8, rel=1e-12)

    @pytest.mark.parametrize(
        "alpha, c_plus, c_minus, b", [(1.0, 0.5, 0.5, 0.0), (1.5, 0.7, 0.2, 0.2), (0.6, 0.1, 0.4, 0.2)]
    )
    def test_matches_the_stable_closed_form(self, alpha, c_plus, c_minus, b):
        chars = StableCharacteristics(alpha=alpha, c_plus=c_plus, c_minus=c_minus, b=b)
        tails = compute_tail_bounds(chars)
        inputs = make_inputs(a=1.3, b=chars.b, phi_inf=0.8, T=2.0, C1=tails.C1, C2=tails.C2, beta=tails.beta, p=0.3)
        assert k_nu(inputs, 2.0) == pytest.approx(expanded_k_nu(chars, 1.3, 0.8, 2.0), rel=1e-12)


class TestTailBound:

    def test_reference_value(self):
        assert tail_bound(make_inputs(), 10.0) == pytest.approx(0.06575 * 13.0)
        assert tail_bound(make_inputs(), 10.0) == pytest.approx(0.8548, abs=1e-4)

    def test_threshold(self):
        assert tail_bound(make_inputs(), 0.6575) == 1.0
        assert tail_bound(make_inputs(phi_inf=0.0, C1=0.5), 0.6575) == pytest.approx(0.5)

    def test_trivial_below_threshold(self):
        assert tail_bound(make_inputs(phi_inf=0.0, C1=0.1), 0.5) == 1.0

    def test_power_decay(self):
        inputs = make_inputs(beta=1.5)
        ratio = tail_bound(inputs, 2000.0) / tail_bound(inputs, 1000.0)
        assert ratio == pytest.approx(2.0 ** -1.5)

    def test_monotone(self):
        levels = np.geomspace(1.0, 1e4, 30)
        values = [tail_bound(make_inputs(), float(x)) for x in levels]
        assert all(u >= v for u, v in zip(values, values[1:]))
        assert tail_bound(make_inputs(C2=2.0), 100.0) >= tail_bound(make_inputs(), 100.0)
        assert tail_bound(make_inputs(T=3.0), 100.0) >= tail_bound(make_inputs(), 100.0)


class TestMomentBound:

    def test_reference_value(self):
        inputs = make_inputs(eta_val=0.0, x0_moment=1.0, p=0.5, beta=1.5, C=1.0)
        assert moment_bound(inputs) == pytest.approx(math.sqrt(3.0) * math.exp(math.sqrt(3.0)), rel=1e-12)

    def test_zero_data_and_noise(self):
        assert moment_bound(make_inputs(eta_val=0.0, x0_moment=0.0, C=2.0)) == 0.0

    def test_pole_at_beta(self):
        values = [moment_bound(make_inputs(p=p, beta=1.0)) for p in (0.9, 0.99, 0.999)]
        assert values[0] < values[1] < values[2]

    def test_rejects_p_at_beta(self):
        with pytest.raises(ParameterError, match="p < beta"):
            moment_bound(make_inputs(p=1.0, beta=1.0))


class TestGronwall:

    def test_trivial_cases(self):
        assert gronwall_bound(2.0, 1.0, 0.0, 0.5) == pytest.approx(2.0 * math.exp(0.5))
        assert gronwall_bound(2.0, 1.0, 3.0, 0.0) == 2.0

    def test_dominates_the_integral_equation(self):
        # psi = K1 e^(at) + K2 * integral of psi, solved as psi' = a K1 e^(at) + K2 psi
        K1, a_rate, K2 = 2.0, 1.0, 0.5
        times = np.linspace(0.0, 3.0, 31)
        solution = integrate.solve_ivp(
            lambda t, y: a_rate * K1 * np.exp(a_rate * t) + K2 * y,
            (0.0, 3.0),
            [K1],
            t_eval=times,
            rtol=1e-10,
            atol=1e-12,
        )
        bounds = np.array([gronwall_bound(K1, a_rate, K2, float(t)) for t in times])
        assert np.all(solution.y[0] <= bounds * (1.0 + 1e-8))

    def test_rejects_negative_constants(self):
        with pytest.raises(ParameterError, match="Gronwall"):
            gronwall_bound(-1.0, 1.0, 1.0, 1.0)


class TestContraction:

    def test_noise_free(self):
        inputs = make_inputs(p=2.0, beta=2.5, L_F=0.5, g=zero)
        assert contraction_constant(inputs, 1.0) == pytest.approx(0.5, rel=1e-12)

    def test_unit_order(self):
        inputs = make_inputs(p=1.0, beta=1.5, L_F=0.3, g=zero)
        assert contraction_constant(inputs, 5.0) == pytest.approx(0.3)

    def test_decreasing_in_gamma(self):
        inputs = make_inputs(p=2.0, beta=2.5, L_F=0.5, g=one)
        values = [contraction_constant(inputs, gamma) for gamma in (1.0, 2.0, 4.0, 8.0, 16.0)]
        assert all(u > v for u, v in zip(values, values[1:]))

    def test_needs_p_at_least_one(self):
        with pytest.raises(ParameterError, match="p >= 1"):
            contraction_constant(make_inputs(p=0.5, g=one))

    def test_needs_the_profile(self):
        with pytest.raises(BoundsError, match="profile"):
            contraction_constant(make_inputs(p=2.0, beta=2.5))


class TestChooseGamma:

    def test_search_postcondition(self):
        inputs = make_inputs(p=2.0, beta=2.5, L_F=0.5, g=one)
        gamma = choose_gamma(inputs)
        assert contraction_constant(inputs, gamma) <= GAMMA_TARGET
        assert gamma <= 1.0 or contraction_constant(inputs, gamma / 2.0) > GAMMA_TARGET

    def test_already_contracting(self):
        assert choose_gamma(make_inputs(p=2.0, beta=2.5, L_F=0.1, g=zero)) == 1.0

    def test_no_gamma_works(self):
        with pytest.raises(GammaSearchError):
            choose_gamma(make_inputs(p=1.0, beta=1.5, L_F=1.0, g=zero))


class TestStrongCondition:

    def test_noise_and_drift_free(self):
        assert check_strong_condition(make_inputs(eta_val=0.0)) == (True, 0.0)

    def test_drift_homogeneity(self):
        _, single = check_strong_condition(make_inputs(eta_val=0.0, L_F=0.1, p=0.5))
        _, double = check_strong_condition(make_inputs(eta_val=0.0, L_F=0.2, p=0.5))
        assert double == pytest.approx(2.0 ** 0.5 * single)

    def test_reference_inputs_fail(self):
        holds, lhs = check_strong_condition(make_inputs(beta=1.5))
        assert not holds
        assert lhs > 1.0

    def test_rejects_large_p(self):
        with pytest.raises(ParameterError, match="p in"):
            check_strong_condition(make_inputs(p=1.5, beta=1.8))

    def test_critical_amplitude(self):
        unit = eta(1.0, 1.0, np.sin)
        common = dict(beta=1.5, L_F=0.01, phi_inf=0.5, C1=0.5, C2=0.5)
        amplitude = critical_amplitude(make_inputs(**common), unit)

        _, lhs = check_strong_condition(make_inputs(eta_val=amplitude * unit, **common))
        assert lhs == pytest.approx(1.0, rel=1e-9)
        assert check_strong_condition(make_inputs(eta_val=0.9 * amplitude * unit, **common))[0]

    def test_lhs_is_continuous_in_the_amplitude(self):
        unit = eta(1.0, 1.0, np.sin)
        amplitudes = np.linspace(0.5, 2.0, 201)
        lhs = np.array([check_strong_condition(make_inputs(beta=1.5, eta_val=c * unit))[1] for c in amplitudes])
        assert np.all(np.diff(lhs) >= 0.0)
        assert np.max(np.diff(lhs)) < 0.1

    def test_no_feasible_amplitude(self):
        with pytest.raises(BoundsError, match="drift term"):
            critical_amplitude(make_inputs(beta=1.5, L_F=1.0), 0.5)

    def test_zero_unit_eta(self):
        with pytest.raises(BoundsError):
            critical_amplitude(make_inputs(beta=1.5), 0.0)


class TestContinuityBound:

    def test_zero_lag(self):
        assert continuity_bound(make_inputs(), 0.0, 1.0) == 0.0

    def test_lag_must_match_the_window(self):
        with pytest.raises(BoundsError, match="eta_window"):
            continuity_bound(make_inputs(h=0.1), 0.2, 1.0)

    def test_negative_lag(self):
        with pytest.raises(ParameterError):
            continuity_bound(make_inputs(), -0.1, 1.0)

    def test_monotone_in_the_moment(self):
        inputs = make_inputs(beta=1.5, C=0.5, x0_moment=1.0)
        assert continuity_bound(inputs, 0.1, 1.0) < continuity_bound(inputs, 0.1, 2.0)

    def test_noise_term_only(self):
        # eta_val = 0 leaves the windowed noise term alone
        inputs = make_inputs(beta=1.5, eta_val=0.0, eta_window_val=0.3, phi_inf=0.0, C1=1.0)
        p = 0.5
        expected = 3.0 ** p * 2.0 ** p * math.exp(-0.1 * p) * 0.3 ** p * (1.0 + 0.1 * p / (1.5 - p))
        assert continuity_bound(inputs, 0.1, 0.0) == pytest.approx(expected, rel=1e-12)


def path(grid: PathGrid, values) -> SolutionPath:
    values = np.asarray(values, dtype=np.float64)
    return SolutionPath(grid=grid, values=values, x0=float(values[0]))


class TestMetrics:

    def test_identical_paths(self):
        grid = PathGrid(1.0, 10)
        X = path(grid, np.sin(grid.times))
        assert metric_dp(X, X, 0.5) == 0.0

    def test_unit_gap(self):
        grid = PathGrid(2.0, 20)
        X = path(grid, np.ones(21))
        Y = path(grid, np.zeros(21))
        assert metric_dp(X, Y, 0.5) == pytest.approx(2.0)

    def test_triangle_inequality(self):
        grid = PathGrid(1.0, 50)
        stream = np.random.Generator(np.random.PCG64(17))
        for _ in range(20):
            X, Y, W = (path(grid, np.concatenate(([0.0], stream.standard_cauchy(50)))) for _ in range(3))
            assert metric_dp(X, Y, 0.5) <= metric_dp(X, W, 0.5) + metric_dp(W, Y, 0.5) + 1e-12

    def test_grid_mismatch(self):
        with pytest.raises(BoundsError, match="different grids"):
            metric_dp(path(PathGrid(1.0, 2), [0.0, 0.0, 0.0]), path(PathGrid(2.0, 2), [0.0, 0.0, 0.0]), 1.0)

    def test_ensemble_average(self):
        grid = PathGrid(1.0, 10)
        X = np.full((4, 11), 2.0)
        Y = np.zeros((4, 11))
        Y[1] = 4.0
        assert metric_dp_ensemble(X, Y, grid, 1.0) == pytest.approx(2.0)

    def test_ensemble_shape(self):
        with pytest.raises(BoundsError):
            metric_dp_ensemble(np.zeros((2, 11)), np.zeros((3, 11)), PathGrid(1.0, 10), 1.0)


class TestNormGamma:

    def test_decaying_path(self):
        grid = PathGrid(1.0, 100)
        assert norm_gamma(np.exp(-2.0 * grid.times), grid, 1.5, 0.0) == pytest.approx(1.0)

    def test_homogeneity(self):
        grid = PathGrid(1.0, 20)
        stream = np.random.Generator(np.random.PCG64(4))
        X = stream.normal(size=(50, 21))
        assert norm_gamma(-3.0 * X, grid, 2.0, 1.0) == pytest.approx(3.0 * norm_gamma(X, grid, 2.0, 1.0))

    def test_weight(self):
        grid = PathGrid(1.0, 10)
        assert norm_gamma(np.ones(11), grid, 1.0, 2.0) == pytest.approx(1.0)
        assert norm_gamma(np.exp(3.0 * grid.times), grid, 1.0, 1.0) == pytest.approx(math.exp(2.0))

    def test_empty(self):
        with pytest.raises(BoundsError, match="empty"):
            norm_gamma(np.zeros((0, 11)), PathGrid(1.0, 10), 1.0, 1.0)

    def test_needs_p_at_least_one(self):
        with pytest.raises(ParameterError):
            norm_gamma(np.ones(11), PathGrid(1.0, 10), 0.5, 1.0)


class TestReport:

    def test_default_levels(self):
        levels = default_x_levels(0.5)
        assert len(levels) == 12
        assert levels[0] == pytest.approx(0.5)
        assert levels[-1] == pytest.approx(25.0)

    def test_default_levels_need_positive_eta(self):
        with pytest.raises(BoundsError):
            default_x_levels(0.0)

    def test_low_order_report(self):
        report = bound_report(make_inputs(beta=1.5), [1.0, 10.0])
        assert report["K_nu_T"] == pytest.approx(13.0)
        assert report["K_nu_h"] == pytest.approx(12.1)
        assert [row["x"] for row in report["tail_bound"]] == [1.0, 10.0]
        assert report["strong_condition"] is False
        assert report["contraction_constant"] == report["strong_condition_lhs"]
        assert report["gamma"] is None

    def test_high_order_report(self):
        report = bound_report(make_inputs(p=2.0, beta=2.5, L_F=0.5, g=one), [1.0])
        assert report["strong_condition"] is None
        assert report["gamma"] > 0.0
        assert report["contraction_constant"] <= GAMMA_TARGET
