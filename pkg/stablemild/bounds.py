"""
Closed-form constants and bounds for the stochastic convolution and the mild solution: K_nu, the tail and moment
bounds, the continuity modulus bound, both contraction constants and the metrics of the fixed-point argument.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import integrate, optimize

from stablemild.convolution import DEFAULT_ETA_NODES, TimeFunc, eta
from stablemild.errors import BoundsError, GammaSearchError, ParameterError
from stablemild.levy import StableCharacteristics
from stablemild.noise import PathGrid

_LOG = logging.getLogger(__name__)

CONJUGATE_UNIT = "unit"
CONJUGATE_LITERAL = "literal"
CONJUGATE_MODES = (CONJUGATE_UNIT, CONJUGATE_LITERAL)

GAMMA_TARGET = 0.99
GAMMA_LIMIT = 2.0 ** 64
GAMMA_RTOL = 1e-6

AUTO_X_POINTS = 12
AUTO_X_RATIO = 50.0


@dataclass(frozen=True)
class BoundInputs:
    """
    Every scalar the closed-form bounds consume. g is only needed for the gamma-weighted contraction constant,
    which recomputes eta with decay a + gamma; x0_moment is E|x0|^p.
    """

    a: float
    b: float
    phi_inf: float
    T: float
    h: float
    beta: float
    p: float
    C1: float
    C2: float
    L_F: float
    C: float
    eta_val: float
    eta_window_val: float
    x0_moment: float = 0.0
    gamma: float = 1.0
    conjugate: str = CONJUGATE_UNIT
    g: Optional[TimeFunc] = None

    def __post_init__(self) -> None:
        scalars = {
            name: getattr(self, name)
            for name in ("a", "b", "phi_inf", "T", "h", "beta", "p", "C1", "C2", "L_F", "C", "eta_val",
                         "eta_window_val", "x0_moment", "gamma")
        }
        for name, value in scalars.items():
            if not math.isfinite(value):
                raise ParameterError("Bound input {} must be finite, got {!r}".format(name, value))

        for name in ("a", "T", "h", "beta", "p", "gamma"):
            if not scalars[name] > 0.0:
                raise ParameterError("Bound input {} must be positive, got {!r}".format(name, scalars[name]))

        for name in ("phi_inf", "C1", "C2", "L_F", "C", "eta_val", "eta_window_val", "x0_moment"):
            if scalars[name] < 0.0:
                raise ParameterError("Bound input {} must be non-negative, got {!r}".format(name, scalars[name]))

        if self.conjugate not in CONJUGATE_MODES:
            raise ParameterError(
                "Unknown conjugate-exponent mode {!r}; expected one of {}".format(
                    self.conjugate, ", ".join(CONJUGATE_MODES)
                )
            )

    @property
    def admissible(self) -> bool:
        return 0.0 < self.p < self.beta < 2.0

    @property
    def q(self) -> float:
        return conjugate_exponent(self.p, self.conjugate)


def conjugate_exponent(p: float, mode: str = CONJUGATE_UNIT) -> float:
    """q = p/(p - 1) for p > 1. For p <= 1 the unit reading takes q = 1; the literal one keeps p/(p - 1)."""
    if p > 1.0:
        return p / (p - 1.0)

    if mode == CONJUGATE_UNIT:
        return 1.0

    return math.inf if p == 1.0 else p / (p - 1.0)


def holder_exponent(p: float, mode: str = CONJUGATE_UNIT) -> float:
    """The exponent p/q carried by every (1/a)^(p/q) factor."""
    if not p > 0.0:
        raise ParameterError("Moment order p must be positive, got {!r}".format(p))

    if mode not in CONJUGATE_MODES:
        raise ParameterError("Unknown conjugate-exponent mode {!r}".format(mode))

    if p > 1.0 or mode == CONJUGATE_LITERAL:
        return p - 1.0

    return p


def _noise_factor(inputs: BoundInputs, k_value: float) -> float:
    # 1 + K_nu p/(beta - p)
    if not inputs.p < inputs.beta:
        raise ParameterError("The bound needs p < beta, got p={!r}, beta={!r}".format(inputs.p, inputs.beta))

    return 1.0 + k_value * inputs.p / (inputs.beta - inputs.p)


def k_nu(inputs: BoundInputs, horizon: float) -> float:
    aggregate = 8.0 * inputs.b ** 2 / inputs.a + 8.0 * inputs.C1 * inputs.C2 / inputs.a + 4.0 * inputs.C2
    return inputs.phi_inf ** 2 * aggregate + horizon * inputs.C1


def expanded_k_nu(chars: StableCharacteristics, a: float, phi_inf: float, T: float) -> float:
    """The stable-process form of K_nu written out in (alpha, b, c_plus, c_minus)."""
    mass, alpha = chars.mass, chars.alpha
    return (
        8.0 * chars.b ** 2 * phi_inf ** 2 / a
        + 8.0 * phi_inf ** 2 * mass ** 2 / (a * alpha * (2.0 - alpha))
        + 4.0 * phi_inf ** 2 * mass / (2.0 - alpha)
        + T * mass / alpha
    )


def tail_bound(inputs: BoundInputs, x: float) -> float:
    """Bound on P(|stochastic convolution at t| >= x); the trivial bound 1 below the threshold eta."""
    if x < inputs.eta_val or x <= 0.0:
        return 1.0

    ratio = inputs.eta_val / x
    return min(1.0, ratio ** inputs.beta * k_nu(inputs, inputs.T))


def moment_bound(inputs: BoundInputs) -> float:
    """Uniform-in-t bound on E|X(t)|^p."""
    p = inputs.p
    noise = inputs.eta_val ** p * _noise_factor(inputs, k_nu(inputs, inputs.T))
    growth = math.exp(3.0 ** p * (1.0 / inputs.a) ** holder_exponent(p, inputs.conjugate) * inputs.C * inputs.T)
    return 3.0 ** p * (inputs.x0_moment + noise) * growth


def gronwall_bound(K1: float, a_rate: float, K2: float, t: float) -> float:
    if K1 < 0.0 or K2 < 0.0:
        raise ParameterError("Gronwall constants must be non-negative, got K1={!r}, K2={!r}".format(K1, K2))

    return K1 * math.exp((a_rate + K2) * t)


def contraction_constant(inputs: BoundInputs, gamma: Optional[float] = None) -> float:
    """Lipschitz constant of Gamma in the gamma-weighted norm, p >= 1."""
    gamma = inputs.gamma if gamma is None else gamma
    if not inputs.p >= 1.0:
        raise ParameterError("The weighted-norm contraction constant needs p >= 1, got {!r}".format(inputs.p))

    if not gamma > 0.0:
        raise ParameterError("gamma must be positive, got {!r}".format(gamma))

    if inputs.g is None:
        raise BoundsError("The contraction constant needs the noise profile g")

    p = inputs.p
    if p == 1.0:
        drift = inputs.L_F
    else:
        q = conjugate_exponent(p)
        drift = inputs.L_F * (1.0 / (inputs.a * q * gamma)) ** (p / q)

    weighted_eta = eta(inputs.a + gamma, inputs.T, inputs.g, DEFAULT_ETA_NODES)
    noise = weighted_eta ** p * _noise_factor(inputs, k_nu(inputs, inputs.T))
    return 2.0 ** (p - 1.0) * (drift + noise)


def choose_gamma(inputs: BoundInputs, target: float = GAMMA_TARGET) -> float:
    """Smallest gamma, found by doubling from 1 and then bisecting, whose contraction constant is <= target."""
    gamma = 1.0
    value = contraction_constant(inputs, gamma)
    _LOG.debug("gamma search: c(%g) = %.6g", gamma, value)
    if value <= target:
        return gamma

    while value > target:
        gamma *= 2.0
        if gamma > GAMMA_LIMIT:
            raise GammaSearchError("No gamma up to 2^64 brings the contraction constant below {!r}".format(target))

        value = contraction_constant(inputs, gamma)
        _LOG.debug("gamma search: c(%g) = %.6g", gamma, value)

    lo, hi = gamma / 2.0, gamma
    while hi - lo > GAMMA_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if contraction_constant(inputs, mid) <= target:
            hi = mid
        else:
            lo = mid

    _LOG.debug("gamma search settled on %g", hi)
    return hi


def _strong_lhs(inputs: BoundInputs, eta_val: float) -> float:
    p = inputs.p
    drift = 2.0 ** p * inputs.L_F ** p * (1.0 / inputs.a) ** holder_exponent(p, inputs.conjugate)
    noise = 2.0 ** p * eta_val ** p * _noise_factor(inputs, k_nu(inputs, inputs.T))
    return drift + noise


def check_strong_condition(inputs: BoundInputs) -> Tuple[bool, float]:
    """Returns whether the d_p contraction condition for p <= 1 holds, and its left-hand side."""
    if not 0.0 < inputs.p <= 1.0:
        raise ParameterError("The strong condition applies to p in (0, 1], got {!r}".format(inputs.p))

    lhs = _strong_lhs(inputs, inputs.eta_val)
    return lhs < 1.0, lhs


def critical_amplitude(inputs: BoundInputs, unit_eta: float) -> float:
    """
    Amplitude C0* at which g = C0 sin(t) puts the strong condition's left-hand side at exactly 1. unit_eta is eta for
    C0 = 1; eta is linear in the amplitude.
    """
    if not unit_eta > 0.0:
        raise BoundsError("The unit profile has eta = 0; every amplitude satisfies the condition")

    def excess(amplitude: float) -> float:
        return _strong_lhs(inputs, amplitude * unit_eta) - 1.0

    if excess(0.0) >= 0.0:
        raise BoundsError("The drift term alone violates the strong condition; no amplitude is feasible")

    hi = 1.0
    while excess(hi) <= 0.0:
        hi *= 2.0
        if hi > GAMMA_LIMIT:
            raise BoundsError("Could not bracket the critical amplitude")

    amplitude = float(optimize.brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-12))
    _LOG.debug("critical amplitude %.10g", amplitude)
    return amplitude


def continuity_bound(inputs: BoundInputs, h: float, moment_sup: float) -> float:
    """
    Bound on sup_t E|X(t+h) - X(t)|^p from the three-way split into initial data, drift convolution and noise
    convolution. moment_sup bounds sup_t E|X(t)|^p.
    """
    if not h >= 0.0:
        raise ParameterError("The lag h must be non-negative, got {!r}".format(h))

    if h == 0.0:
        return 0.0

    if h != inputs.h:
        raise BoundsError("eta_window was evaluated for h={!r}, not h={!r}".format(inputs.h, h))

    p, a = inputs.p, inputs.a
    gap = (-math.expm1(-a * h)) ** p
    shift = math.exp(-a * h * p)

    initial = gap * inputs.x0_moment
    growth = inputs.C * (1.0 + moment_sup)
    drift = 2.0 ** p * (gap * (1.0 / a) ** p * growth + shift * (math.expm1(a * h) / a) ** p * growth)
    noise = 2.0 ** p * (
        gap * inputs.eta_val ** p * _noise_factor(inputs, k_nu(inputs, inputs.T))
        + shift * inputs.eta_window_val ** p * _noise_factor(inputs, k_nu(inputs, h))
    )
    return 3.0 ** p * (initial + drift + noise)


def metric_dp_ensemble(
    X: NDArray[np.float64], Y: NDArray[np.float64], grid: PathGrid, p: float
) -> float:
    """d_p with the expectation taken as the mean over the rows of two path ensembles."""
    if X.shape != Y.shape or X.ndim != 2 or X.shape[1] != grid.n_steps + 1:
        raise BoundsError("Ensembles of shape {} and {} do not share the grid".format(X.shape, Y.shape))

    if X.shape[0] == 0:
        raise BoundsError("Cannot take d_p of an empty ensemble")

    mean = np.mean(np.abs(X - Y) ** p, axis=0)
    return float(integrate.trapezoid(mean, grid.times))


def norm_gamma(values: NDArray[np.float64], grid: PathGrid, p: float, gamma: float) -> float:
    """sup over the nodes of exp(-gamma t) (E|X(t)|^p)^(1/p) for an ensemble given as rows."""
    values = np.atleast_2d(values)
    if values.shape[0] == 0:
        raise BoundsError("Cannot take the gamma-norm of an empty ensemble")

    if values.shape[1] != grid.n_steps + 1:
        raise BoundsError("Ensemble of shape {} does not match the grid".format(values.shape))

    if not p >= 1.0:
        raise ParameterError("The gamma-norm needs p >= 1, got {!r}".format(p))

    moments = np.mean(np.abs(values) ** p, axis=0) ** (1.0 / p)
    return float(np.max(np.exp(-gamma * grid.times) * moments))


def default_x_levels(eta_val: float, count: int = AUTO_X_POINTS, ratio: float = AUTO_X_RATIO) -> List[float]:
    if not eta_val > 0.0:
        raise BoundsError("eta is 0; the tail threshold grid is empty")

    return [float(x) for x in np.geomspace(eta_val, ratio * eta_val, count)]


def bound_report(inputs: BoundInputs, x_levels: Sequence[float]) -> Dict[str, Any]:
    """Every named constant and bound of a scenario, ready for JSON."""
    report: Dict[str, Any] = {
        "eta": inputs.eta_val,
        "eta_window": inputs.eta_window_val,
        "h": inputs.h,
        "beta": inputs.beta,
        "p": inputs.p,
        "conjugate": inputs.conjugate,
        "holder_exponent": holder_exponent(inputs.p, inputs.conjugate),
        "C1": inputs.C1,
        "C2": inputs.C2,
        "K_nu_T": k_nu(inputs, inputs.T),
        "K_nu_h": k_nu(inputs, inputs.h),
        "tail_bound": [{"x": float(x), "bound": tail_bound(inputs, float(x))} for x in x_levels],
        "moment_bound": moment_bound(inputs) if inputs.p < inputs.beta else None,
        "contraction_constant": None,
        "gamma": None,
        "strong_condition_lhs": None,
        "strong_condition": None,
    }

    if inputs.p <= 1.0:
        holds, lhs = check_strong_condition(inputs)
        report["strong_condition_lhs"] = lhs
        report["strong_condition"] = holds
        report["contraction_constant"] = lhs

    if inputs.p >= 1.0 and inputs.g is not None:
        try:
            gamma = choose_gamma(inputs)
        except GammaSearchError as e:
            _LOG.warning("%s", e)
        else:
            report["gamma"] = gamma
            report["contraction_constant"] = contraction_constant(inputs, gamma)

    return report
