"""
Alpha-stable Levy measures, their truncation at a level R and the closed-form constants that feed the
tail and moment bounds.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import integrate, special

from stablemild.errors import ParameterError

_LOG = logging.getLogger(__name__)

# Stability indices closer than this to 0 or 2 are rejected: C1 and C2 blow up there
ALPHA_GUARD = 1e-6

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-12
QUAD_LIMIT = 200
MAX_DECADE_POINTS = 60

ScalarFunc = Callable[[float], float]


@dataclass(frozen=True)
class StableCharacteristics:
    """
    Characteristics (alpha, b, c_plus, c_minus) of the driving stable process. The Levy measure has density
    c_plus / x^(alpha + 1) on x > 0 and c_minus / |x|^(alpha + 1) on x < 0.
    """

    alpha: float
    c_plus: float
    c_minus: float
    b: float = 0.0
    strict: bool = False

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.alpha, self.c_plus, self.c_minus, self.b)):
            raise ParameterError("Stable characteristics must be finite.")

        if not 0.0 < self.alpha < 2.0:
            raise ParameterError("alpha must lie in (0, 2), got {!r}".format(self.alpha))

        if self.alpha < ALPHA_GUARD or self.alpha > 2.0 - ALPHA_GUARD:
            raise ParameterError(
                "alpha={!r} is degenerate: the tail constants diverge as alpha approaches 0 or 2".format(self.alpha)
            )

        if self.c_plus < 0.0 or self.c_minus < 0.0:
            raise ParameterError("c_plus and c_minus must be non-negative.")

        if self.c_plus + self.c_minus <= 0.0:
            raise ParameterError("c_plus + c_minus must be positive.")

        if self.alpha == 1.0 and (self.c_plus != self.c_minus or self.b != 0.0):
            raise ParameterError(
                "alpha = 1 is only supported for the symmetric Cauchy process (c_plus = c_minus, b = 0)."
            )

        if self.strict and self.alpha != 1.0:
            expected = strict_drift(self.alpha, self.c_plus, self.c_minus)
            if not math.isclose(self.b, expected, rel_tol=1e-12, abs_tol=1e-12):
                raise ParameterError(
                    "The strict-drift convention requires b = {!r}, got {!r}".format(expected, self.b)
                )

    @classmethod
    def strictly_stable(cls, alpha: float, c_plus: float, c_minus: float) -> "StableCharacteristics":
        b = 0.0 if alpha == 1.0 else strict_drift(alpha, c_plus, c_minus)
        return cls(alpha=alpha, c_plus=c_plus, c_minus=c_minus, b=b, strict=True)

    @property
    def mass(self) -> float:
        return self.c_plus + self.c_minus

    @property
    def symmetric(self) -> bool:
        return self.c_plus == self.c_minus

    @property
    def skewness(self) -> float:
        return (self.c_plus - self.c_minus) / self.mass


@dataclass(frozen=True)
class LevyTailBounds:
    beta: float
    C1: float
    C2: float

    def __post_init__(self) -> None:
        if not 0.0 < self.beta < 2.0:
            raise ParameterError("beta must lie in (0, 2), got {!r}".format(self.beta))

        if self.C1 < 0.0 or self.C2 < 0.0:
            raise ParameterError("C1 and C2 must be non-negative.")


def strict_drift(alpha: float, c_plus: float, c_minus: float) -> float:
    return -(c_plus - c_minus) / (alpha - 1.0)


def _power_integral(exponent: float, lower: float, upper: float) -> float:
    # Integral of x^exponent over [lower, upper], stable near exponent = -1
    k = exponent + 1.0
    if k == 0.0:
        return math.log(upper / lower)

    return math.exp(k * math.log(lower)) * math.expm1(k * math.log(upper / lower)) / k


def levy_density(chars: StableCharacteristics, x: float) -> float:
    if x == 0.0:
        raise ParameterError("The Levy measure has no atom at zero; the density is undefined at x = 0.")

    weight = chars.c_plus if x > 0.0 else chars.c_minus
    return weight / abs(x) ** (chars.alpha + 1.0)


def tail_mass(chars: StableCharacteristics, R: float) -> float:
    """nu({|y| > R})."""
    if not R > 0.0:
        raise ParameterError("Truncation level R must be positive, got {!r}".format(R))

    if math.isinf(R):
        return 0.0

    return chars.mass / chars.alpha * R ** (-chars.alpha)


def small_second_moment(chars: StableCharacteristics, R: float) -> float:
    """Integral of y^2 over {0 < |y| <= R} against nu."""
    if not R > 0.0:
        raise ParameterError("Truncation level R must be positive, got {!r}".format(R))

    return chars.mass * R ** (2.0 - chars.alpha) / (2.0 - chars.alpha)


def truncated_drift(chars: StableCharacteristics, R: float) -> float:
    """b_R = b + integral of x over {1 < |x| <= R} against nu."""
    if not R >= 1.0:
        raise ParameterError("The truncated drift needs R >= 1, got {!r}".format(R))

    if chars.symmetric or R == 1.0:
        return chars.b

    return chars.b + (chars.c_plus - chars.c_minus) * _power_integral(-chars.alpha, 1.0, R)


def jump_mean(chars: StableCharacteristics, lower: float, upper: float) -> float:
    """Integral of x over {lower < |x| <= upper} against nu; the compensator rate of that jump band."""
    if chars.symmetric:
        return 0.0

    return (chars.c_plus - chars.c_minus) * _power_integral(-chars.alpha, lower, upper)


def band_mass(chars: StableCharacteristics, lower: float, upper: float) -> float:
    """nu({lower < |x| <= upper})."""
    return chars.mass / chars.alpha * (lower ** (-chars.alpha) - upper ** (-chars.alpha))


def check_H_condition(chars: StableCharacteristics, p: float) -> bool:
    """
    True when the p-th moment of the big jumps is finite while the second moment is not. For stable measures the
    first holds exactly when p < alpha and the second always holds.
    """
    if not p > 0.0:
        raise ParameterError("Moment order p must be positive, got {!r}".format(p))

    return p < chars.alpha


def compute_tail_bounds(chars: StableCharacteristics) -> LevyTailBounds:
    return LevyTailBounds(
        beta=chars.alpha,
        C1=chars.mass / chars.alpha,
        C2=chars.mass / (2.0 - chars.alpha),
    )


def stable_parameters(chars: StableCharacteristics) -> Tuple[float, float, float]:
    """
    Scale, skewness and location of Z(1) in the classic (S1) stable parameterization, obtained by matching the
    Levy-Khintchine exponent of nu with the 1_{|y| <= 1} compensation.
    """
    alpha = chars.alpha
    if alpha == 1.0:
        # Symmetric Cauchy: 2c times the integral of (cos(ux) - 1)/x^2 over (0, inf) equals -c*pi*|u|
        return math.pi * chars.c_plus, 0.0, chars.b

    scale_alpha = -chars.mass * special.gamma(-alpha) * math.cos(math.pi * alpha / 2.0)
    location = chars.b - strict_drift(alpha, chars.c_plus, chars.c_minus)
    return scale_alpha ** (1.0 / alpha), chars.skewness, location


def characteristic_exponent(chars: StableCharacteristics, u: float) -> complex:
    """psi(u) such that E exp(iuZ(t)) = exp(t psi(u))."""
    scale, skew, location = stable_parameters(chars)
    if chars.alpha == 1.0:
        return complex(-scale * abs(u), location * u)

    tan_term = math.tan(math.pi * chars.alpha / 2.0)
    magnitude = scale ** chars.alpha * abs(u) ** chars.alpha
    return complex(-magnitude, magnitude * skew * math.copysign(1.0, u) * tan_term + location * u)


def _half_line_integral(f: ScalarFunc, alpha: float, lower: float, upper: float) -> float:
    # Integral of f(x) x^(-1-alpha) over (lower, upper]. Finite pieces are integrated in x, split at 1 where the
    # density's two regimes meet. An unbounded tail is mapped through v = x^(-alpha), where the density becomes
    # the constant 1/alpha on (0, max(lower, 1)^(-alpha)).
    def density(x: float) -> float:
        scale = x ** (1.0 + alpha)
        return f(x) / scale if scale > 0.0 else 0.0

    def mapped_tail(v: float) -> float:
        try:
            x = v ** (-1.0 / alpha)
        except OverflowError:
            return 0.0
        return f(x) / alpha

    finite_upper = upper
    tail_start = math.inf
    if math.isinf(upper):
        tail_start = max(lower, 1.0)
        finite_upper = tail_start

    edges = [lower, finite_upper]
    if lower < 1.0 < finite_upper:
        edges = [lower, 1.0, finite_upper]

    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        # Decade breakpoints keep long power-law stretches resolved near their left end
        points: Optional[NDArray[np.float64]] = None
        if a > 0.0 and b / a > 100.0:
            points = np.geomspace(a, b, min(int(math.log10(b / a)), MAX_DECADE_POINTS) + 1)[1:-1]
        value, abserr = integrate.quad(
            density, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT, points=points
        )
        _LOG.debug("quad over x in (%r, %r): %r (abserr %.3g)", a, b, value, abserr)
        total += value

    if math.isfinite(tail_start):
        v_max = tail_start ** (-alpha)
        value, abserr = integrate.quad(
            mapped_tail, 0.0, v_max, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT
        )
        _LOG.debug("quad over v in (0, %r): %r (abserr %.3g)", v_max, value, abserr)
        total += value

    return total


def levy_integral(chars: StableCharacteristics, f: ScalarFunc, lower: float, upper: float) -> float:
    """Integral of f over {lower < |x| <= upper} against nu, by adaptive Gauss-Kronrod quadrature."""
    if lower < 0.0 or upper <= lower:
        raise ParameterError("Need 0 <= lower < upper, got ({!r}, {!r})".format(lower, upper))

    total = 0.0
    if chars.c_plus > 0.0:
        total += chars.c_plus * _half_line_integral(f, chars.alpha, lower, upper)

    if chars.c_minus > 0.0:
        total += chars.c_minus * _half_line_integral(lambda x: f(-x), chars.alpha, lower, upper)

    return total


def moment_integral(chars: StableCharacteristics, p: float, upper: float) -> float:
    """Integral of |x|^p over {1 <= |x| <= upper}; bounded as upper grows exactly when p < alpha."""
    return levy_integral(chars, lambda x: abs(x) ** p, 1.0, upper)


def quadrature_tail_mass(chars: StableCharacteristics, R: float) -> float:
    return levy_integral(chars, lambda x: 1.0, R, math.inf)


def tail_constant_check(chars: StableCharacteristics, R: float) -> float:
    """tail_mass(R) * R^beta, which equals C1 for every R >= 1."""
    return tail_mass(chars, R) * R ** compute_tail_bounds(chars).beta
