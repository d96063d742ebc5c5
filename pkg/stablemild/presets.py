"""
Named coefficient families. Each preset carries the constants certified for it, so a scenario never states a
Lipschitz or growth constant its functions do not satisfy.
"""
import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, NoReturn, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from stablemild.convolution import CoefficientSpec, DriftFunc, TimeFunc
from stablemild.errors import CoefficientError, ParameterError


@dataclass(frozen=True, eq=False)
class Drift:
    func: DriftFunc
    L_F: float
    C: float
    label: str


@dataclass(frozen=True, eq=False)
class NoiseGain:
    func: TimeFunc
    phi_inf: float
    label: str


@dataclass(frozen=True, eq=False)
class TimeProfile:
    func: TimeFunc
    label: str


def _floats(name: str, args: Sequence[str], count: int) -> Sequence[float]:
    if len(args) != count:
        raise ParameterError("Preset '{}' takes {} argument(s), got {}".format(name, count, len(args)))

    try:
        values = [float(arg) for arg in args]
    except ValueError:
        raise ParameterError("Preset '{}' needs numeric arguments, got {}".format(name, ", ".join(args)))

    if not all(math.isfinite(v) for v in values):
        raise ParameterError("Preset '{}' needs finite arguments".format(name))

    return values


def _label(name: str, args: Sequence[str]) -> str:
    return "{}({})".format(name, ", ".join(args))


def zero_drift(args: Sequence[str], p: float) -> Drift:
    _floats("zero", args, 0)

    def func(t: float, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.zeros_like(x, dtype=np.float64)

    return Drift(func=func, L_F=0.0, C=0.0, label="zero()")


def affine_drift(args: Sequence[str], p: float) -> Drift:
    """F(t, x) = k x + m."""
    k, m = _floats("affine", args, 2)

    def func(t: float, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return k * x + m

    # |kx + m|^p <= max(1, 2^(p-1)) (|k|^p |x|^p + |m|^p)
    growth = max(1.0, 2.0 ** (p - 1.0)) * max(abs(k) ** p, abs(m) ** p)
    return Drift(func=func, L_F=abs(k) ** p, C=growth, label=_label("affine", args))


def clipped_linear_drift(args: Sequence[str], p: float) -> Drift:
    """F(t, x) = k clip(x, -m, m); bounded by |k| m."""
    k, m = _floats("clipped_linear", args, 2)
    if not m > 0.0:
        raise ParameterError("clipped_linear needs a positive clip level, got {!r}".format(m))

    def func(t: float, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return k * np.clip(x, -m, m)

    return Drift(func=func, L_F=abs(k) ** p, C=(abs(k) * m) ** p, label=_label("clipped_linear", args))


def const_gain(args: Sequence[str]) -> NoiseGain:
    (v,) = _floats("const", args, 1)

    def func(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.full(np.shape(x), v)

    return NoiseGain(func=func, phi_inf=abs(v), label=_label("const", args))


def tanh_gain(args: Sequence[str]) -> NoiseGain:
    """
    phi(x) = v tanh(x / s). With |v| <= 1/2 and |v| <= s the Holder condition with exponent p/2 and constant 1 holds
    for every p in (0, 2].
    """
    v, s = _floats("tanh", args, 2)
    if not s > 0.0:
        raise ParameterError("tanh needs a positive scale, got {!r}".format(s))

    if abs(v) > 0.5 or abs(v) > s:
        raise CoefficientError("tanh({}, {}) is not Holder with constant 1: need |v| <= 1/2 and |v| <= s".format(v, s))

    def func(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return v * np.tanh(np.asarray(x) / s)

    return NoiseGain(func=func, phi_inf=abs(v), label=_label("tanh", args))


def const_profile(args: Sequence[str]) -> TimeProfile:
    (g0,) = _floats("const", args, 1)

    def func(t: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.full(np.shape(t), g0)

    return TimeProfile(func=func, label=_label("const", args))


def sine_profile(args: Sequence[str]) -> TimeProfile:
    """g(t) = C0 sin(t)."""
    (amplitude,) = _floats("sine", args, 1)

    def func(t: NDArray[np.float64]) -> NDArray[np.float64]:
        return amplitude * np.sin(t)

    return TimeProfile(func=func, label=_label("sine", args))


def table_profile(args: Sequence[str]) -> TimeProfile:
    """Piecewise-linear g through `t:value` knots, constant beyond the end knots."""
    if len(args) < 2:
        raise ParameterError("table needs at least two t:value knots")

    knots = []
    for arg in args:
        t, sep, value = arg.partition(":")
        if not sep:
            raise ParameterError("table knot {!r} is not of the form t:value".format(arg))

        knots.append(_floats("table", [t, value], 2))

    times = np.array([k[0] for k in knots])
    values = np.array([k[1] for k in knots])
    if not np.all(np.diff(times) > 0.0):
        raise ParameterError("table knots must have strictly increasing times")

    def func(t: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.asarray(np.interp(t, times, values), dtype=np.float64)

    return TimeProfile(func=func, label=_label("table", args))


DRIFTS: Dict[str, Callable[[Sequence[str], float], Drift]] = {
    "zero": zero_drift,
    "affine": affine_drift,
    "clipped_linear": clipped_linear_drift,
}

GAINS: Dict[str, Callable[[Sequence[str]], NoiseGain]] = {
    "const": const_gain,
    "tanh": tanh_gain,
}

PROFILES: Dict[str, Callable[[Sequence[str]], TimeProfile]] = {
    "const": const_profile,
    "sine": sine_profile,
    "table": table_profile,
}


def make_drift(name: str, args: Sequence[str], p: float) -> Drift:
    return DRIFTS[name](args, p) if name in DRIFTS else _fail("F", DRIFTS, name)


def make_gain(name: str, args: Sequence[str]) -> NoiseGain:
    return GAINS[name](args) if name in GAINS else _fail("phi", GAINS, name)


def make_profile(name: str, args: Sequence[str]) -> TimeProfile:
    return PROFILES[name](args) if name in PROFILES else _fail("g", PROFILES, name)


def _fail(kind: str, registry: Iterable[str], name: str) -> NoReturn:
    raise ParameterError("Unknown {} preset '{}'; expected one of {}".format(kind, name, ", ".join(sorted(registry))))


def _override(name: str, certified: float, stated: Optional[float]) -> float:
    if stated is None:
        return certified

    if stated < certified:
        raise CoefficientError(
            "{}={!r} is below the value {!r} certified for the chosen preset".format(name, stated, certified)
        )

    return stated


def build_coefficients(
    drift: Drift,
    profile: TimeProfile,
    gain: NoiseGain,
    L_F: Optional[float] = None,
    C: Optional[float] = None,
    phi_inf: Optional[float] = None,
) -> CoefficientSpec:
    """Stated constants may loosen the certified ones but never tighten them."""
    return CoefficientSpec(
        F=drift.func,
        g=profile.func,
        phi=gain.func,
        L_F=_override("L_F", drift.L_F, L_F),
        C=_override("C", drift.C, C),
        phi_inf=_override("phi_inf", gain.phi_inf, phi_inf),
        label="F={} g={} phi={}".format(drift.label, profile.label, gain.label),
    )
