"""
Mild solutions of dX = [-aX + F(t, X)]dt + g(t)phi(X)dZ on a uniform grid.

The exponential-Euler scheme evaluates F and phi at the left end of each step and uses the exact semigroup factor
exp(-a dt), so the discrete operator Gamma and the solver share one step rule and the solver output is an exact
fixed point of Gamma.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import integrate, optimize

from stablemild.errors import (
    BoundsError,
    CoefficientError,
    ParameterError,
    PicardDivergenceError,
    StateOverflowError,
)
from stablemild.noise import NoisePath, PathGrid

_LOG = logging.getLogger(__name__)

OVERFLOW_LIMIT = 1e300
DEFAULT_ETA_NODES = 256
REFINE_XATOL = 1e-10

# Tolerances of the certification probes
PROBE_RTOL = 1e-9
PROBE_ATOL = 1e-12

TimeFunc = Callable[[NDArray[np.float64]], NDArray[np.float64]]
DriftFunc = Callable[[float, NDArray[np.float64]], NDArray[np.float64]]


@dataclass(frozen=True)
class SemigroupParams:
    """S(t) = exp(-a t), the exponentially stable semigroup generated by A = -aI."""

    a: float
    M: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise ParameterError("Semigroup decay rate a must be positive and finite, got {!r}".format(self.a))

        if self.M != 1.0:
            raise ParameterError("Only contraction semigroups (M = 1) are supported, got M={!r}".format(self.M))


def semigroup_factor(sg: SemigroupParams, t: float) -> float:
    if t < 0.0:
        raise ParameterError("The semigroup is only defined for t >= 0, got {!r}".format(t))

    return math.exp(-sg.a * t)


@dataclass(frozen=True, eq=False)
class CoefficientSpec:
    """
    Drift F(t, x) and separable noise coefficient G(t, x) = g(t)phi(x), with the constants certified for them:
    |F(t,y) - F(t,z)|^p <= L_F |y - z|^p, |F(t,y)|^p <= C (1 + |y|^p), |phi| <= phi_inf and
    |phi(y) - phi(z)| <= |y - z|^(p/2). All callables are evaluated on numpy arrays.
    """

    F: DriftFunc
    g: TimeFunc
    phi: TimeFunc
    L_F: float
    C: float
    phi_inf: float
    label: str = "custom"

    def __post_init__(self) -> None:
        for name in ("L_F", "C", "phi_inf"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise CoefficientError("{} must be finite and non-negative, got {!r}".format(name, value))

    def g_at(self, times: NDArray[np.float64]) -> NDArray[np.float64]:
        values = np.broadcast_to(np.asarray(self.g(times), dtype=np.float64), np.shape(times))
        if not np.all(np.isfinite(values)):
            raise CoefficientError("g produced non-finite values on the time grid")

        return values

    def certify(self, p: float, stream: np.random.Generator, n_probes: int = 512, t_end: float = 1.0) -> None:
        """Spot-checks the certified constants on random probes; raises CoefficientError on the first violation."""
        if not p > 0.0:
            raise ParameterError("Moment order p must be positive, got {!r}".format(p))

        y = 10.0 * stream.standard_cauchy(n_probes)
        z = y + stream.standard_cauchy(n_probes)
        times = stream.uniform(0.0, t_end, n_probes)

        fy = np.asarray([self.F(float(t), np.asarray(v)) for t, v in zip(times, y)], dtype=np.float64)
        fz = np.asarray([self.F(float(t), np.asarray(v)) for t, v in zip(times, z)], dtype=np.float64)
        diff = np.abs(y - z)

        checks = [
            ("Lipschitz constant L_F", np.abs(fy - fz) ** p, self.L_F * diff ** p),
            ("linear-growth constant C", np.abs(fy) ** p, self.C * (1.0 + np.abs(y) ** p)),
            ("bound phi_inf", np.abs(self.phi(y)), np.full(n_probes, self.phi_inf)),
            ("Holder condition on phi", np.abs(self.phi(y) - self.phi(z)), diff ** (p / 2.0)),
        ]

        for name, lhs, rhs in checks:
            violated = np.flatnonzero(~(lhs <= rhs * (1.0 + PROBE_RTOL) + PROBE_ATOL))
            if len(violated) > 0:
                i = violated[0]
                raise CoefficientError(
                    "Coefficients '{}' violate the {} at y={!r}, z={!r} ({!r} > {!r})".format(
                        self.label, name, y[i], z[i], lhs[i], rhs[i]
                    )
                )

        g_values = self.g_at(np.linspace(0.0, t_end, n_probes))
        _LOG.debug(
            "coefficients '%s' certified on %d probes (max |g| %.4g)", self.label, n_probes, np.abs(g_values).max()
        )


@dataclass(frozen=True, eq=False)
class SolutionPath:
    """X at the grid nodes, and optionally the stochastic convolution part of it."""

    grid: PathGrid
    values: NDArray[np.float64]
    x0: float
    convolution: Optional[NDArray[np.float64]] = None

    def __post_init__(self) -> None:
        if self.values.shape != (self.grid.n_steps + 1,):
            raise ParameterError(
                "Expected {} node values, got shape {}".format(self.grid.n_steps + 1, self.values.shape)
            )

        if self.values[0] != self.x0:
            raise ParameterError("A solution path must start at x0")

        if not np.all(np.isfinite(self.values)):
            raise ParameterError("Solution paths must be finite")


@dataclass(frozen=True, eq=False)
class BatchSolution:
    """Rows are paths. Flagged rows left the finite range and hold inf from their overflow step on."""

    grid: PathGrid
    values: NDArray[np.float64]
    convolution: NDArray[np.float64]
    flagged: NDArray[np.bool_]
    overflow_steps: NDArray[np.int64]
    overflow_values: NDArray[np.float64]

    @property
    def n_flagged(self) -> int:
        return int(np.count_nonzero(self.flagged))


def _refined_sup(objective: Callable[[float], float], nodes: NDArray[np.float64], values: NDArray[np.float64]) -> float:
    # Node maximum, then a bounded golden-section search on the two adjacent cells
    best = int(np.argmax(values))
    lo = nodes[max(best - 1, 0)]
    hi = nodes[min(best + 1, len(nodes) - 1)]
    peak = float(values[best])

    if hi > lo:
        result = optimize.minimize_scalar(
            lambda t: -objective(t), bounds=(lo, hi), method="bounded", options={"xatol": REFINE_XATOL}
        )
        _LOG.debug("sup refinement on [%r, %r]: node %r, refined %r", lo, hi, peak, -result.fun)
        peak = max(peak, float(-result.fun))

    return peak


def _squared(g: TimeFunc) -> Callable[[float], float]:
    def g2(s: float) -> float:
        return float(np.asarray(g(np.asarray(s)))) ** 2

    return g2


def _check_g(g: TimeFunc, lo: float, hi: float, nodes: int) -> None:
    probes = np.linspace(lo, hi, 2 * nodes + 1)
    values = np.asarray(g(probes), dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise CoefficientError("g produced non-finite values on [{!r}, {!r}]".format(lo, hi))


def _kernel_energy(a: float, g2: Callable[[float], float], lo: float, hi: float, end: float) -> float:
    # Integral of exp(-a(end - s)) g(s)^2 over [lo, hi]
    if hi <= lo:
        return 0.0

    value, _ = integrate.quad(lambda s: math.exp(-a * (end - s)) * g2(s), lo, hi, epsabs=1e-14, epsrel=1e-12, limit=200)
    return float(value)


def eta(a: float, T: float, g: TimeFunc, nodes: int = DEFAULT_ETA_NODES) -> float:
    """(sup over t in [0, T] of the integral of exp(-a(t - s)) g(s)^2 over [0, t])^(1/2)."""
    if not a > 0.0 or not T > 0.0:
        raise ParameterError("eta needs a > 0 and T > 0, got a={!r}, T={!r}".format(a, T))

    _check_g(g, 0.0, T, nodes)
    g2 = _squared(g)
    grid = np.linspace(0.0, T, nodes + 1)
    decay = math.exp(-a * (T / nodes))

    energy = np.zeros(nodes + 1)
    for k in range(nodes):
        energy[k + 1] = decay * energy[k] + _kernel_energy(a, g2, grid[k], grid[k + 1], grid[k + 1])

    def running(t: float) -> float:
        j = min(int(np.searchsorted(grid, t, side="right")) - 1, nodes - 1)
        j = max(j, 0)
        return math.exp(-a * (t - grid[j])) * energy[j] + _kernel_energy(a, g2, grid[j], t, t)

    return math.sqrt(max(_refined_sup(running, grid, energy), 0.0))


def eta_window(a: float, T: float, g: TimeFunc, h: float, nodes: int = DEFAULT_ETA_NODES) -> float:
    """(sup over t in [0, T] of the integral of exp(-a(t + h - s)) g(s)^2 over [t, t + h])^(1/2)."""
    if not h > 0.0:
        raise ParameterError("The window h must be positive, got {!r}".format(h))

    if not a > 0.0 or not T > 0.0:
        raise ParameterError("eta_window needs a > 0 and T > 0, got a={!r}, T={!r}".format(a, T))

    _check_g(g, 0.0, T + h, nodes)
    g2 = _squared(g)
    grid = np.linspace(0.0, T, nodes + 1)

    def window(t: float) -> float:
        return _kernel_energy(a, g2, t, t + h, t + h)

    values = np.asarray([window(t) for t in grid])
    return math.sqrt(max(_refined_sup(window, grid, values), 0.0))


def _kernel_increments(sg: SemigroupParams, noise: NoisePath, split_jumps: bool) -> NDArray[np.float64]:
    # exp(-a dt) dZ_k; in split mode each big jump is weighted by exp(-a(t_{k+1} - tau)) instead
    grid = noise.grid
    decay = math.exp(-sg.a * grid.dt)
    if not split_jumps or len(noise.big_jumps) == 0:
        return decay * noise.increments

    steps = noise.jump_steps
    ends = grid.times[steps + 1]
    weighted = np.exp(-sg.a * (ends - noise.big_jumps[:, 0])) * noise.big_jumps[:, 1]
    return decay * noise.small_increments() + np.bincount(steps, weights=weighted, minlength=grid.n_steps)


def _step(
    y: NDArray[np.float64],
    x: NDArray[np.float64],
    t: float,
    g_k: float,
    kernel_dz: NDArray[np.float64],
    coeffs: CoefficientSpec,
    decay: float,
    drift_weight: float,
) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    noise = g_k * coeffs.phi(x) * kernel_dz
    return decay * y + drift_weight * coeffs.F(t, x) + noise, noise


def _integrate(
    x0: NDArray[np.float64],
    coeffs: CoefficientSpec,
    sg: SemigroupParams,
    grid: PathGrid,
    kernel_dz: NDArray[np.float64],
    frozen: Optional[NDArray[np.float64]] = None,
) -> BatchSolution:
    """
    Runs the step rule over every row. Without a frozen input this is the solver; with one it is Gamma applied to
    the frozen paths.
    """
    m, n = kernel_dz.shape
    times = grid.times
    g_nodes = coeffs.g_at(times)
    decay = math.exp(-sg.a * grid.dt)
    drift_weight = -math.expm1(-sg.a * grid.dt) / sg.a

    values = np.empty((m, n + 1))
    conv = np.empty((m, n + 1))
    values[:, 0] = x0
    conv[:, 0] = 0.0
    flagged = np.zeros(m, dtype=np.bool_)
    overflow_steps = np.full(m, -1, dtype=np.int64)
    overflow_values = np.zeros(m)

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            y = values[:, k]
            x = y if frozen is None else frozen[:, k]
            nxt, noise = _step(y, x, float(times[k]), float(g_nodes[k]), kernel_dz[:, k], coeffs, decay, drift_weight)
            conv_next = decay * conv[:, k] + noise

            bad = ~flagged & ~(np.abs(nxt) <= OVERFLOW_LIMIT)
            if bad.any():
                overflow_steps[bad] = k + 1
                overflow_values[bad] = nxt[bad]
                flagged |= bad
                _LOG.warning("%d path(s) overflowed at step %d", int(np.count_nonzero(bad)), k + 1)

            if flagged.any():
                nxt = np.where(flagged, np.inf, nxt)
                conv_next = np.where(flagged, np.inf, conv_next)

            values[:, k + 1] = nxt
            conv[:, k + 1] = conv_next

    return BatchSolution(
        grid=grid,
        values=values,
        convolution=conv,
        flagged=flagged,
        overflow_steps=overflow_steps,
        overflow_values=overflow_values,
    )


def _single(batch: BatchSolution, x0: float) -> SolutionPath:
    if batch.flagged[0]:
        step = int(batch.overflow_steps[0])
        raise StateOverflowError(step=step, value=float(batch.overflow_values[0]))

    return SolutionPath(grid=batch.grid, values=batch.values[0], x0=x0, convolution=batch.convolution[0])


def euler_solve(
    x0: float, coeffs: CoefficientSpec, sg: SemigroupParams, noise: NoisePath, split_jumps: bool = False
) -> SolutionPath:
    """
    X_{k+1} = exp(-a dt) X_k + (1 - exp(-a dt))/a F(t_k, X_k) + exp(-a dt) g(t_k) phi(X_k) dZ_k. With split_jumps
    each big jump is propagated from its own time instead of from the start of its step.
    """
    kernel_dz = _kernel_increments(sg, noise, split_jumps)
    batch = _integrate(np.array([x0], dtype=np.float64), coeffs, sg, noise.grid, kernel_dz[np.newaxis, :])
    return _single(batch, x0)


def euler_solve_batch(
    x0: NDArray[np.float64],
    coeffs: CoefficientSpec,
    sg: SemigroupParams,
    grid: PathGrid,
    increments: NDArray[np.float64],
) -> BatchSolution:
    """Row-wise euler_solve over an (m, n) block of increments; overflowing rows are flagged, not raised."""
    if increments.shape != (len(x0), grid.n_steps):
        raise ParameterError(
            "Increments of shape {} do not match {} paths of {} steps".format(increments.shape, len(x0), grid.n_steps)
        )

    decay = math.exp(-sg.a * grid.dt)
    return _integrate(np.asarray(x0, dtype=np.float64), coeffs, sg, grid, decay * increments)


def gamma_apply(
    X: SolutionPath,
    x0: float,
    coeffs: CoefficientSpec,
    sg: SemigroupParams,
    noise: NoisePath,
    split_jumps: bool = False,
) -> SolutionPath:
    if X.grid != noise.grid:
        raise ParameterError("Gamma needs the input path on the noise grid")

    kernel_dz = _kernel_increments(sg, noise, split_jumps)
    batch = _integrate(
        np.array([x0], dtype=np.float64),
        coeffs,
        sg,
        noise.grid,
        kernel_dz[np.newaxis, :],
        frozen=X.values[np.newaxis, :],
    )
    return _single(batch, x0)


def constant_path(grid: PathGrid, x0: float) -> SolutionPath:
    return SolutionPath(grid=grid, values=np.full(grid.n_steps + 1, x0, dtype=np.float64), x0=x0)


def _check_grid(a: PathGrid, b: PathGrid) -> None:
    if a != b:
        raise BoundsError("Paths live on different grids ({} vs {})".format(a, b))


def metric_dp(X: SolutionPath, Y: SolutionPath, p: float) -> float:
    """Trapezoidal approximation of the integral over [0, T] of |X(t) - Y(t)|^p."""
    _check_grid(X.grid, Y.grid)
    return float(integrate.trapezoid(np.abs(X.values - Y.values) ** p, X.grid.times))


def picard_solve(
    x0: float,
    coeffs: CoefficientSpec,
    sg: SemigroupParams,
    noise: NoisePath,
    tol: float,
    max_iter: int,
    p: float = 1.0,
    split_jumps: bool = False,
) -> Tuple[SolutionPath, List[float]]:
    """
    Iterates Gamma from the constant path x0 until successive iterates are closer than tol in d_p. Returns the last
    iterate and the distance history.
    """
    if not tol > 0.0:
        raise ParameterError("Picard tolerance must be positive, got {!r}".format(tol))

    if max_iter < 1:
        raise ParameterError("max_iter must be >= 1, got {!r}".format(max_iter))

    current = constant_path(noise.grid, x0)
    history: List[float] = []
    for iteration in range(1, max_iter + 1):
        following = gamma_apply(current, x0, coeffs, sg, noise, split_jumps)
        distance = metric_dp(following, current, p)
        history.append(distance)
        _LOG.debug("picard iteration %d: d_p = %.6g", iteration, distance)
        current = following
        if distance < tol:
            return current, history

    raise PicardDivergenceError(history, max_iter)
