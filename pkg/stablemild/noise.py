"""
Sampling of stable noise paths on a uniform grid, either from exact stable increments or from the truncated
decomposition into a drift, compensated small jumps and a compound Poisson stream of big jumps.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from stablemild.errors import JumpBudgetError, ParameterError
from stablemild.levy import (
    StableCharacteristics,
    band_mass,
    jump_mean,
    small_second_moment,
    stable_parameters,
    tail_mass,
    truncated_drift,
)

_LOG = logging.getLogger(__name__)

ROUTE_EXACT = "exact"
ROUTE_TRUNCATED = "truncated"
ROUTES = (ROUTE_EXACT, ROUTE_TRUNCATED)

SMALL_JUMPS_GAUSSIAN = "gaussian"
SMALL_JUMPS_DROP = "drop"
SMALL_JUMP_POLICIES = (SMALL_JUMPS_GAUSSIAN, SMALL_JUMPS_DROP)

DEFAULT_JUMP_BUDGET = 5e6

SEED_LIMIT = 2 ** 64

# Sub-streams of one path
STREAM_NOISE = 0
STREAM_INITIAL = 1


@dataclass(frozen=True)
class PathGrid:
    t_end: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t_end) and self.t_end > 0.0):
            raise ParameterError("Horizon T must be positive and finite, got {!r}".format(self.t_end))

        if isinstance(self.n_steps, bool) or not isinstance(self.n_steps, int) or self.n_steps < 1:
            raise ParameterError("n_steps must be an integer >= 1, got {!r}".format(self.n_steps))

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def times(self) -> NDArray[np.float64]:
        # linspace pins both end points exactly
        return np.linspace(0.0, self.t_end, self.n_steps + 1)

    def node_index(self, t: float) -> int:
        if not 0.0 <= t <= self.t_end:
            raise ParameterError("Time {!r} lies outside [0, {!r}]".format(t, self.t_end))

        return int(round(t / self.dt))


@dataclass(frozen=True)
class SeedSpec:
    """Master seed and path index; each pair names an independent, reproducible random stream."""

    master_seed: int
    path_index: int

    def __post_init__(self) -> None:
        if not 0 <= self.master_seed < SEED_LIMIT:
            raise ParameterError("master_seed must be an unsigned 64-bit integer, got {!r}".format(self.master_seed))

        if self.path_index < 0:
            raise ParameterError("path_index must be non-negative, got {!r}".format(self.path_index))

    def generator(self, substream: int = STREAM_NOISE) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.master_seed, spawn_key=(self.path_index, substream))
        return np.random.Generator(np.random.PCG64(sequence))


@dataclass(frozen=True, eq=False)
class NoisePath:
    """
    Increments of Z over the grid steps. Big jumps (|size| > R) are recorded as rows of (time, size) and are
    already included in the increment of the step that contains them.
    """

    grid: PathGrid
    increments: NDArray[np.float64]
    route: str = ROUTE_EXACT
    R: Optional[float] = None
    big_jumps: NDArray[np.float64] = field(default_factory=lambda: np.empty((0, 2)))

    def __post_init__(self) -> None:
        if self.increments.shape != (self.grid.n_steps,):
            raise ParameterError(
                "Expected {} increments, got shape {}".format(self.grid.n_steps, self.increments.shape)
            )

        if self.big_jumps.ndim != 2 or self.big_jumps.shape[1] != 2:
            raise ParameterError("big_jumps must have shape (k, 2)")

    @property
    def cumulative(self) -> NDArray[np.float64]:
        """Z at the grid nodes, starting from Z(0) = 0."""
        return np.concatenate(([0.0], np.cumsum(self.increments)))

    @property
    def jump_steps(self) -> NDArray[np.int64]:
        return jump_step_indices(self.grid, self.big_jumps[:, 0])

    def small_increments(self) -> NDArray[np.float64]:
        """Increments with the recorded big jumps taken out."""
        if len(self.big_jumps) == 0:
            return self.increments

        aggregated = np.bincount(self.jump_steps, weights=self.big_jumps[:, 1], minlength=self.grid.n_steps)
        return self.increments - aggregated


def jump_step_indices(grid: PathGrid, times: NDArray[np.float64]) -> NDArray[np.int64]:
    """Index of the step (t_k, t_{k+1}] holding each jump time."""
    steps = np.ceil(times / grid.dt).astype(np.int64) - 1
    return np.clip(steps, 0, grid.n_steps - 1)


def sample_stable_increments(
    chars: StableCharacteristics, dt: float, stream: np.random.Generator, size: int
) -> NDArray[np.float64]:
    """
    Draws of Z(dt) by the Chambers-Mallows-Stuck transform. The uniform angles are drawn before the exponentials so
    a stream always yields the same increments.
    """
    if not dt > 0.0:
        raise ParameterError("Step length must be positive, got {!r}".format(dt))

    alpha = chars.alpha
    scale, skew, location = stable_parameters(chars)

    v = stream.uniform(-math.pi / 2.0, math.pi / 2.0, size)
    w = stream.standard_exponential(size)

    if alpha == 1.0:
        # Symmetric Cauchy
        return scale * dt * np.tan(v) + location * dt

    tan_term = skew * math.tan(math.pi * alpha / 2.0)
    shift = math.atan(tan_term) / alpha
    stretch = (1.0 + tan_term ** 2) ** (1.0 / (2.0 * alpha))

    angle = alpha * (v + shift)
    standard = (
        stretch
        * np.sin(angle)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos(v - angle) / w) ** ((1.0 - alpha) / alpha)
    )

    return scale * dt ** (1.0 / alpha) * standard + location * dt


def sample_stable_increment(chars: StableCharacteristics, dt: float, stream: np.random.Generator) -> float:
    return float(sample_stable_increments(chars, dt, stream, 1)[0])


def simulate_exact_path(chars: StableCharacteristics, grid: PathGrid, seed: SeedSpec) -> NoisePath:
    stream = seed.generator(STREAM_NOISE)
    increments = sample_stable_increments(chars, grid.dt, stream, grid.n_steps)
    return NoisePath(grid=grid, increments=increments, route=ROUTE_EXACT)


def _band_magnitudes(
    alpha: float, lower: float, upper: float, stream: np.random.Generator, size: int
) -> NDArray[np.float64]:
    # Inverse CDF of the density proportional to x^(-1-alpha) on (lower, upper]
    u = stream.random(size)
    top = lower ** (-alpha)
    return (top - u * (top - upper ** (-alpha))) ** (-1.0 / alpha)


def _jump_signs(chars: StableCharacteristics, stream: np.random.Generator, size: int) -> NDArray[np.float64]:
    positive = stream.random(size) < chars.c_plus / chars.mass
    return np.where(positive, 1.0, -1.0)


def simulate_truncated_path(
    chars: StableCharacteristics,
    grid: PathGrid,
    R: float,
    epsilon: float,
    seed: SeedSpec,
    small_jump_policy: str = SMALL_JUMPS_GAUSSIAN,
    jump_budget: float = DEFAULT_JUMP_BUDGET,
) -> NoisePath:
    """
    Z(t) = b_R t + compensated jumps in {|x| <= R} + big jumps in {|x| > R}. Jumps with epsilon < |x| <= R are
    simulated and compensated; those below epsilon are replaced by a Gaussian of matching variance or dropped.
    """
    if not R >= 1.0:
        raise ParameterError("Truncation level R must be >= 1, got {!r}".format(R))

    if not 0.0 < epsilon < R:
        raise ParameterError("Need 0 < epsilon < R, got epsilon={!r}, R={!r}".format(epsilon, R))

    if small_jump_policy not in SMALL_JUMP_POLICIES:
        raise ParameterError(
            "Unknown small-jump policy {!r}; expected one of {}".format(
                small_jump_policy, ", ".join(SMALL_JUMP_POLICIES)
            )
        )

    n, dt, t_end, alpha = grid.n_steps, grid.dt, grid.t_end, chars.alpha

    expected = band_mass(chars, epsilon, R) * t_end
    if expected > jump_budget:
        raise JumpBudgetError(expected, jump_budget)

    stream = seed.generator(STREAM_NOISE)

    # Compensated jumps with epsilon < |x| <= R
    count = int(stream.poisson(expected))
    times = stream.uniform(0.0, t_end, count)
    sizes = _band_magnitudes(alpha, epsilon, R, stream, count) * _jump_signs(chars, stream, count)
    mid = np.bincount(jump_step_indices(grid, times), weights=sizes, minlength=n).astype(np.float64)
    mid -= jump_mean(chars, epsilon, R) * dt

    if small_jump_policy == SMALL_JUMPS_GAUSSIAN:
        small = stream.normal(0.0, math.sqrt(small_second_moment(chars, epsilon) * dt), n)
    else:
        small = np.zeros(n)

    # Big jumps: compound Poisson with intensity nu({|x| > R}) and Pareto magnitudes
    big_count = int(stream.poisson(tail_mass(chars, R) * t_end))
    big_times = np.sort(stream.uniform(0.0, t_end, big_count))
    magnitudes = R * (1.0 - stream.random(big_count)) ** (-1.0 / alpha)
    magnitudes = np.maximum(magnitudes, np.nextafter(R, math.inf))
    big_sizes = magnitudes * _jump_signs(chars, stream, big_count)
    big = np.bincount(jump_step_indices(grid, big_times), weights=big_sizes, minlength=n).astype(np.float64)

    _LOG.debug("truncated path %d: %d compensated jumps, %d big jumps", seed.path_index, count, big_count)

    increments = truncated_drift(chars, R) * dt + mid + small + big
    return NoisePath(
        grid=grid,
        increments=increments,
        route=ROUTE_TRUNCATED,
        R=R,
        big_jumps=np.column_stack((big_times, big_sizes)),
    )


def sample_first_jump_times(
    chars: StableCharacteristics, R: float, stream: np.random.Generator, size: int
) -> NDArray[np.float64]:
    rate = tail_mass(chars, R)
    if not rate > 0.0:
        raise ParameterError("No jumps beyond R={!r}; the first big-jump time is infinite".format(R))

    return stream.exponential(1.0 / rate, size)


def first_big_jump_time(chars: StableCharacteristics, R: float, seed: SeedSpec) -> float:
    """tau_R, the first time Z jumps by more than R in absolute value."""
    return float(sample_first_jump_times(chars, R, seed.generator(STREAM_NOISE), 1)[0])


def simulate_path(
    chars: StableCharacteristics,
    grid: PathGrid,
    seed: SeedSpec,
    route: str = ROUTE_EXACT,
    R: float = 1.0,
    epsilon: float = 1e-3,
    small_jump_policy: str = SMALL_JUMPS_GAUSSIAN,
    jump_budget: float = DEFAULT_JUMP_BUDGET,
) -> NoisePath:
    if route == ROUTE_EXACT:
        return simulate_exact_path(chars, grid, seed)

    if route == ROUTE_TRUNCATED:
        return simulate_truncated_path(chars, grid, R, epsilon, seed, small_jump_policy, jump_budget)

    raise ParameterError("Unknown noise route {!r}; expected one of {}".format(route, ", ".join(ROUTES)))


def cumulative(path: NoisePath) -> NDArray[np.float64]:
    return path.cumulative
