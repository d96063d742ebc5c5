"""
Reproducible path ensembles and the empirical studies that hold them against the analytic bounds.

Work is cut into fixed-size chunks of path indices, each path drawing from its own seeded stream, and results are
reassembled in chunk order; the thread count therefore never changes a report.
"""
import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from stablemild.bounds import (
    CONJUGATE_UNIT,
    BoundInputs,
    check_strong_condition,
    choose_gamma,
    continuity_bound,
    contraction_constant,
    moment_bound,
    tail_bound,
)
from stablemild.convolution import (
    CoefficientSpec,
    SemigroupParams,
    euler_solve,
    euler_solve_batch,
    eta,
    eta_window,
    metric_dp,
    picard_solve,
)
from stablemild.errors import (
    OverflowBudgetError,
    ParameterError,
    PicardDivergenceError,
    StateOverflowError,
)
from stablemild.levy import StableCharacteristics, compute_tail_bounds
from stablemild.noise import (
    DEFAULT_JUMP_BUDGET,
    ROUTE_EXACT,
    ROUTES,
    SMALL_JUMP_POLICIES,
    SMALL_JUMPS_GAUSSIAN,
    STREAM_INITIAL,
    NoisePath,
    PathGrid,
    SeedSpec,
    simulate_path,
)

_LOG = logging.getLogger(__name__)

FUNCTIONAL_CONVOLUTION = "convolution"
FUNCTIONAL_SOLUTION = "solution"

CONFIDENCE = 0.99
BOOTSTRAP_RESAMPLES = 1000
BOOTSTRAP_COLUMNS = 8
PICARD_SLACK = 0.05
FIXED_POINT_TOLERANCE = 1e-8
DEFAULT_CHUNK_SIZE = 1024

# Spawn key of the bootstrap stream; path streams use two-element keys
BOOTSTRAP_KEY = (0xB007,)

T = TypeVar("T")


@dataclass(frozen=True, eq=False)
class Scenario:
    """The model side of a study: noise, coefficients, semigroup, initial law and noise route."""

    chars: StableCharacteristics
    coeffs: CoefficientSpec
    semigroup: SemigroupParams
    x0: float = 0.0
    x0_spread: float = 0.0
    route: str = ROUTE_EXACT
    R: float = 1.0
    epsilon: float = 1e-3
    small_jump_policy: str = SMALL_JUMPS_GAUSSIAN
    jump_budget: float = DEFAULT_JUMP_BUDGET
    conjugate: str = CONJUGATE_UNIT

    def __post_init__(self) -> None:
        if not math.isfinite(self.x0) or not (math.isfinite(self.x0_spread) and self.x0_spread >= 0.0):
            raise ParameterError("x0 must be finite and x0_spread finite and non-negative")

        if self.route not in ROUTES:
            raise ParameterError("Unknown noise route {!r}; expected one of {}".format(self.route, ", ".join(ROUTES)))

        if self.small_jump_policy not in SMALL_JUMP_POLICIES:
            raise ParameterError("Unknown small-jump policy {!r}".format(self.small_jump_policy))

    def initial_value(self, seed: SeedSpec) -> float:
        """x0, or a draw from the uniform law on [x0 - spread, x0 + spread] on the path's own sub-stream."""
        if self.x0_spread == 0.0:
            return self.x0

        return float(seed.generator(STREAM_INITIAL).uniform(self.x0 - self.x0_spread, self.x0 + self.x0_spread))

    def initial_moment(self, p: float) -> float:
        """E|x0|^p in closed form."""
        if self.x0_spread == 0.0:
            return abs(self.x0) ** p

        def antiderivative(u: float) -> float:
            return math.copysign(abs(u) ** (p + 1.0), u) / (p + 1.0)

        lo, hi = self.x0 - self.x0_spread, self.x0 + self.x0_spread
        return (antiderivative(hi) - antiderivative(lo)) / (hi - lo)

    def noise_path(self, grid: PathGrid, seed: SeedSpec) -> NoisePath:
        return simulate_path(
            self.chars,
            grid,
            seed,
            route=self.route,
            R=self.R,
            epsilon=self.epsilon,
            small_jump_policy=self.small_jump_policy,
            jump_budget=self.jump_budget,
        )


@dataclass(frozen=True, eq=False)
class EnsembleConfig:
    n_paths: int
    grid: PathGrid
    master_seed: int
    scenario: Scenario
    threads: int = 1
    chunk_size: int = DEFAULT_CHUNK_SIZE
    overflow_budget: float = 1e-4

    def __post_init__(self) -> None:
        if self.n_paths < 2:
            raise ParameterError("An ensemble needs at least 2 paths, got {!r}".format(self.n_paths))

        if self.threads < 1:
            raise ParameterError("threads must be >= 1, got {!r}".format(self.threads))

        if self.chunk_size < 1:
            raise ParameterError("chunk_size must be >= 1, got {!r}".format(self.chunk_size))

        # Validates the seed range
        SeedSpec(self.master_seed, 0)

    def with_paths(self, n_paths: int) -> "EnsembleConfig":
        return dataclasses.replace(self, n_paths=n_paths)

    def seed(self, path_index: int) -> SeedSpec:
        return SeedSpec(self.master_seed, path_index)


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Solution and stochastic convolution values of every path at the requested nodes."""

    times: NDArray[np.float64]
    nodes: NDArray[np.int64]
    values: NDArray[np.float64]
    convolution: NDArray[np.float64]
    flagged: NDArray[np.bool_]
    x0: NDArray[np.float64]

    @property
    def n_paths(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_flagged(self) -> int:
        return int(np.count_nonzero(self.flagged))


@dataclass(frozen=True, eq=False)
class EstimateReport:
    quantity: str
    points: Tuple[float, ...]
    estimate: Tuple[float, ...]
    ci_upper: Tuple[float, ...]
    bound: Tuple[float, ...]
    passed: Tuple[bool, ...]
    n_effective: int
    flagged_paths: int
    verdicts: Dict[str, bool] = field(default_factory=dict)
    statistics: Dict[str, float] = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(self.passed) and all(self.verdicts.values())

    def rows(self) -> List[List[Any]]:
        return [
            [x, est, ci, bound, ok]
            for x, est, ci, bound, ok in zip(self.points, self.estimate, self.ci_upper, self.bound, self.passed)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "quantity": self.quantity,
            "points": list(self.points),
            "estimate": list(self.estimate),
            "ci_upper": list(self.ci_upper),
            "bound": list(self.bound),
            "pass": list(self.passed),
            "n_effective": self.n_effective,
            "flagged_paths": self.flagged_paths,
            "verdicts": dict(self.verdicts),
            "statistics": dict(self.statistics),
            "all_pass": self.all_passed,
        }


@dataclass(frozen=True)
class PicardPath:
    index: int
    converged: bool
    iterations: int
    max_ratio: float
    fixed_point_gap: float
    history: Tuple[float, ...]


@dataclass(frozen=True)
class PicardReport:
    constant: float
    slack: float
    paths: Tuple[PicardPath, ...]

    @property
    def max_ratio(self) -> float:
        return max((path.max_ratio for path in self.paths), default=0.0)

    @property
    def non_converged(self) -> List[int]:
        return [path.index for path in self.paths if not path.converged]

    @property
    def all_passed(self) -> bool:
        return (
            len(self.non_converged) == 0
            and self.max_ratio <= self.constant + self.slack
            and all(path.fixed_point_gap < FIXED_POINT_TOLERANCE for path in self.paths)
        )

    def rows(self) -> List[List[Any]]:
        return [
            [path.index, iteration + 1, distance]
            for path in self.paths
            for iteration, distance in enumerate(path.history)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "constant": self.constant,
            "slack": self.slack,
            "max_ratio": self.max_ratio,
            "non_converged": self.non_converged,
            "paths": [dataclasses.asdict(path) for path in self.paths],
            "all_pass": self.all_passed,
        }


def _chunks(n_paths: int, chunk_size: int) -> List[Tuple[int, int]]:
    return [(start, min(start + chunk_size, n_paths)) for start in range(0, n_paths, chunk_size)]


def _map_ordered(fn: Callable[[Tuple[int, int]], T], chunks: Sequence[Tuple[int, int]], threads: int) -> List[T]:
    if threads == 1 or len(chunks) <= 1:
        return [fn(chunk) for chunk in chunks]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def run_ensemble(cfg: EnsembleConfig, nodes: Optional[Sequence[int]] = None) -> Ensemble:
    """
    Solves every path of the ensemble and keeps the requested grid nodes (all of them by default). Flagged paths
    are kept and carry inf; too many of them raise OverflowBudgetError.
    """
    grid, scenario = cfg.grid, cfg.scenario
    keep = np.arange(grid.n_steps + 1) if nodes is None else np.asarray(nodes, dtype=np.int64)
    if keep.size == 0 or keep.min() < 0 or keep.max() > grid.n_steps:
        raise ParameterError("Requested nodes fall outside the grid")

    def solve_chunk(chunk: Tuple[int, int]) -> Tuple[NDArray[np.float64], ...]:
        start, stop = chunk
        seeds = [cfg.seed(i) for i in range(start, stop)]
        x0 = np.array([scenario.initial_value(seed) for seed in seeds])
        increments = np.vstack([scenario.noise_path(grid, seed).increments for seed in seeds])
        batch = euler_solve_batch(x0, scenario.coeffs, scenario.semigroup, grid, increments)
        _LOG.debug("chunk [%d, %d) solved, %d flagged", start, stop, batch.n_flagged)
        return batch.values[:, keep], batch.convolution[:, keep], batch.flagged, x0

    parts = _map_ordered(solve_chunk, _chunks(cfg.n_paths, cfg.chunk_size), cfg.threads)
    ensemble = Ensemble(
        times=grid.times[keep],
        nodes=keep,
        values=np.vstack([part[0] for part in parts]),
        convolution=np.vstack([part[1] for part in parts]),
        flagged=np.concatenate([part[2] for part in parts]).astype(np.bool_),
        x0=np.concatenate([part[3] for part in parts]),
    )

    if ensemble.n_flagged > 0:
        _LOG.warning("%d of %d paths overflowed and are counted as exceedances", ensemble.n_flagged, cfg.n_paths)

    if ensemble.n_flagged > cfg.overflow_budget * cfg.n_paths:
        raise OverflowBudgetError(
            "{} of {} paths overflowed, above the budget of {:.4g}%".format(
                ensemble.n_flagged, cfg.n_paths, 100.0 * cfg.overflow_budget
            )
        )

    return ensemble


def scenario_bound_inputs(scenario: Scenario, grid: PathGrid, p: float, h: float) -> BoundInputs:
    """BoundInputs of a scenario: eta and its window from g, C1 and C2 from the Levy measure, E|x0|^p exactly."""
    sg, coeffs = scenario.semigroup, scenario.coeffs
    tails = compute_tail_bounds(scenario.chars)
    return BoundInputs(
        a=sg.a,
        b=scenario.chars.b,
        phi_inf=coeffs.phi_inf,
        T=grid.t_end,
        h=h,
        beta=tails.beta,
        p=p,
        C1=tails.C1,
        C2=tails.C2,
        L_F=coeffs.L_F,
        C=coeffs.C,
        eta_val=eta(sg.a, grid.t_end, coeffs.g),
        eta_window_val=eta_window(sg.a, grid.t_end, coeffs.g, h),
        x0_moment=scenario.initial_moment(p),
        conjugate=scenario.conjugate,
        g=coeffs.g,
    )


def _default_inputs(cfg: EnsembleConfig, p: Optional[float] = None) -> BoundInputs:
    p = 0.5 * cfg.scenario.chars.alpha if p is None else p
    return scenario_bound_inputs(cfg.scenario, cfg.grid, p, 2.0 * cfg.grid.dt)


def clopper_pearson_upper(k: int, n: int, confidence: float = CONFIDENCE) -> float:
    """One-sided upper confidence bound on a binomial proportion."""
    if k >= n:
        return 1.0

    return float(stats.beta.ppf(confidence, k + 1, n - k))


def _bootstrap_stream(cfg: EnsembleConfig) -> np.random.Generator:
    sequence = np.random.SeedSequence(cfg.master_seed, spawn_key=BOOTSTRAP_KEY)
    return np.random.Generator(np.random.PCG64(sequence))


def _bootstrap_upper(
    samples: NDArray[np.float64],
    stream: np.random.Generator,
    n_resamples: int,
    reduce: Callable[[NDArray[np.float64]], NDArray[np.float64]],
) -> NDArray[np.float64]:
    # Percentile bootstrap of reduce(column means)
    n = samples.shape[0]
    draws = np.empty((n_resamples,) + reduce(samples.mean(axis=0)).shape)
    with np.errstate(invalid="ignore"):
        for r in range(n_resamples):
            draws[r] = reduce(samples[stream.integers(0, n, n)].mean(axis=0))

    return np.asarray(np.quantile(draws, CONFIDENCE, axis=0), dtype=np.float64)


def empirical_tail(
    cfg: EnsembleConfig,
    x_levels: Sequence[float],
    functional: str = FUNCTIONAL_CONVOLUTION,
    inputs: Optional[BoundInputs] = None,
) -> EstimateReport:
    """Exceedance fractions of |functional at T| >= x with Clopper-Pearson upper bounds, against tail_bound."""
    if functional not in (FUNCTIONAL_CONVOLUTION, FUNCTIONAL_SOLUTION):
        raise ParameterError("Unknown functional {!r}".format(functional))

    inputs = _default_inputs(cfg) if inputs is None else inputs
    for x in x_levels:
        if x < inputs.eta_val * (1.0 - 1e-12):
            raise ParameterError("x-level {!r} lies below the tail threshold eta={!r}".format(x, inputs.eta_val))

    ensemble = run_ensemble(cfg, nodes=[cfg.grid.n_steps])
    source = ensemble.convolution if functional == FUNCTIONAL_CONVOLUTION else ensemble.values
    magnitudes = np.abs(source[:, 0])
    n = ensemble.n_paths

    counts = [int(np.count_nonzero(magnitudes >= x)) for x in x_levels]
    estimate = tuple(k / n for k in counts)
    ci_upper = tuple(clopper_pearson_upper(k, n) for k in counts)
    bound = tuple(tail_bound(inputs, float(x)) for x in x_levels)
    return EstimateReport(
        quantity="tail:{}".format(functional),
        points=tuple(float(x) for x in x_levels),
        estimate=estimate,
        ci_upper=ci_upper,
        bound=bound,
        passed=tuple(ci <= b for ci, b in zip(ci_upper, bound)),
        n_effective=n,
        flagged_paths=ensemble.n_flagged,
    )


def empirical_moment(
    cfg: EnsembleConfig,
    p: float,
    t_points: Sequence[float],
    inputs: Optional[BoundInputs] = None,
    n_resamples: int = BOOTSTRAP_RESAMPLES,
) -> EstimateReport:
    """Empirical E|X(t)|^p with bootstrap upper bounds, against moment_bound."""
    if not 0.0 < p < cfg.scenario.chars.alpha:
        raise ParameterError("Moment order p must lie in (0, alpha), got {!r}".format(p))

    inputs = _default_inputs(cfg, p) if inputs is None else inputs
    nodes = [cfg.grid.node_index(t) for t in t_points]
    ensemble = run_ensemble(cfg, nodes=nodes)
    samples = np.abs(ensemble.values) ** p

    estimate = samples.mean(axis=0)
    ci_upper = _bootstrap_upper(samples, _bootstrap_stream(cfg), n_resamples, lambda means: means)
    bound = moment_bound(inputs)
    return EstimateReport(
        quantity="moment:p={}".format(p),
        points=tuple(float(t) for t in ensemble.times),
        estimate=tuple(float(v) for v in estimate),
        ci_upper=tuple(float(v) for v in ci_upper),
        bound=tuple(bound for _ in nodes),
        passed=tuple(bool(ci <= bound) for ci in ci_upper),
        n_effective=ensemble.n_paths,
        flagged_paths=ensemble.n_flagged,
    )


def _lag_means(values: NDArray[np.float64], lag: int, p: float, block: int = 512) -> NDArray[np.float64]:
    # Column means of |X[:, k + lag] - X[:, k]|^p, computed in column blocks
    width = values.shape[1] - lag
    means = np.empty(width)
    with np.errstate(invalid="ignore"):
        for start in range(0, width, block):
            stop = min(start + block, width)
            diffs = np.abs(values[:, start + lag:stop + lag] - values[:, start:stop]) ** p
            means[start:stop] = diffs.mean(axis=0)

    return means


def continuity_modulus(
    cfg: EnsembleConfig,
    p: float,
    h_levels: Sequence[float],
    inputs: Optional[BoundInputs] = None,
    n_resamples: int = BOOTSTRAP_RESAMPLES,
) -> EstimateReport:
    """
    sup over nodes t of the empirical E|X(t+h) - X(t)|^p per lag h, with a bootstrap upper bound on the sup taken
    over the most active columns, against continuity_bound. Adds a trend verdict over h.
    """
    if not 0.0 < p < cfg.scenario.chars.alpha:
        raise ParameterError("Moment order p must lie in (0, alpha), got {!r}".format(p))

    dt = cfg.grid.dt
    lags = []
    for h in h_levels:
        if h < 0.0:
            raise ParameterError("Lags must be non-negative, got {!r}".format(h))

        lag = int(round(h / dt))
        if h > 0.0 and lag < 2:
            raise ParameterError("h={!r} is below the grid resolution (need h >= 2 dt = {!r})".format(h, 2.0 * dt))

        lags.append(lag)

    base = _default_inputs(cfg, p) if inputs is None else inputs
    moment_sup = moment_bound(base)
    ensemble = run_ensemble(cfg)
    stream = _bootstrap_stream(cfg)

    estimate, ci_upper, bound = [], [], []
    for h, lag in zip(h_levels, lags):
        if lag == 0:
            estimate.append(0.0)
            ci_upper.append(0.0)
            bound.append(0.0)
            continue

        means = _lag_means(ensemble.values, lag, p)
        top = np.sort(np.argsort(means)[-BOOTSTRAP_COLUMNS:])
        samples = np.abs(ensemble.values[:, top + lag] - ensemble.values[:, top]) ** p
        upper = _bootstrap_upper(samples, stream, n_resamples, lambda m: np.asarray(np.max(m)))

        at_h = dataclasses.replace(base, h=h, eta_window_val=eta_window(base.a, base.T, cfg.scenario.coeffs.g, h))
        estimate.append(float(np.max(means)))
        ci_upper.append(float(upper))
        bound.append(continuity_bound(at_h, h, moment_sup))

    order = np.argsort(h_levels)[::-1]
    descending = [estimate[i] for i in order]
    upper_desc = [ci_upper[i] for i in order]
    monotone = all(descending[i + 1] <= upper_desc[i] for i in range(len(order) - 1))

    rho = float("nan")
    if len(h_levels) >= 2:
        rho = float(stats.spearmanr(h_levels, estimate)[0])

    return EstimateReport(
        quantity="continuity:p={}".format(p),
        points=tuple(float(h) for h in h_levels),
        estimate=tuple(estimate),
        ci_upper=tuple(ci_upper),
        bound=tuple(bound),
        passed=tuple(ci <= b for ci, b in zip(ci_upper, bound)),
        n_effective=ensemble.n_paths,
        flagged_paths=ensemble.n_flagged,
        verdicts={"spearman_positive": bool(rho > 0.0), "monotone_within_ci": monotone},
        statistics={"spearman_rho": rho},
    )


def analytic_contraction(inputs: BoundInputs) -> float:
    """Strong-condition left-hand side for p <= 1, weighted-norm constant at the chosen gamma otherwise."""
    if inputs.p <= 1.0:
        return check_strong_condition(inputs)[1]

    return contraction_constant(inputs, choose_gamma(inputs))


def _distance_ratio(history: Sequence[float]) -> float:
    ratios = [history[i + 1] / history[i] for i in range(len(history) - 1) if history[i] > 0.0]
    return max(ratios, default=0.0)


def picard_rate_study(
    cfg: EnsembleConfig,
    p: float,
    tol: float,
    max_iter: int,
    inputs: Optional[BoundInputs] = None,
) -> PicardReport:
    """Per-path Picard runs: successive-distance ratios and the gap to the direct solver."""
    inputs = _default_inputs(cfg, p) if inputs is None else inputs
    constant = analytic_contraction(inputs)
    scenario = cfg.scenario

    def study_chunk(chunk: Tuple[int, int]) -> List[PicardPath]:
        results = []
        for index in range(*chunk):
            seed = cfg.seed(index)
            x0 = scenario.initial_value(seed)
            noise = scenario.noise_path(cfg.grid, seed)
            try:
                fixed, history = picard_solve(x0, scenario.coeffs, scenario.semigroup, noise, tol, max_iter, p=p)
                direct = euler_solve(x0, scenario.coeffs, scenario.semigroup, noise)
            except PicardDivergenceError as e:
                _LOG.warning("path %d: %s", index, e)
                results.append(
                    PicardPath(index, False, len(e.history), _distance_ratio(e.history), math.inf, tuple(e.history))
                )
                continue
            except StateOverflowError as e:
                _LOG.warning("path %d: %s", index, e)
                results.append(PicardPath(index, False, 0, math.inf, math.inf, ()))
                continue

            gap = metric_dp(fixed, direct, p)
            results.append(PicardPath(index, True, len(history), _distance_ratio(history), gap, tuple(history)))

        return results

    chunks = _chunks(cfg.n_paths, max(1, cfg.chunk_size // 64))
    paths = [path for part in _map_ordered(study_chunk, chunks, cfg.threads) for path in part]
    return PicardReport(constant=constant, slack=PICARD_SLACK, paths=tuple(paths))
