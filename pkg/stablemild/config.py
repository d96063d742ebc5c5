"""
Scenario files: one sectioned key-value file per scenario, parsed with configparser and validated field by field.
Every error names the offending field and the line it sits on.
"""
import configparser
import dataclasses
import logging
import math
import re
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple, TypeVar

from stablemild.bounds import CONJUGATE_MODES, CONJUGATE_UNIT, BoundInputs, critical_amplitude, default_x_levels
from stablemild.convolution import CoefficientSpec, SemigroupParams, eta
from stablemild.errors import ConfigError
from stablemild.levy import StableCharacteristics
from stablemild.montecarlo import (
    FUNCTIONAL_CONVOLUTION,
    FUNCTIONAL_SOLUTION,
    EnsembleConfig,
    Scenario,
    scenario_bound_inputs,
)
from stablemild.noise import (
    DEFAULT_JUMP_BUDGET,
    ROUTE_EXACT,
    ROUTE_TRUNCATED,
    ROUTES,
    SEED_LIMIT,
    SMALL_JUMP_POLICIES,
    SMALL_JUMPS_GAUSSIAN,
    PathGrid,
)
from stablemild.presets import build_coefficients, make_drift, make_gain, make_profile, sine_profile

_LOG = logging.getLogger(__name__)

SECTIONS = ("process", "semigroup", "coefficients", "simulation", "analysis")

AUTO = "auto"
SINE_CRITICAL = "sine_critical"

_CALL = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")

V = TypeVar("V")


@dataclass(frozen=True)
class PresetCall:
    """A coefficient preset written in call syntax, e.g. affine(0.25, 0)."""

    name: str
    args: Tuple[str, ...] = ()

    def __str__(self) -> str:
        return "{}({})".format(self.name, ", ".join(self.args))


@dataclass(frozen=True)
class ProcessSection:
    alpha: float
    c_plus: float
    c_minus: float
    b: float = 0.0
    strict: bool = False


@dataclass(frozen=True)
class SemigroupSection:
    a: float


@dataclass(frozen=True)
class CoefficientsSection:
    F: PresetCall
    g: PresetCall
    phi: PresetCall
    L_F: Optional[float] = None
    C: Optional[float] = None
    phi_inf: Optional[float] = None


@dataclass(frozen=True)
class SimulationSection:
    T: float
    n_steps: int
    n_paths: int
    seed: int
    route: str = ROUTE_EXACT
    R: float = 1.0
    epsilon: float = 1e-3
    small_jump_policy: str = SMALL_JUMPS_GAUSSIAN
    jump_budget: float = DEFAULT_JUMP_BUDGET
    x0: float = 0.0
    x0_spread: float = 0.0
    threads: int = 1
    chunk_size: int = 1024
    overflow_budget: float = 1e-4


@dataclass(frozen=True)
class AnalysisSection:
    p: float
    x_levels: Optional[Tuple[float, ...]] = None
    t_points: Tuple[float, ...] = (1.0,)
    h_levels: Tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    functional: str = FUNCTIONAL_CONVOLUTION
    tol: float = 1e-12
    max_iter: int = 200
    picard_paths: int = 100
    continuity_paths: Optional[int] = None
    conjugate: str = CONJUGATE_UNIT


@dataclass(frozen=True)
class ScenarioConfig:
    process: ProcessSection
    semigroup: SemigroupSection
    coefficients: CoefficientsSection
    simulation: SimulationSection
    analysis: AnalysisSection

    def with_overrides(
        self, seed: Optional[int] = None, paths: Optional[int] = None, threads: Optional[int] = None
    ) -> "ScenarioConfig":
        changes: Dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = seed

        if paths is not None:
            changes["n_paths"] = paths

        if threads is not None:
            changes["threads"] = threads

        if not changes:
            return self

        updated = dataclasses.replace(self, simulation=dataclasses.replace(self.simulation, **changes))
        validate(updated)
        return updated

    def to_text(self) -> str:
        """The canonical scenario file; parse_scenario(cfg.to_text()) == cfg."""
        return render(self)


def _number(value: float) -> str:
    return repr(float(value))


def _numbers(values: Tuple[float, ...]) -> str:
    return ", ".join(_number(v) for v in values)


_UNITS = {
    "a": "decay rate of S(t) = exp(-a t), 1/time",
    "T": "horizon, time",
    "R": "truncation level, jump size",
    "epsilon": "simulated-jump cut-off, jump size",
    "x0_spread": "half-width of the uniform initial law",
    "h": "lag, time",
    "t_points": "times",
    "h_levels": "lags, time",
}


def render(cfg: ScenarioConfig) -> str:
    lines: List[str] = []

    def section(name: str, entries: List[Tuple[str, Optional[str]]]) -> None:
        lines.append("[{}]".format(name))
        for key, value in entries:
            if value is None:
                continue

            if key in _UNITS:
                lines.append("# {}".format(_UNITS[key]))

            lines.append("{} = {}".format(key, value))

        lines.append("")

    def optional(value: Optional[float]) -> Optional[str]:
        return None if value is None else _number(value)

    pr, sg, co, si, an = cfg.process, cfg.semigroup, cfg.coefficients, cfg.simulation, cfg.analysis
    section("process", [
        ("alpha", _number(pr.alpha)),
        ("c_plus", _number(pr.c_plus)),
        ("c_minus", _number(pr.c_minus)),
        ("b", _number(pr.b)),
        ("strict", "true" if pr.strict else "false"),
    ])
    section("semigroup", [("a", _number(sg.a))])
    section("coefficients", [
        ("F", str(co.F)),
        ("g", str(co.g)),
        ("phi", str(co.phi)),
        ("L_F", optional(co.L_F)),
        ("C", optional(co.C)),
        ("phi_inf", optional(co.phi_inf)),
    ])
    section("simulation", [
        ("T", _number(si.T)),
        ("n_steps", str(si.n_steps)),
        ("n_paths", str(si.n_paths)),
        ("seed", str(si.seed)),
        ("route", si.route),
        ("R", _number(si.R)),
        ("epsilon", _number(si.epsilon)),
        ("small_jump_policy", si.small_jump_policy),
        ("jump_budget", _number(si.jump_budget)),
        ("x0", _number(si.x0)),
        ("x0_spread", _number(si.x0_spread)),
        ("threads", str(si.threads)),
        ("chunk_size", str(si.chunk_size)),
        ("overflow_budget", _number(si.overflow_budget)),
    ])
    section("analysis", [
        ("p", _number(an.p)),
        ("x_levels", AUTO if an.x_levels is None else _numbers(an.x_levels)),
        ("t_points", _numbers(an.t_points)),
        ("h_levels", _numbers(an.h_levels)),
        ("functional", an.functional),
        ("tol", _number(an.tol)),
        ("max_iter", str(an.max_iter)),
        ("picard_paths", str(an.picard_paths)),
        ("continuity_paths", None if an.continuity_paths is None else str(an.continuity_paths)),
        ("conjugate", an.conjugate),
    ])
    return "\n".join(lines)


def _line_numbers(text: str) -> Dict[Tuple[str, str], int]:
    numbers: Dict[Tuple[str, str], int] = {}
    current = ""
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            numbers[(current, "")] = number
        elif line and line[0] not in "#;" and ("=" in line or ":" in line):
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip()
            numbers.setdefault((current, key), number)

    return numbers


class _Section(object):
    """Typed reads from one configparser section, recording which keys were consumed."""

    def __init__(self, parser: configparser.ConfigParser, name: str, lines: Dict[Tuple[str, str], int]) -> None:
        self.name = name
        self.lines = lines
        self.values: Dict[str, str] = dict(parser.items(name)) if parser.has_section(name) else {}
        self.used: List[str] = []

    def fail(self, key: str, msg: str) -> ConfigError:
        line = self.lines.get((self.name, key), self.lines.get((self.name, "")))
        return ConfigError(msg, field="{}.{}".format(self.name, key), line=line)

    def _read(self, key: str, convert: Callable[[str], V], default: Optional[V], required: bool) -> Optional[V]:
        self.used.append(key)
        if key not in self.values:
            if required:
                raise self.fail(key, "missing required field")

            return default

        raw = self.values[key].strip()
        try:
            return convert(raw)
        except (ValueError, TypeError):
            raise self.fail(key, "cannot read {!r} as {}".format(raw, getattr(convert, "__name__", "value")))

    def real(self, key: str, default: Optional[float] = None) -> float:
        value = self._read(key, float, default, default is None)
        assert value is not None
        if not math.isfinite(value):
            raise self.fail(key, "must be finite, got {!r}".format(value))

        return value

    def optional_real(self, key: str) -> Optional[float]:
        value = self._read(key, float, None, False)
        if value is not None and not math.isfinite(value):
            raise self.fail(key, "must be finite, got {!r}".format(value))

        return value

    def integer(self, key: str, default: Optional[int] = None) -> int:
        value = self._read(key, int, default, default is None)
        assert value is not None
        return value

    def optional_integer(self, key: str) -> Optional[int]:
        return self._read(key, int, None, False)

    def boolean(self, key: str, default: bool) -> bool:
        value = self._read(key, _boolean, default, False)
        return bool(value)

    def choice(self, key: str, choices: Tuple[str, ...], default: str) -> str:
        value = self._read(key, str, default, False)
        assert value is not None
        if value not in choices:
            raise self.fail(key, "must be one of {}, got {!r}".format(", ".join(choices), value))

        return value

    def reals(self, key: str, default: Optional[Tuple[float, ...]]) -> Tuple[float, ...]:
        value = self._read(key, _real_list, default, default is None)
        assert value is not None
        return value

    def preset(self, key: str) -> PresetCall:
        value = self._read(key, _preset, None, True)
        assert value is not None
        return value

    def check_unknown(self) -> None:
        for key in self.values:
            if key not in self.used:
                raise self.fail(key, "unknown field")


def _boolean(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True

    if lowered in ("false", "no", "off", "0"):
        return False

    raise ValueError(raw)


_boolean.__name__ = "a boolean"


def _real_list(raw: str) -> Tuple[float, ...]:
    values = tuple(float(part) for part in raw.split(",") if part.strip())
    if not values or not all(math.isfinite(v) for v in values):
        raise ValueError(raw)

    return values


_real_list.__name__ = "a list of finite numbers"


def _preset(raw: str) -> PresetCall:
    match = _CALL.match(raw)
    if match is None:
        raise ValueError(raw)

    name, inner = match.group(1), match.group(2)
    args = tuple(part.strip() for part in inner.split(",")) if inner and inner.strip() else ()
    return PresetCall(name=name, args=args)


_preset.__name__ = "a preset call name(args)"


def parse_scenario(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # type: ignore[assignment, method-assign]
    lines = _line_numbers(text)
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError("malformed scenario file: {}".format(e.message), line=getattr(e, "lineno", None))

    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError("unknown section", field=name, line=lines.get((name, "")))

    for name in SECTIONS:
        if not parser.has_section(name):
            raise ConfigError("missing section", field=name)

    sections = {name: _Section(parser, name, lines) for name in SECTIONS}
    pr, sg, co, si, an = (sections[name] for name in SECTIONS)

    x_levels_raw = an.values.get("x_levels", AUTO).strip()
    cfg = ScenarioConfig(
        process=ProcessSection(
            alpha=pr.real("alpha"),
            c_plus=pr.real("c_plus"),
            c_minus=pr.real("c_minus"),
            b=pr.real("b", 0.0),
            strict=pr.boolean("strict", False),
        ),
        semigroup=SemigroupSection(a=sg.real("a")),
        coefficients=CoefficientsSection(
            F=co.preset("F"),
            g=co.preset("g"),
            phi=co.preset("phi"),
            L_F=co.optional_real("L_F"),
            C=co.optional_real("C"),
            phi_inf=co.optional_real("phi_inf"),
        ),
        simulation=SimulationSection(
            T=si.real("T"),
            n_steps=si.integer("n_steps"),
            n_paths=si.integer("n_paths"),
            seed=si.integer("seed"),
            route=si.choice("route", ROUTES, ROUTE_EXACT),
            R=si.real("R", 1.0),
            epsilon=si.real("epsilon", 1e-3),
            small_jump_policy=si.choice("small_jump_policy", SMALL_JUMP_POLICIES, SMALL_JUMPS_GAUSSIAN),
            jump_budget=si.real("jump_budget", DEFAULT_JUMP_BUDGET),
            x0=si.real("x0", 0.0),
            x0_spread=si.real("x0_spread", 0.0),
            threads=si.integer("threads", 1),
            chunk_size=si.integer("chunk_size", 1024),
            overflow_budget=si.real("overflow_budget", 1e-4),
        ),
        analysis=AnalysisSection(
            p=an.real("p"),
            x_levels=None if x_levels_raw == AUTO else an.reals("x_levels", None),
            t_points=an.reals("t_points", (1.0,)),
            h_levels=an.reals("h_levels", (0.2, 0.1, 0.05, 0.025)),
            functional=an.choice("functional", (FUNCTIONAL_CONVOLUTION, FUNCTIONAL_SOLUTION), FUNCTIONAL_CONVOLUTION),
            tol=an.real("tol", 1e-12),
            max_iter=an.integer("max_iter", 200),
            picard_paths=an.integer("picard_paths", 100),
            continuity_paths=an.optional_integer("continuity_paths"),
            conjugate=an.choice("conjugate", CONJUGATE_MODES, CONJUGATE_UNIT),
        ),
    )
    an.used.append("x_levels")

    for s in sections.values():
        s.check_unknown()

    validate(cfg, lines)
    return cfg


def parse_scenario_file(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fin:
            text = fin.read()
    except OSError as e:
        raise ConfigError("cannot read scenario file {}: {}".format(path, e.strerror))

    _LOG.debug("Parsing scenario %s", path)
    return parse_scenario(text)


def validate(cfg: ScenarioConfig, lines: Optional[Dict[Tuple[str, str], int]] = None) -> None:
    """Field ranges and cross-field rules."""
    lines = {} if lines is None else lines

    def fail(section: str, key: str, msg: str) -> ConfigError:
        return ConfigError(msg, field="{}.{}".format(section, key), line=lines.get((section, key)))

    pr, si, an = cfg.process, cfg.simulation, cfg.analysis
    if not 0.0 < pr.alpha < 2.0:
        raise fail("process", "alpha", "alpha must lie in (0, 2), got {!r}".format(pr.alpha))

    if pr.c_plus < 0.0 or pr.c_minus < 0.0 or pr.c_plus + pr.c_minus <= 0.0:
        raise fail("process", "c_plus", "c_plus and c_minus must be non-negative with a positive sum")

    if pr.alpha == 1.0 and (pr.c_plus != pr.c_minus or pr.b != 0.0):
        raise fail("process", "alpha", "alpha = 1 requires c_plus = c_minus and b = 0")

    if not cfg.semigroup.a > 0.0:
        raise fail("semigroup", "a", "must be positive, got {!r}".format(cfg.semigroup.a))

    if not si.T > 0.0:
        raise fail("simulation", "T", "must be positive, got {!r}".format(si.T))

    for key in ("n_steps", "threads", "chunk_size"):
        if getattr(si, key) < 1:
            raise fail("simulation", key, "must be >= 1, got {!r}".format(getattr(si, key)))

    if si.n_paths < 2:
        raise fail("simulation", "n_paths", "must be >= 2, got {!r}".format(si.n_paths))

    if not 0 <= si.seed < SEED_LIMIT:
        raise fail("simulation", "seed", "must be an unsigned 64-bit integer, got {!r}".format(si.seed))

    if si.x0_spread < 0.0:
        raise fail("simulation", "x0_spread", "must be non-negative, got {!r}".format(si.x0_spread))

    if not 0.0 <= si.overflow_budget <= 1.0:
        raise fail("simulation", "overflow_budget", "must lie in [0, 1], got {!r}".format(si.overflow_budget))

    if si.route == ROUTE_TRUNCATED:
        if not si.R >= 1.0:
            raise fail("simulation", "R", "must be >= 1, got {!r}".format(si.R))

        if not 0.0 < si.epsilon < si.R:
            raise fail(
                "simulation", "epsilon", "need 0 < epsilon < R, got epsilon={!r}, R={!r}".format(si.epsilon, si.R)
            )

    if not 0.0 < an.p < pr.alpha:
        raise fail("analysis", "p", "need 0 < p < alpha = {!r}, got {!r}".format(pr.alpha, an.p))

    for key in ("t_points", "h_levels"):
        for value in getattr(an, key):
            if not 0.0 <= value <= si.T:
                raise fail("analysis", key, "value {!r} lies outside [0, T]".format(value))

    if an.x_levels is not None and any(x <= 0.0 for x in an.x_levels):
        raise fail("analysis", "x_levels", "levels must be positive")

    if not an.tol > 0.0:
        raise fail("analysis", "tol", "must be positive, got {!r}".format(an.tol))

    if an.max_iter < 1:
        raise fail("analysis", "max_iter", "must be >= 1, got {!r}".format(an.max_iter))

    if an.picard_paths < 2:
        raise fail("analysis", "picard_paths", "must be >= 2, got {!r}".format(an.picard_paths))

    if an.continuity_paths is not None and an.continuity_paths < 2:
        raise fail("analysis", "continuity_paths", "must be >= 2, got {!r}".format(an.continuity_paths))

    if cfg.coefficients.g.name == SINE_CRITICAL and an.p > 1.0:
        raise fail("coefficients", "g", "sine_critical needs p <= 1, got p={!r}".format(an.p))


def build_characteristics(cfg: ScenarioConfig) -> StableCharacteristics:
    pr = cfg.process
    if pr.strict:
        return StableCharacteristics.strictly_stable(pr.alpha, pr.c_plus, pr.c_minus)

    return StableCharacteristics(alpha=pr.alpha, c_plus=pr.c_plus, c_minus=pr.c_minus, b=pr.b)


def _critical_profile_amplitude(cfg: ScenarioConfig, chars: StableCharacteristics, fraction: float) -> float:
    """fraction times the sine amplitude at which the strong condition becomes an equality."""
    co, p = cfg.coefficients, cfg.analysis.p
    unit = sine_profile(("1",))
    drift = make_drift(co.F.name, co.F.args, p)
    gain = make_gain(co.phi.name, co.phi.args)
    coeffs = build_coefficients(drift, unit, gain, co.L_F, co.C, co.phi_inf)
    grid = PathGrid(cfg.simulation.T, cfg.simulation.n_steps)
    scenario = Scenario(
        chars=chars, coeffs=coeffs, semigroup=SemigroupParams(cfg.semigroup.a), conjugate=cfg.analysis.conjugate
    )
    inputs = scenario_bound_inputs(scenario, grid, p, 2.0 * grid.dt)
    unit_eta = eta(cfg.semigroup.a, grid.t_end, unit.func)
    amplitude = fraction * critical_amplitude(inputs, unit_eta)
    _LOG.info("sine_critical(%s): amplitude %.10g", fraction, amplitude)
    return amplitude


def build_coefficient_spec(cfg: ScenarioConfig, chars: Optional[StableCharacteristics] = None) -> CoefficientSpec:
    co, p = cfg.coefficients, cfg.analysis.p
    chars = build_characteristics(cfg) if chars is None else chars

    if co.g.name == SINE_CRITICAL:
        if len(co.g.args) != 1:
            raise ConfigError(
                "sine_critical takes one argument, the fraction of the critical amplitude", field="coefficients.g"
            )

        try:
            fraction = float(co.g.args[0])
        except ValueError:
            raise ConfigError(
                "sine_critical needs a numeric fraction, got {!r}".format(co.g.args[0]), field="coefficients.g"
            )

        profile = sine_profile((repr(_critical_profile_amplitude(cfg, chars, fraction)),))
    else:
        profile = make_profile(co.g.name, co.g.args)

    return build_coefficients(
        make_drift(co.F.name, co.F.args, p),
        profile,
        make_gain(co.phi.name, co.phi.args),
        L_F=co.L_F,
        C=co.C,
        phi_inf=co.phi_inf,
    )


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    chars = build_characteristics(cfg)
    si = cfg.simulation
    return Scenario(
        chars=chars,
        coeffs=build_coefficient_spec(cfg, chars),
        semigroup=SemigroupParams(cfg.semigroup.a),
        x0=si.x0,
        x0_spread=si.x0_spread,
        route=si.route,
        R=si.R,
        epsilon=si.epsilon,
        small_jump_policy=si.small_jump_policy,
        jump_budget=si.jump_budget,
        conjugate=cfg.analysis.conjugate,
    )


def build_grid(cfg: ScenarioConfig) -> PathGrid:
    return PathGrid(cfg.simulation.T, cfg.simulation.n_steps)


def build_ensemble(
    cfg: ScenarioConfig, scenario: Optional[Scenario] = None, n_paths: Optional[int] = None
) -> EnsembleConfig:
    si = cfg.simulation
    return EnsembleConfig(
        n_paths=si.n_paths if n_paths is None else n_paths,
        grid=build_grid(cfg),
        master_seed=si.seed,
        scenario=build_scenario(cfg) if scenario is None else scenario,
        threads=si.threads,
        chunk_size=si.chunk_size,
        overflow_budget=si.overflow_budget,
    )


def bound_inputs(cfg: ScenarioConfig, scenario: Optional[Scenario] = None, h: Optional[float] = None) -> BoundInputs:
    grid = build_grid(cfg)
    scenario = build_scenario(cfg) if scenario is None else scenario
    return scenario_bound_inputs(scenario, grid, cfg.analysis.p, 2.0 * grid.dt if h is None else h)


def load(
    path: str, seed: Optional[int] = None, paths: Optional[int] = None, threads: Optional[int] = None
) -> ScenarioConfig:
    """Parses a scenario file and applies command-line overrides."""
    return parse_scenario_file(path).with_overrides(seed=seed, paths=paths, threads=threads)


def x_level_grid(cfg: ScenarioConfig, inputs: BoundInputs) -> List[float]:
    if cfg.analysis.x_levels is not None:
        return list(cfg.analysis.x_levels)

    return default_x_levels(inputs.eta_val)

