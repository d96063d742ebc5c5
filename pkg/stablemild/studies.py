"""
The verification suites behind the subcommands. Each study returns a StudyResult; execute() runs a list of them
against one scenario, writes report.json plus the per-study CSVs, prints one PASS/FAIL line per study and maps
the outcome to an exit status.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

from stablemild import reports
from stablemild.bounds import BoundInputs, bound_report, expanded_k_nu, k_nu
from stablemild.config import (
    ScenarioConfig,
    bound_inputs,
    build_ensemble,
    build_grid,
    build_scenario,
    load,
    x_level_grid,
)
from stablemild.convolution import euler_solve
from stablemild.errors import EXIT_OK, EXIT_RUNTIME_ERROR, EXIT_VERIFICATION_FAILED
from stablemild.framework.formatting import format_summary
from stablemild.montecarlo import (
    EstimateReport,
    Scenario,
    continuity_modulus,
    empirical_moment,
    empirical_tail,
    picard_rate_study,
)

_LOG = logging.getLogger(__name__)

SIMULATE_PATHS = 8

STUDY_SIMULATE = "simulate"
STUDY_CONSTANTS = "constants"
STUDY_TAIL = "verify-tail"
STUDY_MOMENT = "verify-moment"
STUDY_CONTINUITY = "verify-continuity"
STUDY_PICARD = "picard"

FULL_SUITE = (STUDY_CONSTANTS, STUDY_SIMULATE, STUDY_TAIL, STUDY_MOMENT, STUDY_CONTINUITY, STUDY_PICARD)


@dataclass
class StudyContext:
    cfg: ScenarioConfig
    scenario: Scenario
    inputs: BoundInputs
    out_dir: str


@dataclass
class StudyResult:
    name: str
    passed: bool
    detail: str
    report: Dict[str, Any]
    runtime_failure: bool = False
    files: List[str] = field(default_factory=list)

    @property
    def summary(self) -> str:
        return format_summary(self.passed, self.name, self.detail)


def _estimate_result(name: str, report: EstimateReport, ctx: StudyContext, filename: str, unit: str) -> StudyResult:
    path = os.path.join(ctx.out_dir, filename)
    reports.write_csv(path, reports.ESTIMATE_HEADER, report.rows())

    detail = "{}/{} {}".format(sum(report.passed), len(report.passed), unit)
    failed_verdicts = [k for k, v in sorted(report.verdicts.items()) if not v]
    if failed_verdicts:
        detail += ", failed: {}".format(", ".join(failed_verdicts))

    return StudyResult(name, report.all_passed, detail, report.to_dict(), files=[path])


def run_constants(ctx: StudyContext) -> StudyResult:
    chars = ctx.scenario.chars
    report = bound_report(ctx.inputs, x_level_grid(ctx.cfg, ctx.inputs))
    report["K_nu_expanded_T"] = expanded_k_nu(chars, ctx.inputs.a, ctx.inputs.phi_inf, ctx.inputs.T)
    report["K_nu_gap"] = k_nu(ctx.inputs, ctx.inputs.T) - k_nu(ctx.inputs, ctx.inputs.h)
    return StudyResult(STUDY_CONSTANTS, True, "{} constants".format(len(report)), report)


def run_simulate(ctx: StudyContext) -> StudyResult:
    """Dumps the noise of path 0 and the solutions of the first few paths."""
    grid = build_grid(ctx.cfg)
    ensemble = build_ensemble(ctx.cfg, ctx.scenario)
    count = min(SIMULATE_PATHS, ensemble.n_paths)

    noises = [ctx.scenario.noise_path(grid, ensemble.seed(i)) for i in range(count)]
    paths = [
        euler_solve(ctx.scenario.initial_value(ensemble.seed(i)), ctx.scenario.coeffs, ctx.scenario.semigroup, noise)
        for i, noise in enumerate(noises)
    ]

    files = reports.write_noise(ctx.out_dir, noises[0])
    files.append(reports.write_paths(ctx.out_dir, paths))
    report = {
        "paths": count,
        "n_steps": grid.n_steps,
        "big_jumps": [int(len(noise.big_jumps)) for noise in noises],
        "final_values": [float(path.values[-1]) for path in paths],
    }
    return StudyResult(STUDY_SIMULATE, True, "{} paths".format(count), report, files=files)


def run_tail(ctx: StudyContext) -> StudyResult:
    ensemble = build_ensemble(ctx.cfg, ctx.scenario)
    levels = x_level_grid(ctx.cfg, ctx.inputs)
    report = empirical_tail(ensemble, levels, ctx.cfg.analysis.functional, ctx.inputs)
    return _estimate_result(STUDY_TAIL, report, ctx, "tail.csv", "points")


def run_moment(ctx: StudyContext) -> StudyResult:
    ensemble = build_ensemble(ctx.cfg, ctx.scenario)
    report = empirical_moment(ensemble, ctx.cfg.analysis.p, ctx.cfg.analysis.t_points, ctx.inputs)
    return _estimate_result(STUDY_MOMENT, report, ctx, "moment.csv", "points")


def run_continuity(ctx: StudyContext) -> StudyResult:
    ensemble = build_ensemble(ctx.cfg, ctx.scenario, n_paths=ctx.cfg.analysis.continuity_paths)
    report = continuity_modulus(ensemble, ctx.cfg.analysis.p, ctx.cfg.analysis.h_levels, ctx.inputs)
    return _estimate_result(STUDY_CONTINUITY, report, ctx, "continuity.csv", "lags")


def run_picard(ctx: StudyContext) -> StudyResult:
    an = ctx.cfg.analysis
    ensemble = build_ensemble(ctx.cfg, ctx.scenario, n_paths=an.picard_paths)
    report = picard_rate_study(ensemble, an.p, an.tol, an.max_iter, ctx.inputs)

    path = os.path.join(ctx.out_dir, "picard.csv")
    reports.write_csv(path, reports.PICARD_HEADER, report.rows())

    converged = len(report.paths) - len(report.non_converged)
    detail = "{}/{} paths converged, max ratio {:.4g} vs constant {:.4g}".format(
        converged, len(report.paths), report.max_ratio, report.constant
    )
    return StudyResult(
        STUDY_PICARD,
        report.all_passed,
        detail,
        report.to_dict(),
        runtime_failure=len(report.non_converged) > 0,
        files=[path],
    )


STUDIES: Dict[str, Callable[[StudyContext], StudyResult]] = {
    STUDY_CONSTANTS: run_constants,
    STUDY_SIMULATE: run_simulate,
    STUDY_TAIL: run_tail,
    STUDY_MOMENT: run_moment,
    STUDY_CONTINUITY: run_continuity,
    STUDY_PICARD: run_picard,
}


def _scenario_summary(cfg: ScenarioConfig, scenario: Scenario) -> Dict[str, Any]:
    # No thread count: reports must not depend on it
    si = cfg.simulation
    return {
        "alpha": cfg.process.alpha,
        "c_plus": cfg.process.c_plus,
        "c_minus": cfg.process.c_minus,
        "b": scenario.chars.b,
        "a": cfg.semigroup.a,
        "coefficients": scenario.coeffs.label,
        "T": si.T,
        "n_steps": si.n_steps,
        "n_paths": si.n_paths,
        "seed": si.seed,
        "route": si.route,
        "p": cfg.analysis.p,
    }


def execute(
    studies: Sequence[str],
    config_path: str,
    out_dir: str,
    seed: Optional[int] = None,
    paths: Optional[int] = None,
    threads: Optional[int] = None,
    print_config: bool = False,
) -> int:
    cfg = load(config_path, seed=seed, paths=paths, threads=threads)
    if print_config:
        print(cfg.to_text(), end="")
        return EXIT_OK

    scenario = build_scenario(cfg)
    ctx = StudyContext(cfg=cfg, scenario=scenario, inputs=bound_inputs(cfg, scenario), out_dir=out_dir)
    os.makedirs(out_dir, exist_ok=True)

    results = []
    for name in studies:
        _LOG.info("Running %s", name)
        results.append(STUDIES[name](ctx))

    document = {
        "scenario": _scenario_summary(cfg, scenario),
        "studies": {result.name: result.report for result in results},
        "pass": {result.name: result.passed for result in results},
        "all_pass": all(result.passed for result in results),
    }
    reports.write_json(os.path.join(out_dir, reports.REPORT_FILE), document)

    for result in results:
        print(result.summary)

    if any(result.runtime_failure for result in results):
        return EXIT_RUNTIME_ERROR

    return EXIT_OK if document["all_pass"] else EXIT_VERIFICATION_FAILED
