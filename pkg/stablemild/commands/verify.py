from typing import Optional

from stablemild.commands import run_studies, scenario_arguments
from stablemild.framework import command
from stablemild.studies import STUDY_CONTINUITY, STUDY_MOMENT, STUDY_TAIL


@command(name=STUDY_TAIL, arguments=scenario_arguments())
def verify_tail(
    config: str,
    out: str = ".",
    seed: Optional[int] = None,
    paths: Optional[int] = None,
    threads: Optional[int] = None,
    print_config: bool = False,
) -> int:
    """
    Holds the Clopper-Pearson upper bounds on the exceedance fractions of the stochastic convolution at T against
    the analytic tail bound.
    """
    return run_studies([STUDY_TAIL], config, out, seed, paths, threads, print_config)


@command(name=STUDY_MOMENT, arguments=scenario_arguments())
def verify_moment(
    config: str,
    out: str = ".",
    seed: Optional[int] = None,
    paths: Optional[int] = None,
    threads: Optional[int] = None,
    print_config: bool = False,
) -> int:
    """
    Holds bootstrap upper bounds on E|X(t)|^p against the uniform moment bound.
    """
    return run_studies([STUDY_MOMENT], config, out, seed, paths, threads, print_config)


@command(name=STUDY_CONTINUITY, arguments=scenario_arguments())
def verify_continuity(
    config: str,
    out: str = ".",
    seed: Optional[int] = None,
    paths: Optional[int] = None,
    threads: Optional[int] = None,
    print_config: bool = False,
) -> int:
    """
    Estimates sup_t E|X(t+h) - X(t)|^p per lag, checks it against the continuity bound and its trend in h.
    """
    return run_studies([STUDY_CONTINUITY], config, out, seed, paths, threads, print_config)
