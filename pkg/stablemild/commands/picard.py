from typing import Optional

from stablemild.commands import run_studies, scenario_arguments
from stablemild.framework import command
from stablemild.studies import STUDY_PICARD


@command(name=STUDY_PICARD, arguments=scenario_arguments())
def picard(
    config: str,
    out: str = ".",
    seed: Optional[int] = None,
    paths: Optional[int] = None,
    threads: Optional[int] = None,
    print_config: bool = False,
) -> int:
    """
    Runs Picard iteration per path and compares successive-distance ratios with the analytic contraction constant.
    """
    return run_studies([STUDY_PICARD], config, out, seed, paths, threads, print_config)
