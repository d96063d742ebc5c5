from typing import Optional

from stablemild.commands import run_studies, scenario_arguments
from stablemild.framework import command
from stablemild.studies import STUDY_CONSTANTS


@command(name=STUDY_CONSTANTS, arguments=scenario_arguments())
def constants(
    config: str,
    out: str = ".",
    seed: Optional[int] = None,
    paths: Optional[int] = None,
    threads: Optional[int] = None,
    print_config: bool = False,
) -> int:
    """
    Computes C1, C2, eta, K_nu, the tail and moment bounds and the contraction constant of the scenario.
    """
    return run_studies([STUDY_CONSTANTS], config, out, seed, paths, threads, print_config)
