from typing import Optional

from stablemild.commands import run_studies, scenario_arguments
from stablemild.framework import command
from stablemild.studies import STUDY_SIMULATE


@command(name=STUDY_SIMULATE, arguments=scenario_arguments())
def simulate(
    config: str,
    out: str = ".",
    seed: Optional[int] = None,
    paths: Optional[int] = None,
    threads: Optional[int] = None,
    print_config: bool = False,
) -> int:
    """
    Simulates the first paths of the scenario and writes noise.csv, jumps.csv and paths.csv.
    """
    return run_studies([STUDY_SIMULATE], config, out, seed, paths, threads, print_config)
