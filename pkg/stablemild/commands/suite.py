from typing import Optional

from stablemild.commands import run_studies, scenario_arguments
from stablemild.framework import command
from stablemild.studies import FULL_SUITE


@command(name="all", arguments=scenario_arguments())
def run_all(
    config: str,
    out: str = ".",
    seed: Optional[int] = None,
    paths: Optional[int] = None,
    threads: Optional[int] = None,
    print_config: bool = False,
) -> int:
    """Every study in one report."""
    return run_studies(FULL_SUITE, config, out, seed, paths, threads, print_config)
