"""
Subcommands. Every module in this package is scanned for @command definitions.
"""
from typing import List, Optional, Sequence

from stablemild.framework import Argument, Flag
from stablemild.framework.args import ArgumentDefinition
from stablemild.studies import execute


def scenario_arguments() -> List[ArgumentDefinition]:
    # Fresh definitions per command; the wrapper binds each one to a keyword
    return [
        Argument("-c", "--config", name="path", help="Scenario file."),
        Argument("-o", "--out", name="dir", help="Directory receiving report.json and the CSV files."),
        Argument(None, "--seed", name="n", type=int, help="Override the master seed."),
        Argument(None, "--paths", name="n", type=int, help="Override the number of Monte Carlo paths."),
        Argument(None, "--threads", name="n", type=int, help="Worker threads; never changes the results."),
        Flag(None, "--print-config", help="Print the canonical scenario file and exit."),
    ]


def run_studies(
    studies: Sequence[str],
    config: str,
    out: str,
    seed: Optional[int],
    paths: Optional[int],
    threads: Optional[int],
    print_config: bool,
) -> int:
    return execute(studies, config, out, seed=seed, paths=paths, threads=threads, print_config=print_config)
