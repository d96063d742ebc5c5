"""
Report files. Every file is written to a temporary sibling first and renamed into place, so a reader never sees a
partial report.
"""
import csv
import io
import json
import logging
import math
import os
import tempfile
from typing import Any, List, Sequence

import numpy as np

from stablemild.convolution import SolutionPath
from stablemild.noise import NoisePath

_LOG = logging.getLogger(__name__)

REPORT_FILE = "report.json"
NOISE_FILE = "noise.csv"
JUMPS_FILE = "jumps.csv"
PATHS_FILE = "paths.csv"

ESTIMATE_HEADER = ["point", "estimate", "ci_upper", "bound", "pass"]
PICARD_HEADER = ["path", "iteration", "distance"]


def atomic_write(path: str, content: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)

    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fout:
            fout.write(content)

        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)

        raise

    _LOG.debug("Wrote %s", path)


def _plain(value: Any) -> Any:
    # JSON has no inf or nan; numpy scalars become Python ones
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}

    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]

    if isinstance(value, (bool, np.bool_)):
        return bool(value)

    if isinstance(value, (int, np.integer)):
        return int(value)

    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None

    return value


def render_json(report: Any) -> str:
    return json.dumps(_plain(report), indent=2, sort_keys=True) + "\n"


def render_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])

    return buffer.getvalue()


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"

    if isinstance(value, (float, np.floating)):
        return repr(float(value))

    return str(value)


def write_json(path: str, report: Any) -> None:
    atomic_write(path, render_json(report))


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    atomic_write(path, render_csv(header, rows))


def write_noise(out_dir: str, noise: NoisePath) -> List[str]:
    """Z at the grid nodes and the recorded big jumps."""
    noise_path = os.path.join(out_dir, NOISE_FILE)
    jumps_path = os.path.join(out_dir, JUMPS_FILE)
    write_csv(noise_path, ["t", "Z"], list(zip(noise.grid.times, noise.cumulative)))
    write_csv(jumps_path, ["time", "size"], [list(row) for row in noise.big_jumps])
    return [noise_path, jumps_path]


def write_paths(out_dir: str, paths: Sequence[SolutionPath]) -> str:
    """One column of X per path, sharing the time column."""
    path = os.path.join(out_dir, PATHS_FILE)
    header = ["t"] + ["X{}".format(i) for i in range(len(paths))]
    columns = [paths[0].grid.times] + [p.values for p in paths]
    write_csv(path, header, [list(row) for row in zip(*columns)])
    return path
