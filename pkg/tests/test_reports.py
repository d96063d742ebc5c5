import json
import math
import os

import numpy as np

from stablemild import reports
from stablemild.convolution import SolutionPath
from stablemild.noise import ROUTE_TRUNCATED, NoisePath, PathGrid


class TestJson:

    def test_sorted_and_plain(self):
        report = {"b": np.float64(1.5), "a": [np.int64(2), np.bool_(True)], "c": (math.inf, math.nan)}
        text = reports.render_json(report)
        assert json.loads(text) == {"a": [2, True], "b": 1.5, "c": [None, None]}
        assert text.index('"a"') < text.index('"b"') < text.index('"c"')
        assert text.endswith("\n")

    def test_write(self, tmp_path):
        path = str(tmp_path / "nested" / reports.REPORT_FILE)
        reports.write_json(path, {"all_pass": False})
        with open(path) as fin:
            assert json.load(fin) == {"all_pass": False}

        assert os.listdir(str(tmp_path / "nested")) == [reports.REPORT_FILE]


class TestCsv:

    def test_cells(self):
        text = reports.render_csv(reports.ESTIMATE_HEADER, [[0.1, 0.25, 0.3, 1.0, True], [2, 0.0, 1e-300, 0.5, False]])
        assert text.splitlines() == [
            "point,estimate,ci_upper,bound,pass",
            "0.1,0.25,0.3,1.0,true",
            "2,0.0,1e-300,0.5,false",
        ]

    def test_noise_and_jumps(self, tmp_path):
        grid = PathGrid(1.0, 2)
        noise = NoisePath(
            grid=grid,
            increments=np.array([0.5, 1.5]),
            route=ROUTE_TRUNCATED,
            R=1.0,
            big_jumps=np.array([[0.75, 1.25]]),
        )
        files = reports.write_noise(str(tmp_path), noise)
        assert [os.path.basename(f) for f in files] == [reports.NOISE_FILE, reports.JUMPS_FILE]

        with open(files[0]) as fin:
            assert fin.read().splitlines() == ["t,Z", "0.0,0.0", "0.5,0.5", "1.0,2.0"]

        with open(files[1]) as fin:
            assert fin.read().splitlines() == ["time,size", "0.75,1.25"]

    def test_paths(self, tmp_path):
        grid = PathGrid(1.0, 2)
        paths = [
            SolutionPath(grid=grid, values=np.array([0.0, 1.0, 2.0]), x0=0.0),
            SolutionPath(grid=grid, values=np.array([1.0, 0.5, 0.25]), x0=1.0),
        ]
        with open(reports.write_paths(str(tmp_path), paths)) as fin:
            assert fin.read().splitlines() == ["t,X0,X1", "0.0,0.0,1.0", "0.5,1.0,0.5", "1.0,2.0,0.25"]
