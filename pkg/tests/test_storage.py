"""
CSV output files.
"""

import csv

import numpy as np
import pytest

from eqfree import config
from eqfree.internals.coarse import HealingProfile
from eqfree.internals.continuation import Branch, BranchEvent, BranchPoint, Curve, EventKind
from eqfree.internals.storage import (
    format_number,
    stability_label,
    write_branch,
    write_curve,
    write_diagnostic,
)

EXPERIMENT = "[experiment]\nmodel = testsystem\ntask = branch\n"


def read_csv(path):
    """
    Header lines and rows of an output file.
    """
    with open(path, encoding="utf-8") as fobj:
        lines = fobj.read().splitlines()
    header = [line for line in lines if line.startswith("#")]
    rows = list(csv.reader(line for line in lines if not line.startswith("#")))
    return header, rows


def point(param, x, stable):
    return BranchPoint(
        param=param,
        x_unhealed=np.array([x]),
        x_healed=np.array([x + 0.5]),
        eigenvalues=np.array([0.5 + 0.25j, 0.5 - 0.25j]),
        stable=stable,
        newton_iters=3,
        residual=1e-10,
    )


class TestFormatting:
    def test_numbers(self):
        assert format_number(3) == "3"
        assert format_number(np.int64(7)) == "7"
        assert format_number(True) == "1"
        assert format_number(1.0 / 3.0, digits=4) == "0.3333"

    def test_digits_from_config(self, monkeypatch):
        monkeypatch.setattr(config, "CSV_DIGITS", 3)
        assert format_number(np.pi) == "3.14"

    def test_stability_labels(self):
        assert [stability_label(v) for v in (True, False, None)] == [
            "stable",
            "unstable",
            "marginal",
        ]


class TestBranchFile:
    def test_columns_and_events(self, tmp_path):
        branch = Branch(p_name="p", s=0.1, points=[point(1.0, 2.0, True), point(1.5, 2.5, None)])
        branch.events.append(BranchEvent(EventKind.FOLD, 1.25, np.array([2.2]), 1, 0.3))
        header, rows = read_csv(write_branch(tmp_path / "b.csv", EXPERIMENT, branch, ["end x=1"]))
        assert header[0] == "# eqfree branch in p"
        assert "# model = testsystem" in header
        assert "# status complete" in header
        assert "# event kind=fold param=1.25 index=1 arclength=0.3" in header
        assert header[-1] == "# end x=1"
        assert rows[0] == [
            "param",
            "x_unhealed_0",
            "x_healed_0",
            "max_abs_lambda",
            "imag_lambda",
            "stable",
            "newton_iters",
            "residual",
        ]
        assert rows[1][:3] == ["1", "2", "2.5"]
        assert float(rows[1][3]) == pytest.approx(abs(0.5 + 0.25j))
        assert rows[2][5] == "marginal"

    def test_empty_branch(self, tmp_path):
        branch = Branch(p_name="p", s=0.1, status="no equilibrium")
        header, rows = read_csv(write_branch(tmp_path / "b.csv", EXPERIMENT, branch))
        assert "# status no equilibrium" in header
        assert len(rows) == 1


class TestOtherFiles:
    def test_curve_with_extra_column(self, tmp_path):
        curve = Curve("v0", "h", points=[np.array([0.9, 1.2, 0.4]), np.array([0.91, 1.3, 0.5])])
        path = write_curve(tmp_path / "c.csv", EXPERIMENT, curve, {"v0_hopf": [0.88, 0.89]})
        _header, rows = read_csv(path)
        assert rows[0] == ["v0", "h", "x_0", "v0_hopf"]
        assert rows[2] == ["0.91", "1.3", "0.5", "0.89"]

    def test_diagnostic_fit_in_header(self, tmp_path):
        times = np.linspace(0.0, 1.0, 3)
        profile = HealingProfile(
            times=times,
            distance=np.exp(-times),
            healing_times=times,
            healing_distance=np.exp(-times),
            epsilon=-1.0,
            gamma=2.0,
            offset=0.5,
            t_skip=1.0,
        )
        header, rows = read_csv(write_diagnostic(tmp_path / "d.csv", EXPERIMENT, profile))
        assert "# fit epsilon=-1 gamma=2 offset=0.5 log_c=2.5" in header
        assert rows[0] == ["t", "d"]
        assert len(rows) == 4

    def test_creates_directories(self, tmp_path):
        branch = Branch(p_name="p", s=0.1, points=[point(1.0, 2.0, False)])
        path = write_branch(tmp_path / "a" / "b" / "c.csv", EXPERIMENT, branch)
        assert path.is_file()
