"""
CSV output of branches, curves, time series and diagnostics.

Every file starts with '#' header lines that embed the canonical experiment
text, so that the header alone suffices to re-run the experiment.
"""

import csv
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from eqfree import config
from eqfree.constants import CONFIG_BEGIN, CONFIG_END
from eqfree.internals.coarse import HealingProfile
from eqfree.internals.continuation import Branch, BranchEvent, Curve


def format_number(value, digits: Optional[int] = None) -> str:
    """
    Text of a number with `digits` significant digits.
    """
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    digits = config.CSV_DIGITS if digits is None else digits
    return f"{float(value):.{digits}g}"


def stability_label(stable: Optional[bool]) -> str:
    """
    'stable', 'unstable' or 'marginal'.
    """
    if stable is None:
        return "marginal"
    return "stable" if stable else "unstable"


class CsvTable:
    """
    A CSV file with a commented header, written in one go.
    """

    def __init__(self, path, experiment: str, title: str):
        self.path = Path(path)
        self.header = [title, CONFIG_BEGIN, *experiment.rstrip("\n").split("\n"), CONFIG_END]
        self.columns: List[str] = []
        self.rows: List[Sequence[str]] = []

    def note(self, line: str):
        """
        Add a header line after the experiment.
        """
        self.header.append(line)

    def add_row(self, values: Iterable):
        """
        Append a row, formatting numbers.
        """
        self.rows.append([v if isinstance(v, str) else format_number(v) for v in values])

    def write(self) -> Path:
        """
        Write the file and return its path.
        """
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", encoding="utf-8", newline="") as fobj:
            for line in self.header:
                fobj.write(f"# {line}".rstrip() + "\n")
            writer = csv.writer(fobj, lineterminator="\n")
            writer.writerow(self.columns)
            writer.writerows(self.rows)
        return self.path


def event_line(event: BranchEvent, label: str = "") -> str:
    """
    Header line describing a branch event.
    """
    text = (
        f"event kind={event.kind.value} param={format_number(event.param)} "
        f"index={event.index} arclength={format_number(event.arclength)}"
    )
    return f"{text} branch={label}" if label else text


def write_branch(
    path, experiment: str, branch: Branch, extra: Sequence[str] = (), label: str = ""
) -> Path:
    """
    One row per branch point: parameter, unhealed and healed state, leading
    eigenvalue data, stability, Newton iterations and residual.
    """
    table = CsvTable(path, experiment, f"eqfree branch in {branch.p_name}")
    table.note(f"status {branch.status}")
    for event in branch.events:
        table.note(event_line(event, label))
    for line in extra:
        table.note(line)
    dim = len(branch.points[0].x_unhealed) if branch.points else 0
    table.columns = [
        "param",
        *(f"x_unhealed_{k}" for k in range(dim)),
        *(f"x_healed_{k}" for k in range(dim)),
        "max_abs_lambda",
        "imag_lambda",
        "stable",
        "newton_iters",
        "residual",
    ]
    for point in branch.points:
        table.add_row(
            [
                point.param,
                *point.x_unhealed,
                *point.x_healed,
                point.spectral_radius,
                point.leading_imag,
                stability_label(point.stable),
                point.newton_iters,
                point.residual,
            ]
        )
    return table.write()


def write_curve(path, experiment: str, curve: Curve, extra_columns: Optional[dict] = None) -> Path:
    """
    One row per point of a two-parameter curve.
    """
    table = CsvTable(path, experiment, f"eqfree curve in ({curve.p1_name}, {curve.p2_name})")
    table.note(f"status {curve.status}")
    points = curve.as_array()
    extra_columns = extra_columns or {}
    table.columns = [curve.p1_name, curve.p2_name]
    table.columns += [f"x_{k}" for k in range(points.shape[1] - 2)]
    table.columns += list(extra_columns)
    for i, row in enumerate(points):
        table.add_row([*row, *(values[i] for values in extra_columns.values())])
    return table.write()


def write_series(
    path, experiment: str, title: str, columns: Sequence[str], rows, notes: Sequence[str] = ()
) -> Path:
    """
    A time series or scan, one row per sample.
    """
    table = CsvTable(path, experiment, title)
    for line in notes:
        table.note(line)
    table.columns = list(columns)
    for row in rows:
        table.add_row(row)
    return table.write()


def write_diagnostic(path, experiment: str, profile: HealingProfile) -> Path:
    """
    Separation d(t) after healing with the fitted rates in the header.
    """
    table = CsvTable(path, experiment, "eqfree healing diagnostic")
    table.note(
        f"fit epsilon={format_number(profile.epsilon)} gamma={format_number(profile.gamma)} "
        f"offset={format_number(profile.offset)} log_c={format_number(profile.log_c)}"
    )
    table.columns = ["t", "d"]
    for t, d in zip(profile.times, profile.distance):
        table.add_row([t, d])
    return table.write()
