"""
Command line interface, end to end on the closed-form test systems.
"""

import csv

import pytest

from eqfree import config
from eqfree.cli import config_type, error_line, main
from eqfree.errors import ConfigError

RELAXATION = """\
[experiment]
model = testsystem
task = equilibrium

[params]
system = relaxation
p = 1.0

[task]
x_start = 0.5
"""


def write(tmp_path, text, name="experiment.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def rows_of(path):
    with open(path, encoding="utf-8") as fobj:
        return list(csv.DictReader(line for line in fobj if not line.startswith("#")))


def fails_with(argv, capsys):
    """
    Run main expecting a failure; return the exit code and the error line.
    """
    with pytest.raises(SystemExit) as info:
        main(argv)
    return info.value.code, capsys.readouterr().err.strip().splitlines()[-1]


class TestRun:
    def test_equilibrium(self, tmp_path, capsys):
        out = tmp_path / "out"
        main(["run", write(tmp_path, RELAXATION), "--out", str(out)])
        printed = capsys.readouterr().out.split()
        assert printed == [str(out / "equilibrium.csv")]
        (row,) = rows_of(printed[0])
        assert float(row["x_unhealed_0"]) == pytest.approx(1.0, abs=1e-7)
        assert float(row["x_healed_0"]) == pytest.approx(1.0, abs=1e-7)
        assert row["stable"] == "stable"

    def test_reruns_are_identical(self, tmp_path):
        experiment = write(tmp_path, RELAXATION)
        main(["run", experiment, "--out", str(tmp_path / "a")])
        main(["run", experiment, "--out", str(tmp_path / "b")])
        first = (tmp_path / "a" / "equilibrium.csv").read_bytes()
        assert first == (tmp_path / "b" / "equilibrium.csv").read_bytes()

    def test_default_output_directory(self, tmp_path):
        main(["run", write(tmp_path, RELAXATION)])
        assert (tmp_path / "out" / "equilibrium.csv").is_file()

    def test_threads_option(self, tmp_path):
        main(["run", write(tmp_path, RELAXATION), "--threads", "2", "--out", str(tmp_path)])
        assert config.THREADS == 2

    def test_missing_model(self, tmp_path, capsys):
        text = RELAXATION.replace("model = testsystem\n", "")
        code, line = fails_with(["run", write(tmp_path, text)], capsys)
        assert code == 2
        assert line.startswith("error: code=2 kind=ConfigError message=")
        assert "'model'" in line

    def test_blow_up(self, tmp_path, capsys):
        text = RELAXATION.replace("relaxation", "fold").replace("p = 1.0", "p = -1.0")
        text = text.replace("x_start = 0.5", "x_start = 0")
        code, line = fails_with(["run", write(tmp_path, text)], capsys)
        assert code == 3
        assert line.startswith("error: code=3 kind=BlowUpError message=task equilibrium: ")

    def test_lifting_outside_domain(self, tmp_path, capsys):
        text = (
            "[experiment]\nmodel = pedestrian\ntask = simulate\n"
            "[params]\nN_per_crowd = 5\n[task]\nx_start = 0.3, 0.1\n"
        )
        code, line = fails_with(["run", write(tmp_path, text)], capsys)
        assert code == 4
        assert "kind=LiftingDomainError" in line

    def test_unsupported_model(self, tmp_path, capsys):
        text = "[experiment]\nmodel = pedestrian\ntask = projective\n"
        code, line = fails_with(["run", write(tmp_path, text)], capsys)
        assert code == 2
        assert "does not support model 'pedestrian'" in line


class TestInformation:
    def test_check_prints_canonical_form(self, tmp_path, capsys):
        main(["check", write(tmp_path, RELAXATION)])
        out = capsys.readouterr().out
        assert out.startswith("[experiment]\nmodel = testsystem\ntask = equilibrium\n")
        assert "x_start = 0.5\n" in out
        assert "t_skip = 1.0\n" in out

    def test_check_missing_requirement(self, tmp_path, capsys):
        text = RELAXATION.replace("task = equilibrium", "task = branch")
        code, line = fails_with(["check", write(tmp_path, text)], capsys)
        assert code == 2
        assert "requires key 'p_name'" in line

    def test_task_list(self, capsys):
        main(["task", "list"])
        out = capsys.readouterr().out
        for name in ("simulate", "equilibrium", "branch", "fold2par", "hopf2par", "scan"):
            assert f"\n{name}: " in f"\n{out}"
        assert "healing-diagnostic: traffic, pedestrian, testsystem" in out

    def test_param_list(self, capsys):
        main(["param", "list", "traffic"])
        out = capsys.readouterr().out.splitlines()
        assert "tau = 0.588" in out
        assert "N = 60" in out

    def test_param_list_test_system(self, capsys):
        main(["param", "list", "testsystem", "--system", "hopf"])
        assert "system = hopf" in capsys.readouterr().out.splitlines()


class TestHelpers:
    def test_config_type(self, monkeypatch):
        monkeypatch.setattr(config, "CSV_DIGITS", config.CSV_DIGITS)
        assert config_type("csv-digits=6") == ("CSV_DIGITS", 6)
        assert config.CSV_DIGITS == 6

    def test_config_type_unknown_key(self):
        with pytest.raises(ValueError):
            config_type("colour=blue")

    def test_error_line_flattens_message(self):
        e = ConfigError("bad\n  value", 3)
        e.task = "branch"
        assert error_line(e) == (
            "error: code=2 kind=ConfigError message=task branch: line 3: bad value"
        )
