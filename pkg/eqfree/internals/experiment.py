"""
Experiment files.

An experiment file is plain text with `key = value` lines grouped under the
sections [experiment], [params], [eqfree] and [task]. `#` and `;` start
comments. Unknown keys, duplicate keys and values of the wrong type are
errors that name their line.
"""

import dataclasses
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from eqfree.constants import CONFIG_BEGIN, CONFIG_END
from eqfree.errors import ConfigError
from eqfree.internals.models import get_model
from eqfree.internals.operators import EqFreeConfig, Model, ParameterFamily

SECTIONS = ("experiment", "params", "eqfree", "task")

Raw = Dict[str, Dict[str, Tuple[str, int]]]


# pylint: disable=too-many-instance-attributes
@dataclass(frozen=True)
class TaskOptions:
    """
    Options of the experiment tasks.

    Which fields a task needs is declared with the task itself.
    """

    p_name: str = ""
    p_start: Optional[float] = None
    x_start: Tuple[float, ...] = ()
    s: float = 0.01
    n_points: int = 50
    p_range: Optional[Tuple[float, ...]] = None
    x_range: Optional[Tuple[float, ...]] = None
    p2_name: str = ""
    s2: float = 0.01
    n_points2: int = 10
    p2_range: Optional[Tuple[float, ...]] = None
    onset: str = "eigenvalue"
    width: Optional[float] = None
    track: bool = False
    scan_values: Tuple[float, ...] = ()
    duration: float = 100.0
    every: int = 100
    horizon: float = 100.0
    lift_param: str = ""
    lift_values: Tuple[float, ...] = ()
    dt_macro: float = 1.0
    n_steps: int = 10
    threshold: float = 1e-3
    t_max: float = 1000.0
    n_maps: int = 2

    def __post_init__(self):
        for name in ("p_range", "x_range", "p2_range"):
            bounds = getattr(self, name)
            if bounds is not None and (len(bounds) != 2 or bounds[0] > bounds[1]):
                raise ConfigError(f"{name} must be two ascending values")
        if self.onset not in ("eigenvalue", "amplitude"):
            raise ConfigError(f"onset must be 'eigenvalue' or 'amplitude', got {self.onset!r}")
        if self.n_points < 2 or self.every < 1 or self.n_steps < 0 or self.n_maps < 1:
            raise ConfigError("n_points, every, n_steps and n_maps are out of range")


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything needed to re-run an experiment.
    """

    model: str
    task: str
    params: Any
    eqfree: EqFreeConfig = field(default_factory=EqFreeConfig)
    options: TaskOptions = field(default_factory=TaskOptions)
    output: str = ""

    def make_model(self) -> Model:
        """
        The model instance for this experiment.
        """
        return get_model(self.model, getattr(self.params, "system", None))

    def family(self) -> ParameterFamily:
        """
        The model bound to the experiment parameters.
        """
        return ParameterFamily(self.make_model(), self.params)

    @property
    def output_name(self) -> str:
        """
        File name of the main output.
        """
        return self.output or f"{self.task}.csv"

    def replace(self, **changes) -> "ExperimentConfig":
        """
        Copy with some fields changed.
        """
        return dataclasses.replace(self, **changes)


def _strip_comment(line: str) -> str:
    for marker in ("#", ";"):
        if marker in line:
            line = line.split(marker, 1)[0]
    return line.strip()


def parse_sections(text: str) -> Raw:
    """
    Split an experiment file into sections of (value, line number) pairs.
    """
    sections: Raw = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            current = line[1:-1].strip()
            if current not in SECTIONS:
                raise ConfigError(f"unknown section [{current}]", lineno)
            if current in sections:
                raise ConfigError(f"section [{current}] appears twice", lineno)
            sections[current] = {}
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value' or a [section] header", lineno)
        if current is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno)
        if key in sections[current]:
            first = sections[current][key][1]
            raise ConfigError(
                f"duplicate key {key!r} in [{current}], first set on line {first}", lineno
            )
        sections[current][key] = (value, lineno)
    return sections


def _parse_float(text: str, key: str, lineno: int) -> float:
    try:
        value = float(text)
    except ValueError as e:
        raise ConfigError(f"{key} expects a number, got {text!r}", lineno) from e
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite, got {text!r}", lineno)
    return value


def coerce(text: str, kind, key: str, lineno: int):
    """
    Convert text to the annotated type of a dataclass field.
    """
    origin = typing.get_origin(kind)
    args = typing.get_args(kind)
    if origin is typing.Union and type(None) in args:
        if text.lower() == "none":
            return None
        inner = next(arg for arg in args if arg is not type(None))
        return coerce(text, inner, key, lineno)
    if origin is tuple:
        if not text:
            return ()
        return tuple(_parse_float(part.strip(), key, lineno) for part in text.split(","))
    if kind is bool:
        lowered = text.lower()
        if lowered in ("true", "yes", "1"):
            return True
        if lowered in ("false", "no", "0"):
            return False
        raise ConfigError(f"{key} expects true or false, got {text!r}", lineno)
    if kind is int:
        try:
            return int(text)
        except ValueError as e:
            raise ConfigError(f"{key} expects an integer, got {text!r}", lineno) from e
    if kind is float:
        return _parse_float(text, key, lineno)
    return text


def format_value(value) -> str:
    """
    Canonical text of a field value.
    """
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _build(cls, entries: Dict[str, Tuple[str, int]], section: str, fixed: Optional[Dict] = None):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = dict(fixed or {})
    for key, (text, lineno) in entries.items():
        if key not in names:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        kwargs[key] = coerce(text, hints[key], key, lineno)
    try:
        return cls(**kwargs)
    except ConfigError as e:
        lines = [lineno for _, lineno in entries.values()]
        raise ConfigError(f"[{section}] {e}", min(lines) if lines else None) from e


def loads_config(text: str) -> ExperimentConfig:
    """
    Parse the text of an experiment file.
    """
    sections = parse_sections(text)
    experiment = sections.get("experiment", {})
    for key in experiment:
        if key not in ("model", "task", "output"):
            raise ConfigError(f"unknown key {key!r} in [experiment]", experiment[key][1])
    for key in ("model", "task"):
        if key not in experiment or not experiment[key][0]:
            raise ConfigError(f"missing required key {key!r} in [experiment]")

    model_name, model_line = experiment["model"]
    params_raw = sections.get("params", {})
    system = params_raw["system"][0] if "system" in params_raw else None
    try:
        model = get_model(model_name, system)
    except ConfigError as e:
        raise ConfigError(str(e), model_line) from e

    eqfree_raw = sections.get("eqfree", {})
    return ExperimentConfig(
        model=model_name,
        task=experiment["task"][0],
        params=_build(model.parameters, params_raw, "params"),
        eqfree=_build(EqFreeConfig, eqfree_raw, "eqfree", _eqfree_defaults(model, eqfree_raw)),
        options=_build(TaskOptions, sections.get("task", {}), "task"),
        output=experiment.get("output", ("", 0))[0],
    )


def _eqfree_defaults(model: Model, entries) -> Dict[str, Any]:
    defaults = model.default_eqfree()
    values = {f.name: getattr(defaults, f.name) for f in dataclasses.fields(defaults)}
    if "t_skip" in entries and "t0" not in entries:
        # t0 follows t_skip
        del values["t0"]
    return values


def load_config(path) -> ExperimentConfig:
    """
    Read an experiment file.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"experiment file {str(path)!r} does not exist")
    return loads_config(path.read_text(encoding="utf-8"))


def dump_config(cfg: ExperimentConfig) -> str:
    """
    Canonical text of an experiment, listing every field.
    """
    lines = [
        "[experiment]",
        f"model = {cfg.model}",
        f"task = {cfg.task}",
        f"output = {cfg.output}",
    ]
    for section, obj in (("params", cfg.params), ("eqfree", cfg.eqfree), ("task", cfg.options)):
        lines.append("")
        lines.append(f"[{section}]")
        for f in dataclasses.fields(obj):
            lines.append(f"{f.name} = {format_value(getattr(obj, f.name))}")
    return "\n".join(line.rstrip() for line in lines) + "\n"


def config_from_header(path) -> ExperimentConfig:
    """
    Re-load the experiment embedded in the header of an output file.
    """
    lines = []
    inside = False
    with open(path, "r", encoding="utf-8") as fobj:
        for line in fobj:
            if not line.startswith("#"):
                break
            body = line[1:].rstrip("\n")
            body = body[1:] if body.startswith(" ") else body
            if body == CONFIG_BEGIN:
                inside = True
            elif body == CONFIG_END:
                return loads_config("\n".join(lines))
            elif inside:
                lines.append(body)
    raise ConfigError(f"{path} has no embedded experiment")
