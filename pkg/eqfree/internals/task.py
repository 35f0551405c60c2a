"""
Eqfree task internals.
"""

__all_tasks__ = {}

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence

from eqfree.errors import ConfigError, EqFreeException
from eqfree.internals.experiment import ExperimentConfig, TaskOptions, dump_config

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    """
    What a task body gets to work with.
    """

    experiment: ExperimentConfig
    out_dir: Path

    @property
    def options(self) -> TaskOptions:
        """
        The [task] section of the experiment.
        """
        return self.experiment.options

    @property
    def text(self) -> str:
        """
        Canonical experiment text for output headers.
        """
        return dump_config(self.experiment)

    def output_path(self, suffix: str = "") -> Path:
        """
        Path of the main output file, or of a companion file with a suffix.
        """
        path = self.out_dir / self.experiment.output_name
        if suffix:
            path = path.with_name(f"{path.stem}-{suffix}{path.suffix}")
        return path


class Task:
    """
    A named experiment task.
    """

    def __init__(
        self,
        name: Optional[str] = None,
        models: Sequence[str] = (),
        requires: Sequence[str] = (),
        help: str = "",  # pylint: disable=redefined-builtin
    ):
        self.name = self.__class__.__name__ if name is None else name
        self.models = tuple(models)
        self.requires = tuple(requires)
        self.help = help
        self.has_run = False
        self.succeeded = None

        if self.name in __all_tasks__:
            raise ValueError(f"Duplicate task found: {self.name}")

        __all_tasks__[self.name] = self

    def body(self, ctx: RunContext) -> List[Path]:
        """
        Override this method to implement the body of a task.
        """
        raise NotImplementedError("Task.body is not implemented")

    def check(self, experiment: ExperimentConfig):
        """
        Raise ConfigError unless the experiment suits this task.
        """
        if self.models and experiment.model not in self.models:
            raise ConfigError(
                f"task {self.name!r} does not support model {experiment.model!r} "
                f"(supported: {', '.join(self.models)})"
            )
        defaults = TaskOptions()
        for key in self.requires:
            if getattr(experiment.options, key) == getattr(defaults, key):
                raise ConfigError(f"task {self.name!r} requires key {key!r} in [task]")

    def run(self, experiment: ExperimentConfig, out_dir) -> List[Path]:
        """
        Run the task and return the files it wrote.
        """
        self.check(experiment)
        logger.info("Running task: %s (model %s)", self.name, experiment.model)
        try:
            written = self.body(RunContext(experiment, Path(out_dir)))
            self.succeeded = True
        except EqFreeException as e:
            logger.error("Task failed: %s", self.name)
            e.task = self.name
            self.succeeded = False
            raise
        finally:
            self.has_run = True
        for path in written:
            logger.info("wrote %s", path)
        return written

    def __repr__(self):
        return f"<Task name={self.name!r}>"

    def __call__(self, ctx: RunContext):
        return self.body(ctx)


def get_task(name: str) -> Task:
    """
    Look up a registered task.
    """
    if name not in __all_tasks__:
        raise ConfigError(f"unknown task {name!r}, expected one of {', '.join(__all_tasks__)}")
    return __all_tasks__[name]


def task(
    f: Optional[Callable[[RunContext], List[Path]]] = None, **kwargs
):
    """
    Register a function as the body of a task.
    """

    def decorator(func):
        kwargs.setdefault("name", getattr(func, "__name__", "UNKNOWN"))
        kwargs.setdefault("help", (func.__doc__ or "").strip().split("\n")[0])
        this_task = Task(**kwargs)
        this_task.body = func
        return this_task

    if callable(f):
        return decorator(f)

    return decorator
