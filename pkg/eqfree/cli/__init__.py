"""
Eqfree Command Line Interface
"""

import argparse
import json
import logging
import sys
import traceback

from eqfree import config
from eqfree.errors import EqFreeException

from . import check, param, run, task


def config_type(value: str):
    """
    Parse a --config command line parameter and update global config state
    """
    if "=" not in value:
        raise ValueError("Not a valid config key=value pair")
    key, value = value.split("=", 1)
    key = key.upper().replace("-", "_")

    if not hasattr(config, key):
        raise ValueError("Unknown config key")
    try:
        value = json.loads(value)
    except json.JSONDecodeError:
        pass

    setattr(config, key, value)
    return key, value


def error_line(e: EqFreeException) -> str:
    """
    The single machine-readable line reported for a failed command.
    """
    message = " ".join(str(e).split())
    task_name = getattr(e, "task", None)
    if task_name:
        message = f"task {task_name}: {message}"
    return f"error: code={e.exit_code} kind={type(e).__name__} message={message}"


def main(argv=None):
    """
    main entrypoint for CLI
    """
    parser = argparse.ArgumentParser(prog="eqfree", add_help=False)
    parser.add_argument("--config", "-c", type=config_type, action="append")
    parser.add_argument("--debug", action="store_true")
    # Set configuration which might be needed for sub-parser setups
    args, rest = parser.parse_known_args(argv)

    if args.debug:
        config.DEBUG = True

    logging.basicConfig(
        level=logging.DEBUG if config.DEBUG else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    subparser = parser.add_subparsers(required=True, metavar="COMMAND")
    run.setup(subparser.add_parser("run", help="Run an experiment file"))
    check.setup(subparser.add_parser("check", help="Validate an experiment file"))
    task.setup(subparser.add_parser("task", help="Task information"))
    param.setup(subparser.add_parser("param", help="Model parameter information"))

    parser.add_argument("--help", "-h", action="help")

    rargs = parser.parse_args(rest)
    try:
        rargs.func(rargs)
    except EqFreeException as e:
        if config.DEBUG:
            print(traceback.format_exc(), file=sys.stderr)
        print(error_line(e), file=sys.stderr)
        sys.exit(e.exit_code)
    except Exception:  # pylint: disable=broad-exception-caught
        print(traceback.format_exc(), file=sys.stderr)
        sys.exit(1)
