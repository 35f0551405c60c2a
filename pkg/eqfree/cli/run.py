"""
The run subcommand
"""

import dataclasses
import logging
from pathlib import Path

import eqfree.tasks  # pylint: disable=unused-import
from eqfree import config
from eqfree.internals.experiment import load_config
from eqfree.internals.task import get_task
from eqfree.internals.utils import cast_param

logger = logging.getLogger(__name__)


def run_experiment(args):
    """
    eqfree run entrypoint
    """
    experiment = load_config(args.config_file)
    if args.threads is not None:
        config.THREADS = args.threads
    if args.seed is not None:
        params = experiment.params
        if not hasattr(params, "seed"):
            logger.warning("model %s has no seed, ignoring --seed", experiment.model)
        else:
            seeded = dataclasses.replace(params, seed=cast_param(params, "seed", args.seed))
            experiment = experiment.replace(params=seeded)

    out_dir = Path(args.out if args.out is not None else config.OUTPUT_DIR)
    written = get_task(experiment.task).run(experiment, out_dir)
    for path in written:
        print(path)


def setup(parser):
    """
    eqfree run subcommand setup
    """
    parser.add_argument("config_file", metavar="config-file", help="Experiment file")
    parser.add_argument("--out", help="Output directory (default: config OUTPUT_DIR)")
    parser.add_argument("--seed", type=int, help="Override the model's random seed")
    parser.add_argument("--threads", type=int, help="Workers for Jacobian columns")
    parser.set_defaults(func=run_experiment)
