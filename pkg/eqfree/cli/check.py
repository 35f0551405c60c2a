"""
eqfree check subcommand
"""

import eqfree.tasks  # pylint: disable=unused-import
from eqfree.internals.experiment import dump_config, load_config
from eqfree.internals.task import get_task


def check_experiment(args):
    """
    eqfree check implementation
    """
    experiment = load_config(args.config_file)
    get_task(experiment.task).check(experiment)
    print(dump_config(experiment), end="")


def setup(parser):
    """
    eqfree check subcommand setup
    """
    parser.add_argument("config_file", metavar="config-file", help="Experiment file")
    parser.set_defaults(func=check_experiment)
