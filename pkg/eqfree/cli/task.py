"""
eqfree task subcommand
"""

import eqfree.tasks  # pylint: disable=unused-import
from eqfree.internals.task import __all_tasks__ as all_tasks


def list_tasks(_args):
    """
    eqfree task list implementation
    """
    for name, value in all_tasks.items():
        print(f"{name}: {', '.join(value.models)}  {value.help}".rstrip())


def setup(parser):
    """
    eqfree task subcommand setup
    """
    subp = parser.add_subparsers(metavar="COMMAND", required=True)
    list_p = subp.add_parser("list", help="List tasks and the models they support")
    list_p.set_defaults(func=list_tasks)
