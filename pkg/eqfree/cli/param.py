"""
eqfree param subcommand CLI implementation.
"""

import dataclasses

from eqfree.internals.experiment import format_value
from eqfree.internals.models import get_model, model_names


def list_params(args):
    """
    param list implementation
    """
    params = get_model(args.model, args.system).default_params()
    for f in dataclasses.fields(params):
        print(f"{f.name} = {format_value(getattr(params, f.name))}")


def setup(parser):
    """
    param subcommand CLI setup
    """
    subparsers = parser.add_subparsers(metavar="COMMAND", required=True)
    list_p = subparsers.add_parser("list", help="List default parameters of a model")
    list_p.add_argument("model", choices=model_names())
    list_p.add_argument("--system", help="Test system (model testsystem only)")
    list_p.set_defaults(func=list_params)
