"""report: summary table of every comparison report in the output directory"""

from argparse import Namespace

from src.cli.commands import emit, make_service


def cmd_report(args: Namespace) -> int:
    service = make_service(args)
    for row in service.report():
        emit(row)
    return 0


def register(subparsers, parent) -> None:
    parser = subparsers.add_parser("report", parents=[parent], help="summarize comparison reports")
    parser.set_defaults(func=cmd_report)
