"""compare: correlation report and plot data for two ensembles"""

from argparse import Namespace

from src.cli.commands import emit, make_service
from src.models.report import CongregationStatistic


def cmd_compare(args: Namespace) -> int:
    service = make_service(args)
    report = service.compare(args.ensemble_a, args.ensemble_b, density=args.density,
                             statistic=CongregationStatistic(args.statistic), svg=args.svg)
    emit({"command": "compare", "r_avg": report.r_avg, "congregation": report.congregation,
          "congregation_reference": report.congregation_reference,
          "pairs_skipped": report.counts.get("pairs_skipped", 0)})
    return 0


def register(subparsers, parent) -> None:
    parser = subparsers.add_parser("compare", parents=[parent], help="compare two trajectory ensembles")
    parser.add_argument("ensemble_a", help="ensemble CSV (relative to the output directory or a path)")
    parser.add_argument("ensemble_b", help="reference ensemble CSV")
    parser.add_argument("--density", default=None, help="density CSV; defaults to the last-plane ground truth")
    parser.add_argument("--statistic", choices=[s.value for s in CongregationStatistic], default="ks")
    parser.add_argument("--svg", action="store_true", help="also render compare/overlay.svg")
    parser.set_defaults(func=cmd_compare)
