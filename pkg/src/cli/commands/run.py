"""run: synthesize, reconstruct and compare in one invocation"""

from argparse import Namespace

from src.cli.commands import emit, make_service


def cmd_run(args: Namespace) -> int:
    service = make_service(args)
    report = service.run(svg=args.svg)
    emit({"command": "run", "output_dir": str(service.store.base_path), "mode": service.cfg.mode.label(),
          "r_avg": report.r_avg, "congregation": report.congregation})
    return 0


def register(subparsers, parent) -> None:
    parser = subparsers.add_parser("run", parents=[parent], help="synthesize -> reconstruct -> compare")
    parser.add_argument("--svg", action="store_true")
    parser.set_defaults(func=cmd_run)
