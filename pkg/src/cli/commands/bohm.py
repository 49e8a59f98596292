"""bohm: reference Bohm ensemble from the configured wavefield"""

from argparse import Namespace

from src.cli.commands import emit, make_service


def cmd_bohm(args: Namespace) -> int:
    service = make_service(args)
    details = service.bohm(args.method, integrator=args.integrator, metric=args.metric)
    emit({"command": "bohm", "output_dir": str(service.store.base_path), **details})
    return 0


def register(subparsers, parent) -> None:
    parser = subparsers.add_parser("bohm", parents=[parent], help="generate a reference Bohm ensemble")
    parser.add_argument("--method", choices=["cdf", "phase", "cvt", "slope"], default="cdf")
    parser.add_argument("--integrator", choices=["midpoint", "euler"], default="midpoint",
                        help="phase method only")
    parser.add_argument("--metric", choices=["probability", "position"], default="probability",
                        help="cvt method only")
    parser.set_defaults(func=cmd_bohm)
