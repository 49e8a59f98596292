"""synthesize: pixel frames for every plane plus the ground-truth Bohm ensemble"""

from argparse import Namespace

from src.cli.commands import emit, make_service


def cmd_synthesize(args: Namespace) -> int:
    service = make_service(args)
    details = service.synthesize()
    emit({"command": "synthesize", "output_dir": str(service.store.base_path),
          "config_hash": service.hash, **details})
    return 0


def register(subparsers, parent) -> None:
    parser = subparsers.add_parser("synthesize", parents=[parent], help="simulate CCD frames and ground truth")
    parser.set_defaults(func=cmd_synthesize)
