"""reconstruct: frames to average photon trajectories under a pipeline mode"""

from argparse import Namespace

from src.cli.commands import emit, make_service


def cmd_reconstruct(args: Namespace) -> int:
    service = make_service(args, output_dir=args.frames_dir)
    details = service.reconstruct()
    details.pop("seeds", None)
    emit({"command": "reconstruct", "output_dir": str(service.store.base_path), **details})
    return 0


def register(subparsers, parent) -> None:
    parser = subparsers.add_parser("reconstruct", parents=[parent], help="reconstruct trajectories from frames")
    parser.add_argument("--frames-dir", default=None,
                        help="run directory holding frames/ (defaults to WEAKTRAJ_OUT or output_dir)")
    parser.set_defaults(func=cmd_reconstruct)
