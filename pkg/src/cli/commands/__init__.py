"""
Subcommand modules. Each exposes ``register(subparsers, parent)``.
"""

import json
from argparse import Namespace
from typing import Any

from src.models.config import PipelineMode, RunConfig, load_run_config, parse_run_config
from src.services.pipeline_service import PipelineService


def load_config(args: Namespace) -> RunConfig:
    """Run configuration with the --mode and --seed overrides applied"""
    cfg = load_run_config(args.config) if args.config else RunConfig()
    if args.mode or args.seed is not None:
        data = cfg.model_dump(mode="json")
        if args.mode:
            data["mode"] = PipelineMode.parse(args.mode).model_dump(mode="json")
        if args.seed is not None:
            data["sensor"]["noise"]["rng_seed"] = args.seed
        cfg = parse_run_config(data)
    return cfg


def make_service(args: Namespace, output_dir: str | None = None) -> PipelineService:
    return PipelineService(load_config(args), jobs=args.jobs, force=args.force, output_dir=output_dir)


def emit(payload: dict[str, Any]) -> None:
    """One JSON line on stdout"""
    print(json.dumps(payload, sort_keys=True, default=str))
