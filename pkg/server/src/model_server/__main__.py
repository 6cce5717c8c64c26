"""Command line entry: load a model and serve it.

    python -m model_server --model tiny --port 8100
    model-server --model bart-base --device cpu
"""

from __future__ import annotations

import argparse
import logging
import sys

import uvicorn

from .app import create_app
from .config import PRESETS, ConfigError, load_config
from .engine import ModelEngine, ModelLoadError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="model-server",
        description="Serve a summarization model over the simulator's wire protocol.",
    )
    parser.add_argument(
        "--model",
        required=True,
        help=f"preset name ({', '.join(sorted(PRESETS))}) or a path to a JSON config",
    )
    parser.add_argument("--device", default=None, help="torch device, e.g. cpu or cuda")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--log-level", default="info", choices=["debug", "info", "warning", "error"])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        config = load_config(args.model, device=args.device)
        engine = ModelEngine(config)
    except (ConfigError, ModelLoadError) as exc:
        print(f"model-server: {exc}", file=sys.stderr)
        return 1
    uvicorn.run(create_app(engine), host=args.host, port=args.port, log_level=args.log_level)
    return 0


if __name__ == "__main__":
    sys.exit(main())
