"""
gapforge command-line entry point.
"""

import argparse
import json
import logging
import os
import sys
from typing import Callable, Dict, List, Optional

from dotenv import load_dotenv

from gapforge import __version__
from gapforge.cli.commands import cmd_bands, cmd_optimize1d, cmd_optimize2d, cmd_sweep
from gapforge.cli.config import load_config, resolve_threads
from gapforge.cli.verify import cmd_verify
from gapforge.errors import GapForgeError
from gapforge.utils.metrics import performance_metrics

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

COMMANDS: Dict[str, Callable] = {
    "bands": cmd_bands,
    "optimize1d": cmd_optimize1d,
    "optimize2d": cmd_optimize2d,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}

HELP = {
    "bands": "Dispersion relation of a fixed potential along a k-path",
    "optimize1d": "Rearrangement optimization of a 1D gap",
    "optimize2d": "Subspace/SDP optimization of a 2D gap",
    "sweep": "Contrast or lattice sweep of optimal gaps",
    "verify": "Run the built-in acceptance checks",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gapforge", description="Bloch bands and spectral gap optimization")
    parser.add_argument("--version", action="version", version=f"gapforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in HELP.items():
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", required=name != "verify", help="JSON or TOML run configuration")
        cmd.add_argument(
            "--threads", type=int, default=None, help="Worker count (default: GAPFORGE_THREADS or all cores)"
        )
        cmd.add_argument("--seed", type=int, default=None, help="Random seed (overrides the config)")
        cmd.add_argument("--out", default=None, help="Output directory (overrides the config)")
        if name == "verify":
            cmd.add_argument(
                "--only", action="append", choices=["1d", "2d", "numerics"], help="Restrict to a group"
            )
            cmd.add_argument("--full", action="store_true", default=None, help="Include the long-running checks")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    # stdout carries results only
    logging.basicConfig(
        level=os.getenv("LOG_LEVEL", "INFO"),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "out": args.out, "threads": args.threads}
    if args.command == "verify":
        overrides.update(only=args.only, full=args.full)

    try:
        cfg = load_config(args.command, args.config, overrides)
        threads = resolve_threads(cfg.threads)
        performance_metrics.clear_metrics()
        return COMMANDS[args.command](cfg, threads)
    except GapForgeError as e:
        logger.error(f"{args.command} failed: {e.message}")
        print(json.dumps(e.to_dict(), default=str), file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
