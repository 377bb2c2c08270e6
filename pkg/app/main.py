import argparse
import sys
from typing import List, Optional

from loguru import logger
from pydantic import ValidationError

from app.config.settings import settings
from app.handlers.command_handler import EXIT_SCHEMA, command_handler
from app.models.run import Command, RunConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fano-cqed",
        description="Fano spectra of a dipole coupled to a microdisk cavity: simulate, fit, tabulate, regress",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", type=str, help="JSON parameter document")
    common.add_argument("--output", type=str, required=True, help="output file (CSV or JSON)")
    common.add_argument("--seed", type=int, default=None, help="noise seed override")
    common.add_argument("--threads", type=int, default=settings.threads, help="worker threads for fit windows")
    common.add_argument("--tolerance", type=float, default=None, help="fit tolerance or regression threshold")
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")

    sub.add_parser(Command.SIMULATE.value, parents=[common], help="closed-form or numeric spectrum to CSV")
    fit = sub.add_parser(Command.FIT.value, parents=[common], help="fit a CSV trace, JSON report out")
    fit.add_argument("--trace", type=str, required=True, help="CSV trace to fit")
    fit.add_argument("--overlay", type=str, default=None, help="CSV of model curve and residuals")
    sub.add_parser(Command.MODES.value, parents=[common], help="scattering Q, splitting and g per mode row")
    sub.add_parser(Command.REGRESS.value, parents=[common], help="numeric vs closed-form room-temperature report")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    logger.remove()
    logger.add(sys.stderr, level="WARNING" if args.quiet else settings.log_level)

    try:
        config = RunConfig(
            command=args.command,
            input=args.input,
            output=args.output,
            trace=getattr(args, "trace", None),
            overlay=getattr(args, "overlay", None),
            seed=args.seed,
            threads=args.threads,
            tolerance=args.tolerance,
            quiet=args.quiet,
        )
    except ValidationError as e:
        logger.error(f"Invalid arguments: {str(e)}")
        return EXIT_SCHEMA

    logger.info(f"Running {config.command.value} ({settings.app_env})")
    code = command_handler.run(config)
    logger.info(f"{config.command.value} finished with exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
