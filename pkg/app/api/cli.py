"""
Command Line Interface
run / plot / validate
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import orjson

from app.config import settings
from app.core.exception_handlers import EXIT_FAULT, EXIT_OK, handle_errors
from app.core.runner import run_scenario
from app.models.schemas import ControllerKind
from app.services.plotting import emit_plots
from app.services.scenario_loader import describe, load_scenario
from app.services.trace import write_trace
from app.utils.logger import setup_logger

logger = setup_logger(__name__)


@handle_errors
def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, controller=args.controller)
    result = run_scenario(scenario)

    out_dir = Path(args.out)
    stem = f"{scenario.name}_{scenario.controller.value}"
    trace_path = write_trace(result.trace, out_dir / f"{stem}.csv")
    summary_json = orjson.dumps(result.summary.model_dump(mode="json"), option=orjson.OPT_INDENT_2)
    summary_path = out_dir / f"{stem}_summary.json"
    summary_path.write_bytes(summary_json)
    logger.info(f"💾 Trace written to {trace_path}, summary to {summary_path}")

    if not args.quiet:
        print(summary_json.decode())
    # the runner has already logged the fault
    return EXIT_FAULT if result.fault is not None else EXIT_OK


@handle_errors
def cmd_plot(args: argparse.Namespace) -> int:
    script = emit_plots(args.trace, out=args.out, compare=args.compare, tau=args.tau)
    print(script)
    return EXIT_OK


@handle_errors
def cmd_validate(args: argparse.Namespace) -> int:
    print(describe(load_scenario(args.scenario)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="droopsim",
        description="DC microgrid adaptive droop control simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario")
    run.add_argument("scenario", help="scenario TOML file")
    run.add_argument("--out", default=settings.OUTPUT_DIR, help="output directory")
    run.add_argument("--controller", choices=[k.value for k in ControllerKind], default=None)
    run.add_argument("--quiet", action="store_true", help="do not print the summary")
    run.set_defaults(func=cmd_run)

    plot = sub.add_parser("plot", help="write a plotting script for a trace")
    plot.add_argument("trace", help="trace CSV")
    plot.add_argument("--compare", default=None, help="second trace for ISE comparison")
    plot.add_argument("--out", default=None, help="script path")
    plot.add_argument("--tau", type=float, default=settings.ISE_WINDOW, help="ISE window (s)")
    plot.set_defaults(func=cmd_plot)

    validate = sub.add_parser("validate", help="parse and validate a scenario")
    validate.add_argument("scenario", help="scenario TOML file")
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
