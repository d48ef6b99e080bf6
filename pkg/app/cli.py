"""Command-line front end: gen, monitor, simplify, bench and convert."""

import argparse
import logging
import sys
from typing import List, Optional, Sequence

import structlog
from pydantic import ValidationError

from app.config import settings
from app.exceptions import (
    AmbiguousMatch,
    ContractValidationError,
    NotReproducible,
    NoViolationFound,
    ParseError,
    ReplayError,
    TargetTooSmall,
    TraceSimplifierError,
)
from app.library.scenarios import generate
from app.models import RunConfig, Scenario, ScenarioName, Stimulus, Strategy, Trace
from app.processing.contract_parser import load_contracts
from app.processing.event_classifier import extract_stimuli
from app.processing.trace_codec import load_trace, render_canonical, render_stimuli, write_text
from app.services import bench, monitor
from app.services.pipeline import TraceSimplifier, default_boundary
from app.services.simplifier import dump_stats, stats_document

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INPUT_ERROR = 2
EXIT_NOT_REPRODUCIBLE = 3
EXIT_NO_VIOLATION = 4


def configure_logging(level: Optional[str] = None) -> None:
    """Send structlog output to stderr so stdout carries only reports."""
    name = (level or settings.log_level).upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        numeric = logging.INFO
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(numeric),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        write_text(path, text)
        logger.info("Output written", path=path)
    else:
        sys.stdout.write(text)


def cmd_gen(args: argparse.Namespace) -> int:
    scenario = Scenario(name=ScenarioName(args.scenario), target_stimuli=args.stimuli, seed=args.seed)
    _emit(render_stimuli(generate(scenario)), args.out)
    return EXIT_OK


def cmd_monitor(args: argparse.Namespace) -> int:
    contracts = load_contracts(args.contract)
    trace = load_trace(args.trace)
    report = monitor.run(contracts, trace, default_boundary(args.mock))
    sys.stdout.write(monitor.render_report(report))
    return EXIT_VIOLATION if report.violated else EXIT_OK


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    scenario = None
    if args.scenario:
        if args.stimuli is None:
            raise ValueError("--scenario needs --stimuli")
        scenario = Scenario(name=ScenarioName(args.scenario), target_stimuli=args.stimuli, seed=args.seed)
    return RunConfig(
        contract_path=args.contract,
        trace_path=args.trace,
        scenario=scenario,
        strategy=Strategy(args.strategy),
        replays=args.replays,
        seed=args.seed,
        extra_mocked=args.mock,
        out_path=args.out,
        witness_path=args.witness,
        stats_path=args.stats,
    )


def cmd_simplify(args: argparse.Namespace) -> int:
    config = run_config_from_args(args)
    simplifier = TraceSimplifier.from_run_config(config)
    if config.scenario is not None:
        trace: Trace = simplifier.production_run(generate(config.scenario))
    else:
        trace = load_trace(config.trace_path)

    try:
        result = simplifier.simplify_trace(trace, config.strategy)
    except NotReproducible:
        original: List[Stimulus] = simplifier.stimuli_of(trace)
        _emit(render_stimuli(original), config.out_path)
        if config.witness_path:
            write_text(config.witness_path, render_canonical(trace))
        return EXIT_NOT_REPRODUCIBLE

    _emit(render_stimuli(result.stimuli), config.out_path)
    if config.witness_path:
        write_text(config.witness_path, render_canonical(result.violation.witness))
    if config.stats_path:
        document = stats_document(
            result,
            scenario=config.scenario.name.value if config.scenario else None,
            replays_per_candidate=config.replays,
            seed=config.seed,
        )
        write_text(config.stats_path, dump_stats(document))
    logger.info("Simplified", headline=result.violation.headline(), stimuli=len(result.stimuli))
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    grid = bench.load_grid(args.grid)
    only = [name for value in args.only for name in value.split(",") if name]
    cells = bench.grid_cells(grid, only=only, seed=args.seed)
    rows = bench.run_grid(cells, jobs=args.jobs)
    _emit(bench.render_table(rows), args.out)
    return EXIT_OK


def cmd_convert(args: argparse.Namespace) -> int:
    trace = load_trace(args.trace)
    if args.stimuli_only:
        stimuli = extract_stimuli(trace, default_boundary(args.mock))
        _emit(render_stimuli(stimuli), args.out)
    else:
        _emit(render_canonical(trace), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Contract-guided violation trace simplification")
    parser.add_argument("--log-level", default=settings.log_level, help="structlog level (stderr)")
    commands = parser.add_subparsers(dest="command", required=True)
    scenarios = [name.value for name in ScenarioName]

    gen = commands.add_parser("gen", help="generate a violating library stimulus list")
    gen.add_argument("--scenario", required=True, choices=scenarios)
    gen.add_argument("--stimuli", required=True, type=int)
    gen.add_argument("--seed", type=int, default=settings.seed)
    gen.add_argument("--out")
    gen.set_defaults(handler=cmd_gen)

    check = commands.add_parser("monitor", help="run contracts over a trace")
    check.add_argument("--contract", default=settings.contract_path)
    check.add_argument("--trace", required=True)
    check.add_argument("--mock", action="append", default=[])
    check.set_defaults(handler=cmd_monitor)

    simplify = commands.add_parser("simplify", help="shrink the stimuli behind a violation")
    simplify.add_argument("--contract", default=settings.contract_path)
    source = simplify.add_mutually_exclusive_group(required=True)
    source.add_argument("--trace")
    source.add_argument("--scenario", choices=scenarios)
    simplify.add_argument("--stimuli", type=int)
    simplify.add_argument("--strategy", choices=[s.value for s in Strategy], default=settings.strategy)
    simplify.add_argument("--replays", type=int, default=settings.replays_per_candidate)
    simplify.add_argument("--seed", type=int, default=settings.seed)
    simplify.add_argument("--mock", action="append", default=[], help="extra mocked processes, NAME[,NAME...]")
    simplify.add_argument("--out")
    simplify.add_argument("--witness")
    simplify.add_argument("--stats")
    simplify.set_defaults(handler=cmd_simplify)

    table = commands.add_parser("bench", help="shrinking benchmark over the scenario grid")
    table.add_argument("--grid", default=settings.bench_grid_path)
    table.add_argument("--only", action="append", default=[], help="scenario names to keep")
    table.add_argument("--jobs", type=int, default=settings.bench_jobs)
    table.add_argument("--seed", type=int)
    table.add_argument("--out")
    table.set_defaults(handler=cmd_bench)

    convert = commands.add_parser("convert", help="raw or canonical trace to canonical trace or stimuli")
    convert.add_argument("--trace", required=True)
    convert.add_argument("--stimuli-only", action="store_true")
    convert.add_argument("--mock", action="append", default=[])
    convert.add_argument("--out")
    convert.set_defaults(handler=cmd_convert)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except (ParseError, ContractValidationError, TargetTooSmall, ValidationError, ValueError, OSError) as exc:
        logger.error("Input error", command=args.command, error=str(exc))
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT_ERROR
    except NotReproducible as exc:
        logger.error("Violation does not reproduce", error=str(exc))
        return EXIT_NOT_REPRODUCIBLE
    except NoViolationFound as exc:
        logger.error("No violation in input", error=str(exc))
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NO_VIOLATION
    except (AmbiguousMatch, ReplayError, TraceSimplifierError) as exc:
        # exit 1 is reserved for a found violation
        logger.error("Run failed", command=args.command, error=str(exc), error_type=type(exc).__name__)
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
