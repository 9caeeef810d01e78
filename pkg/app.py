import argparse
import json
import logging
import sys
import time
import uuid
from typing import Optional, Sequence

from pydantic import ValidationError

from commands.handlers import (
    COMMANDS,
    EXIT_FAILED,
    EXIT_INPUT,
    EXIT_RESOURCE,
    create_error_response,
    create_success_response,
    render_report,
    write_report,
)
from config.settings import VERSION, RunConfig, settings
from models.errors import (
    DimensionMismatch,
    NotCPTP,
    NotPure,
    OutOfRange,
    ParseError,
    ResourceLimit,
    UndefinedEvolution,
)

logger = logging.getLogger(__name__)

# bad files or arguments, as opposed to failed checks
INPUT_ERRORS = (ParseError, ValidationError, json.JSONDecodeError, OutOfRange, DimensionMismatch, NotCPTP, NotPure)


def generate_run_id():
    """Generate a unique run ID for tracing"""
    return str(uuid.uuid4())


def configure_logging(level: str) -> None:
    # stdout carries the report
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="seed for every randomized step")
    common.add_argument("--tol", type=float, help="numerical tolerance of pass/fail checks")
    common.add_argument("--samples", type=int, help="number of sampled channel tuples")
    common.add_argument("--budget", type=int, help="largest state vector (amplitudes) a run may allocate")
    common.add_argument("--workers", type=int, help="worker threads; never changes results")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--timing", action="store_true", help="record wall time in the report")

    parser = argparse.ArgumentParser(
        prog="acausal",
        description="Simulator for process matrices with indefinite causal order via post-selected CTCs",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("validate", parents=[common], help="check whether a process file is a valid process")
    p.add_argument("process_file")
    p.add_argument("--mode", choices=["random", "basis"], default="random")

    p = sub.add_parser("switch", parents=[common], help="build the n-party quantum switch")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--check-equivalence", action="store_true")
    p.add_argument("--emit-circuit", action="store_true")

    p = sub.add_parser("det", parents=[common], help="simulate the deterministic process w_det_n")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--simulate", choices=["acausal", "ordered", "both"], default="both")
    p.add_argument("--channels", default="identity", help="identity, random:SEED, unitary:SEED, dephasing:P, amplitude_damping:G, depolarizing:P or file:PATH")
    p.add_argument("--emit-circuit", action="store_true")

    p = sub.add_parser("game", parents=[common], help="success probabilities of the causal game")
    p.add_argument("--n", type=int, nargs="+", default=[3, 4, 5])
    p.add_argument("--strategy", choices=["process", "causal-guess", "brute-force", "all"], default="all")

    p = sub.add_parser("pctc", parents=[common], help="evolve a state through a gate with P-CTC loops")
    p.add_argument("unitary_file", nargs="?")
    p.add_argument("psi_file", nargs="?")
    p.add_argument("--teleport", action="store_true", help="run the post-selected teleportation demo")
    p.add_argument("--dim", type=int, default=2)

    return parser


def _options(args: argparse.Namespace) -> tuple[list[str], dict]:
    if args.subcommand == "validate":
        return [args.process_file], {"mode": args.mode}
    if args.subcommand == "switch":
        return [], {
            "n": args.n,
            "d": args.d,
            "check_equivalence": args.check_equivalence,
            "emit_circuit": args.emit_circuit,
        }
    if args.subcommand == "det":
        return [], {"n": args.n, "simulate": args.simulate, "channels": args.channels, "emit_circuit": args.emit_circuit}
    if args.subcommand == "game":
        return [], {"n": list(args.n), "strategy": args.strategy}
    paths = [p for p in (args.unitary_file, args.psi_file) if p is not None]
    return paths, {"teleport": args.teleport, "dim": args.dim}


def run(args: argparse.Namespace, run_id: str) -> int:
    try:
        input_paths, options = _options(args)
        config = RunConfig.from_settings(
            args.subcommand,
            seed=args.seed,
            tolerance=args.tol,
            samples=args.samples,
            budget=args.budget,
            workers=args.workers,
            input_paths=input_paths,
            output_path=args.out,
            output_format=args.format,
            timing=args.timing,
            options=options,
        )
    except ValidationError as e:
        logger.error(f"[{run_id}] Invalid run configuration: {str(e)}")
        report = create_error_response(
            "Invalid run configuration",
            EXIT_INPUT,
            details={"errors": [error["msg"] for error in e.errors()]},
        )
        write_report(render_report(report), args.out)
        return EXIT_INPUT

    logger.info(f"[{run_id}] Running {config.subcommand} (seed {config.seed}, budget {config.budget})")
    start = time.perf_counter()
    try:
        result = COMMANDS[config.subcommand](config, run_id)
    except INPUT_ERRORS as e:
        return _fail(config, run_id, EXIT_INPUT, "Input error", e)
    except ResourceLimit as e:
        return _fail(config, run_id, EXIT_RESOURCE, "Resource limit exceeded", e)
    except UndefinedEvolution as e:
        return _fail(config, run_id, EXIT_FAILED, "Evolution undefined", e)
    except Exception as e:
        logger.error(f"[{run_id}] Unexpected error in {config.subcommand}: {str(e)}")
        raise

    elapsed = time.perf_counter() - start if config.timing else None
    report = create_success_response(result, config, elapsed)
    write_report(render_report(report, config.output_format, result.rows), config.output_path)
    logger.info(f"[{run_id}] {config.subcommand} finished with exit code {result.exit_code}")
    return result.exit_code


def _fail(config: RunConfig, run_id: str, exit_code: int, message: str, error: Exception) -> int:
    logger.error(f"[{run_id}] {message}: {str(error)}")
    report = create_error_response(
        message,
        exit_code,
        config,
        details={"error": type(error).__name__, "reason": str(error)},
    )
    write_report(render_report(report), config.output_path)
    return exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad usage and 0 on --help/--version
        return e.code if isinstance(e.code, int) else EXIT_INPUT

    configure_logging(settings.log_level)
    logger.debug(f"Settings: {settings.get_settings_summary()}")
    return run(args, generate_run_id())


if __name__ == '__main__':
    sys.exit(main())
