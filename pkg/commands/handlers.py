import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel

from config.settings import VERSION, RunConfig, settings
from models.errors import NotCPTP, ParseError
from models.labeled import StateVector
from models.process import SamplerConfig
from models.schemas import encode_complex, encode_vector, load_channel, load_pctc, load_process, load_state
from services import channel_service, det_service, game_service, pctc_service, switch_service
from services.process_service import check_validity
from services.tensor_service import check_budget

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_RESOURCE = 3

GAME_STRATEGIES = ("process", "causal-guess", "brute-force")


@dataclass
class CommandResult:
    """What a handler hands back: report body, exit code and, for tables, CSV rows"""
    data: dict
    exit_code: int = EXIT_OK
    message: Optional[str] = None
    rows: Optional[list[dict]] = None


def to_serializable(obj: Any) -> Any:
    """Convert numpy values, complex numbers, tuples and models for JSON serialization"""
    if isinstance(obj, BaseModel):
        return to_serializable(obj.model_dump())
    if isinstance(obj, dict):
        return {str(key): to_serializable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_serializable(item) for item in obj]
    if isinstance(obj, np.ndarray):
        return to_serializable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return encode_complex(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def create_success_response(result: CommandResult, config: RunConfig, elapsed: Optional[float] = None) -> dict:
    """Create a consistent report format; `success` is false when a check ran and failed"""
    response = {
        "success": result.exit_code == EXIT_OK,
        "exit_code": result.exit_code,
        "subcommand": config.subcommand,
        "version": VERSION,
        "config": to_serializable(config.report_dict()),
        "data": to_serializable(result.data),
    }

    if result.message:
        response["message"] = result.message
    if elapsed is not None:
        response["wall_time"] = elapsed

    return response


def create_error_response(message: str, exit_code: int, config: Optional[RunConfig] = None, details=None) -> dict:
    """Create a consistent error report format"""
    error_response = {
        "success": False,
        "exit_code": exit_code,
        "message": message,
        "version": VERSION,
    }
    if config is not None:
        error_response["subcommand"] = config.subcommand
        error_response["config"] = to_serializable(config.report_dict())

    if details:
        error_response["details"] = to_serializable(details)

    return error_response


def _flatten(prefix: str, value: Any, out: dict) -> None:
    if isinstance(value, dict):
        for key, item in value.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), item, out)
    elif isinstance(value, list):
        out[prefix] = json.dumps(value)
    else:
        out[prefix] = value


def render_report(report: dict, output_format: str = "json", rows: Optional[list[dict]] = None) -> str:
    """JSON report, or CSV: the table rows when the command has them, else one key,value line per field"""
    if output_format == "json":
        return json.dumps(report, indent=2) + "\n"

    buffer = io.StringIO()
    if rows:
        writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        writer.writerows(to_serializable(rows))
    else:
        flat: dict = {}
        _flatten("", report, flat)
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["key", "value"])
        writer.writerows(flat.items())
    return buffer.getvalue()


def write_report(text: str, path: Optional[str] = None) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, 'w') as f:
        f.write(text)


# validate

def cmd_validate(config: RunConfig, run_id: str) -> CommandResult:
    """Check the process condition of a process file; exit 0 iff it is valid"""
    path = settings.data_path(config.input_paths[0])
    logger.info(f"[{run_id}] Validating {path}")
    w = load_process(path)
    check_budget(w.size if w.is_pure else w.size * w.size, config.budget, f"process {w.name or path}")

    sampler = SamplerConfig(
        samples=config.samples,
        seed=config.seed,
        tolerance=config.tolerance,
        mode=config.options.get("mode", "random"),
        workers=config.workers,
    )
    report = check_validity(w, sampler)
    data = report.model_dump()
    data["valid"] = report.valid
    data["worst_sample"] = report.worst_sample.model_dump() if report.worst_sample else None
    data["process_info"] = w.describe()

    logger.info(f"[{run_id}] {w.name or path} is {report.verdict}")
    return CommandResult(
        data=data,
        exit_code=EXIT_OK if report.valid else EXIT_FAILED,
        message=f"Process {w.name or path} is {report.verdict}",
    )


# switch

def cmd_switch(config: RunConfig, run_id: str) -> CommandResult:
    """Build the n-party switch; optionally emit its gate list and compare circuit and vector forms"""
    n = int(config.options.get("n", 2))
    d = int(config.options.get("d", 2))
    switch = switch_service.build_switch_vector(n, d, config.budget)
    data = {
        "n": n,
        "d": d,
        "process": switch.process.describe(),
        "amplitudes": switch.process.size,
        "orders": [list(order) for order in switch.orders],
        "order_convention": switch_service.ORDER_CONVENTION,
    }
    exit_code = EXIT_OK
    message = f"Built the {n}-party switch"

    if config.options.get("emit_circuit"):
        data["circuit"] = switch_service.staircase_gate_list(n).to_dict()
        logger.info(f"[{run_id}] Emitting {len(data['circuit']['gates'])} gates")

    if config.options.get("check_equivalence"):
        equivalence = switch_service.switch_equivalence(n, d, config.budget)
        passed = equivalence["max_deviation"] < config.tolerance
        equivalence["passed"] = passed
        data["equivalence"] = equivalence
        if not passed:
            exit_code = EXIT_FAILED
            logger.warning(
                f"[{run_id}] Circuit and vector forms differ by {equivalence['max_deviation']:.3e}"
            )
        message = f"Circuit and vector forms {'agree' if passed else 'disagree'} for n={n}, d={d}"

    return CommandResult(data=data, exit_code=exit_code, message=message)


# det

NOISE_CHANNELS = {
    "dephasing": channel_service.dephasing,
    "amplitude_damping": channel_service.amplitude_damping,
    "depolarizing": channel_service.depolarizing,
}


def parse_party_ops(spec: str, n: int, d: int = 2) -> list:
    """identity, random:SEED (CPTP maps), unitary:SEED, a noise channel NAME:PARAM, or file:PATH (JSON channel)"""
    kind, _, arg = spec.partition(":")
    if kind == "identity" and not arg:
        return [np.eye(d, dtype=np.complex128) for _ in range(n)]
    if kind in ("random", "unitary"):
        try:
            rng = channel_service.get_generator(int(arg))
        except ValueError as e:
            raise ParseError(f"Channel spec {spec!r} needs an unsigned integer seed") from e
        if kind == "random":
            return [channel_service.random_cptp(rng, d, d) for _ in range(n)]
        return [channel_service.random_unitary(rng, d) for _ in range(n)]
    if kind in NOISE_CHANNELS:
        try:
            parameter = float(arg)
        except ValueError as e:
            raise ParseError(f"Channel spec {spec!r} needs a numeric parameter") from e
        return [NOISE_CHANNELS[kind](parameter) for _ in range(n)]
    if kind == "file" and arg:
        channel = load_channel(settings.data_path(arg))
        if not channel_service.is_cptp(channel):
            raise NotCPTP(f"Channel file {arg} does not describe a CPTP map")
        return [channel for _ in range(n)]
    raise ParseError(
        f"Unknown channel spec {spec!r}; expected identity, random:SEED, unitary:SEED, "
        f"{', '.join(f'{name}:P' for name in NOISE_CHANNELS)} or file:PATH"
    )


def cmd_det(config: RunConfig, run_id: str) -> CommandResult:
    """Run w_det_n acausally, through the ordered circuit, or both and compare"""
    n = int(config.options.get("n", 3))
    simulate = config.options.get("simulate", "both")
    spec = config.options.get("channels", "identity")
    ops = parse_party_ops(spec, n)
    data: dict = {"n": n, "simulate": simulate, "channels": spec}
    tol = config.tolerance

    acausal = ordered = None
    if simulate in ("acausal", "both"):
        acausal = det_service.acausal_evolution(n, ops, config.budget)
        data["acausal"] = channel_service.is_cptp(acausal, tol).to_dict()
    if simulate in ("ordered", "both"):
        run = det_service.run_ordered(n, ops, config.budget)
        ordered = run.channel
        data["ordered"] = {
            **channel_service.is_cptp(ordered, tol).to_dict(),
            "queries": run.queries,
            "leakage": run.leakage,
        }
        if config.options.get("emit_circuit"):
            data["ordered"]["circuit"] = run.circuit.to_dict()

    if acausal is not None and ordered is not None:
        distance = channel_service.choi_distance(acausal, ordered)
        data["choi_distance"] = distance
        passed = distance < tol
        message = f"Choi distance between acausal and ordered evolution: {distance:.3e}"
    else:
        key = "acausal" if acausal is not None else "ordered"
        passed = data[key]["is_cptp"]
        message = f"{key.capitalize()} evolution is {'' if passed else 'not '}CPTP"

    logger.info(f"[{run_id}] w_det_{n} ({spec}): {message}")
    return CommandResult(data=data, exit_code=EXIT_OK if passed else EXIT_FAILED, message=message)


# game

def cmd_game(config: RunConfig, run_id: str) -> CommandResult:
    """Success probabilities per n; an explicit brute-force request beyond n=3 is a resource error"""
    ns = [int(n) for n in config.options.get("n", [3, 4, 5])]
    strategy = config.options.get("strategy", "all")
    strategies = GAME_STRATEGIES if strategy == "all" else (strategy,)
    brute_force: dict = {}
    rows = game_service.game_table(
        ns,
        strategies,
        workers=config.workers,
        strict=strategy == "brute-force",
        budget=config.budget,
        brute_force_results=brute_force,
    )

    table = [row.model_dump() for row in rows]
    data: dict = {"strategies": list(strategies), "rows": table}
    if brute_force:
        data["brute_force"] = brute_force[min(brute_force)].to_dict()

    logger.info(f"[{run_id}] Game table for n={ns} with {', '.join(strategies)}")
    csv_rows = [{key: ("" if value is None else value) for key, value in row.items()} for row in table]
    return CommandResult(data=data, message=f"Evaluated {len(rows)} game sizes", rows=csv_rows)


# pctc

def cmd_pctc(config: RunConfig, run_id: str) -> CommandResult:
    """Evolve a state through a gate with P-CTC loops, or run the post-selected teleportation demo"""
    if config.options.get("teleport"):
        return _teleport(config, run_id)
    if len(config.input_paths) != 2:
        raise ParseError("pctc needs a unitary file and a state file (or --teleport)")

    unitary_path, psi_path = config.input_paths
    spec = load_pctc(unitary_path)
    psi = load_state(psi_path)
    check_budget(spec.unitary.shape[0] * spec.unitary.shape[1], config.budget, f"P-CTC gate {unitary_path}")
    if sorted(psi.subsystems) != sorted(spec.past):
        raise ParseError(f"State subsystems {list(psi.subsystems)} do not match the gate's past {list(spec.past)}")

    k = pctc_service.contract(spec)
    probability = pctc_service.postselection_success(k, psi)
    evolved = pctc_service.evolve(k, psi)
    logger.info(f"[{run_id}] P-CTC evolution succeeded with post-selection probability {probability:.6f}")
    return CommandResult(
        data={
            "pctc": spec.describe(),
            "probability": probability,
            "state": {
                "subsystems": [list(s) for s in evolved.subsystems],
                "amplitudes": encode_vector(evolved.amplitudes),
            },
        },
        message="P-CTC evolution is defined for this input",
    )


def _teleport(config: RunConfig, run_id: str) -> CommandResult:
    d = int(config.options.get("dim", 2))
    if d < 2:
        raise ParseError(f"Teleportation needs dimension >= 2, got {d}")
    rng = channel_service.get_generator(config.seed)
    amplitudes = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    psi = StateVector(amplitudes / np.linalg.norm(amplitudes), (("psi", d),))
    output, probability = pctc_service.postselected_teleport(psi)
    fidelity = abs(psi.inner(output)) ** 2
    expected = 1.0 / d ** 2
    passed = abs(probability - expected) < config.tolerance and fidelity >= 1 - config.tolerance
    logger.info(f"[{run_id}] Teleported a {d}-level state: p={probability:.12f}, fidelity={fidelity:.12f}")
    return CommandResult(
        data={"d": d, "probability": probability, "expected_probability": expected, "fidelity": fidelity},
        exit_code=EXIT_OK if passed else EXIT_FAILED,
        message=f"Post-selected teleportation {'reproduces' if passed else 'does not reproduce'} the input",
    )


COMMANDS = {
    "validate": cmd_validate,
    "switch": cmd_switch,
    "det": cmd_det,
    "game": cmd_game,
    "pctc": cmd_pctc,
}
