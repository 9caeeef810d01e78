from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from config.settings import settings
from models.channel import Channel, Instrument
from models.det import BitString
from models.errors import OutOfRange, ResourceLimit
from models.game import BruteForceResult, CausalStrategy, GameRow, GameSpec
from services import det_service
from services.process_service import outcome_probabilities
from services.tensor_service import check_budget

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_N = 3


def game_spec(n: int) -> GameSpec:
    """Promise set S = {x : f(x) != 0}; party k must output f(x)_k"""
    if n < 3:
        raise OutOfRange(f"The game is defined for n >= 3, got {n}")
    inputs = tuple(det_service.promise_set(n))
    return GameSpec(n=n, inputs=inputs, targets=tuple(det_service.f(x) for x in inputs))


def evaluate_strategy(spec: GameSpec, strategy: CausalStrategy) -> float:
    """Success probability: fraction of promised inputs on which every party answers correctly"""
    wins = sum(strategy.answers(x) == target for x, target in zip(spec.inputs, spec.targets))
    return wins / spec.size


# Process strategy

def _classical_instrument(x_k: int) -> Instrument:
    """Measure the process input in the computational basis and send the game input back"""
    elements = []
    for a in (0, 1):
        k = np.zeros((2, 2), dtype=np.complex128)
        k[x_k, a] = 1.0
        elements.append((a, Channel.from_kraus([k], name=f"measure{a}_prepare{x_k}")))
    return Instrument(tuple(elements))


def process_outcomes(n: int, x: BitString, budget: Optional[int] = None) -> dict[BitString, float]:
    """Joint answer distribution of the process strategy on one game input"""
    det = det_service.build_det_vector(n, budget)
    return _answer_distribution(det, x)


def _answer_distribution(det, x: BitString) -> dict[BitString, float]:
    rho_p = np.zeros((det.dim, det.dim), dtype=np.complex128)
    rho_p[0, 0] = 1.0
    instruments = [_classical_instrument(bit) for bit in x]
    return outcome_probabilities(det.process, instruments, rho_p)


def evaluate_process_strategy(n: int, budget: Optional[int] = None) -> float:
    """Parties answer a_k = i_k and return o_k = x_k through w_det_n; averaged over S"""
    spec = game_spec(n)
    det = det_service.build_det_vector(n, budget)
    total = sum(_answer_distribution(det, x).get(target, 0.0) for x, target in zip(spec.inputs, spec.targets))
    value = total / spec.size
    logger.info(f"Process strategy on w_det_{n}: success probability {value:.12f}")
    return value


# Causal strategies

def guess_strategy(n: int) -> CausalStrategy:
    """Order 0, 1, ..., n-1; party 0 answers 0, party k answers f(x)_k with every unseen input taken as 0"""
    if n < 3:
        raise OutOfRange(f"The game is defined for n >= 3, got {n}")
    tables = [{(0,): 0, (1,): 0}]
    for k in range(1, n):
        table = {}
        for seen in itertools.product((0, 1), repeat=k + 1):
            guess = tuple(seen) + (0,) * (n - k - 1)
            table[seen] = det_service.f(guess)[k]
        tables.append(table)
    return CausalStrategy(order=tuple(range(n)), tables=tuple(tables), name="causal_guess")


def evaluate_causal_guess(n: int) -> float:
    value = evaluate_strategy(game_spec(n), guess_strategy(n))
    logger.info(f"Causal guess strategy for n={n}: success probability {value:.12f}")
    return value


def relabel(strategy: CausalStrategy, shift: int = 1) -> CausalStrategy:
    """Same strategy played by the parties translated by `shift`"""
    n = strategy.n
    order = tuple((p + shift) % n for p in strategy.order)
    return CausalStrategy(order=order, tables=strategy.tables, name=strategy.name)


def _order_value(spec: GameSpec, order: tuple[int, ...]) -> float:
    """Best success over all deterministic tables for one order, by broadcasting over table indices.

    The table of the j-th party is the integer t < 2^(2^(j+1)); its answer on
    knowledge index q is bit q of t.
    """
    correct = []
    inputs = np.asarray(spec.inputs)
    targets = np.asarray(spec.targets)
    for j, party in enumerate(order):
        knowledge = np.array([det_service.to_index(x[list(order[: j + 1])]) for x in inputs])
        tables = np.arange(2 ** (2 ** (j + 1)))[:, None]
        answers = (tables >> knowledge[None, :]) & 1
        correct.append(answers == targets[None, :, party])

    wins = np.ones((1,) * len(order) + (spec.size,), dtype=bool)
    for j, c in enumerate(correct):
        shape = [1] * len(order) + [spec.size]
        shape[j] = c.shape[0]
        wins = wins & c.reshape(shape)
    return float(wins.sum(axis=-1).max()) / spec.size


def brute_force_causal_bound(n: int = 3, workers: int = 1, budget: Optional[int] = None) -> BruteForceResult:
    """Maximum over every fixed order and every deterministic decision table with full forwarding"""
    if n > BRUTE_FORCE_MAX_N:
        raise ResourceLimit(f"Brute force is limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    spec = game_spec(n)
    budget = settings.budget if budget is None else budget
    per_order_size = int(np.prod([2 ** (2 ** (j + 1)) for j in range(n)]))
    check_budget(per_order_size * spec.size, budget, f"brute-force table grid (n={n})")

    orders = list(itertools.permutations(range(n)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(lambda o: _order_value(spec, o), orders))
    else:
        values = [_order_value(spec, o) for o in orders]
    per_order = dict(zip(orders, values))
    best_order = max(orders, key=lambda o: (per_order[o], [-p for p in o]))
    logger.info(
        f"Brute force over {len(orders)} orders x {per_order_size} tables: "
        f"best {per_order[best_order]:.12f} with order {best_order}"
    )
    return BruteForceResult(
        n=n,
        value=per_order[best_order],
        per_order=per_order,
        best_order=best_order,
        strategies=per_order_size * len(orders),
    )


def game_table(
    ns,
    strategies=("process", "causal-guess", "brute-force"),
    workers: int = 1,
    strict: bool = False,
    budget: Optional[int] = None,
    brute_force_results: Optional[dict[int, BruteForceResult]] = None,
) -> list[GameRow]:
    """One row per n with every requested strategy that applies to it.

    Brute force is skipped above BRUTE_FORCE_MAX_N unless `strict`, in which
    case the ResourceLimit propagates. Full brute-force results are stored in
    `brute_force_results` when a dict is passed.
    """
    rows = []
    for n in ns:
        row = GameRow(n=n, bound=1.0 - 1.0 / n)
        if "process" in strategies:
            row.process = evaluate_process_strategy(n, budget)
        if "causal-guess" in strategies:
            row.causal_guess = evaluate_causal_guess(n)
        if "brute-force" in strategies and (strict or n <= BRUTE_FORCE_MAX_N):
            result = brute_force_causal_bound(n, workers=workers, budget=budget)
            row.brute_force = result.value
            if brute_force_results is not None:
                brute_force_results[n] = result
        rows.append(row)
    return rows


__all__ = [
    "brute_force_causal_bound",
    "evaluate_causal_guess",
    "evaluate_process_strategy",
    "evaluate_strategy",
    "game_spec",
    "game_table",
    "guess_strategy",
    "process_outcomes",
    "relabel",
]
