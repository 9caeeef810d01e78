from __future__ import annotations

import logging
import math
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from config.settings import settings
from models.circuit import Gate, GateList
from models.errors import DimensionMismatch, OutOfRange
from models.labeled import LabeledOperator, StateVector, label_names
from models.pctc import PctcSpec
from models.process import ProcessMatrix, Slot
from models.switch import FactoradicCode, SwitchCircuit, SwitchProcess, register_labels
from services import channel_service
from services.pctc_service import contract
from services.process_service import apply_process, process_from_unitary
from services.tensor_service import check_budget, kron_all, phase_deviation

logger = logging.getLogger(__name__)

TARGET = "psi"

ORDER_CONVENTION = (
    "control value x is written in the factoradic basis and expanded to unary bits b_ki; "
    "the controlled-SWAP staircase then routes the target through the parties in the order sigma_x, "
    "listed first visited to last visited"
)


def _check_size(n: int, d: int) -> None:
    if n < 2:
        raise OutOfRange(f"The switch needs at least 2 parties, got {n}")
    if d < 2:
        raise OutOfRange(f"Target dimension must be at least 2, got {d}")


# Factoradic control encoding

def encode_permutation(n: int, s: int) -> FactoradicCode:
    """Digits a_k of s = sum_k a_k k!, with 0 <= a_k <= k"""
    if n < 1:
        raise OutOfRange(f"n must be positive, got {n}")
    if not 0 <= s < math.factorial(n):
        raise OutOfRange(f"Permutation index {s} outside [0, {math.factorial(n) - 1}]")
    digits = [0] * (n - 1)
    rest = s
    for k in range(n - 1, 0, -1):
        digits[k - 1], rest = divmod(rest, math.factorial(k))
    return FactoradicCode(n=n, digits=tuple(digits))


def decode(code: FactoradicCode) -> int:
    for k, a in enumerate(code.digits, start=1):
        if not 0 <= a <= k:
            raise OutOfRange(f"Factoradic digit a_{k} = {a} outside [0, {k}]")
    return code.value


# Controlled-SWAP staircase

def party_wires(n: int) -> tuple[str, ...]:
    return tuple(f"A{j}" for j in range(n))


def staircase_gates(n: int) -> list[Gate]:
    """Gates of the dashed box: the CSWAP stages, the insertion swaps, then the stages mirrored.

    Stage k holds swaps of wire positions (k, k+1), ..., (1, 2) controlled on
    b_k1, ..., b_kk; the insertion swaps the target in at the bottom and
    shifts every party wire down by one.
    """
    wires = party_wires(n)
    stages = [
        Gate("CSWAP", (f"b{k}{i}",), (wires[k - i], wires[k - i + 1]))
        for k in range(1, n)
        for i in range(1, k + 1)
    ]
    insertion = [Gate("SWAP", (), (wires[n - 1], TARGET))]
    insertion += [Gate("SWAP", (), (wires[j - 1], wires[j])) for j in range(n - 1, 0, -1)]
    return stages + insertion + stages[::-1]


def staircase_gate_list(n: int) -> GateList:
    _check_size(n, 2)
    wires = register_labels(n) + (TARGET,) + party_wires(n)
    return GateList(tuple(staircase_gates(n)), wires=wires, notes={"order_convention": ORDER_CONVENTION})


def staircase_permutation(n: int, bits: Union[FactoradicCode, Mapping[str, int]]) -> tuple[int, ...]:
    """Order in which the target visits the parties for a classical control setting.

    Any bit setting is accepted, including strings that are not the unary
    expansion of a factoradic digit; they still yield a valid order.
    """
    bits = bits.unary if isinstance(bits, FactoradicCode) else dict(bits)
    wires = party_wires(n)
    contents: dict[str, object] = {TARGET: "P", **{w: j for j, w in enumerate(wires)}}
    for gate in staircase_gates(n):
        a, b = gate.targets
        if gate.controls and not bits.get(gate.controls[0], 0):
            continue
        contents[a], contents[b] = contents[b], contents[a]

    # a wire's final content is fed into that wire's party; the target wire ends in F
    lands_on = {content: wire for wire, content in contents.items()}
    order, source = [], "P"
    while True:
        wire = lands_on[source]
        if wire == TARGET:
            break
        party = wires.index(wire)
        order.append(party)
        source = party
        if len(order) > n:
            raise RuntimeError("Staircase produced a loop that never reaches F")
    return tuple(order)


def all_orders(n: int) -> tuple[tuple[int, ...], ...]:
    return tuple(staircase_permutation(n, encode_permutation(n, s)) for s in range(math.factorial(n)))


# Process vector form

def build_switch_vector(n: int, d: int = 2, budget: Optional[int] = None) -> SwitchProcess:
    """Pure switch process with an n!-level control on P1/F1 and the target on P2/F2"""
    _check_size(n, d)
    budget = settings.budget if budget is None else budget
    control = math.factorial(n)
    check_budget(control * control * d ** (2 * n + 2), budget, f"switch process vector (n={n}, d={d})")

    orders = all_orders(n)
    slots = tuple(Slot.numbered(k, d) for k in range(n))
    past = (("P1", control), ("P2", d))
    future = (("F1", control), ("F2", d))
    subsystems = list(past)
    for s in slots:
        subsystems.extend([(s.in_label, d), (s.out_label, d)])
    subsystems.extend(future)

    tensor = np.zeros(tuple(dim for _, dim in subsystems), dtype=np.complex128)
    free = np.indices((d,) * (n + 1)).reshape(n + 1, -1)
    f1_axis, f2_axis = 2 + 2 * n, 3 + 2 * n
    for x, order in enumerate(orders):
        index: list = [None] * len(subsystems)
        index[0], index[f1_axis] = x, x
        index[1] = free[0]
        for step, party in enumerate(order):
            index[2 + 2 * party] = free[step]
            index[3 + 2 * party] = free[step + 1]
        index[f2_axis] = free[n]
        tensor[tuple(index)] = 1.0

    process = ProcessMatrix(
        past, future, slots,
        vector=StateVector(tensor.reshape(-1), tuple(subsystems)),
        name=f"switch_{n}",
    )
    logger.info(f"Built {n}-party switch vector over {process.size} amplitudes (d={d})")
    return SwitchProcess(n=n, d=d, process=process, orders=orders)


def ordered_product(unitaries: Sequence[np.ndarray], order: Sequence[int]) -> np.ndarray:
    """V_order[-1] ... V_order[0]: the target map of a fixed visiting order"""
    d = np.asarray(unitaries[0]).shape[0]
    product = np.eye(d, dtype=np.complex128)
    for party in order:
        product = np.asarray(unitaries[party], dtype=np.complex128) @ product
    return product


def switch_target_maps(switch: SwitchProcess, unitaries: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Target block of the induced map for each control basis state"""
    if len(unitaries) != switch.n:
        raise DimensionMismatch(f"Switch has {switch.n} parties, got {len(unitaries)} operations")
    channels = [channel_service.unitary_channel(u) for u in unitaries]
    (kraus,) = apply_process(switch.process, channels).kraus
    d = switch.d
    return [kraus[x * d:(x + 1) * d, x * d:(x + 1) * d] for x in range(switch.control_dim)]


# Circuit form

def build_switch_circuit(n: int, d: int = 2, budget: Optional[int] = None) -> SwitchCircuit:
    """Permutation unitary of the dashed box over the unary control register, target and party wires"""
    _check_size(n, d)
    budget = settings.budget if budget is None else budget
    controls = register_labels(n)
    wires = (TARGET,) + party_wires(n)
    dims = (2,) * len(controls) + (d,) * len(wires)
    size = math.prod(dims)
    check_budget(size * size, budget, f"switch circuit unitary (n={n}, d={d})")

    gate_list = staircase_gate_list(n)
    gates = gate_list.gates
    values = dict(zip(controls + wires, np.indices(dims).reshape(len(dims), -1)))
    for gate in gates:
        a, b = gate.targets
        if gate.controls:
            on = values[gate.controls[0]] == 1
            values[a], values[b] = np.where(on, values[b], values[a]), np.where(on, values[a], values[b])
        else:
            values[a], values[b] = values[b], values[a]
    image = np.ravel_multi_index(tuple(values[label] for label in controls + wires), dims)
    u = np.zeros((size, size), dtype=np.complex128)
    u[image, np.arange(size)] = 1.0

    parties = [Slot.numbered(j, d) for j in range(n)]
    cols = [(f"P1_{b}", 2) for b in controls] + [("P2", d)] + [(s.out_label, d) for s in parties]
    rows = [(f"F1_{b}", 2) for b in controls] + [("F2", d)] + [(s.in_label, d) for s in parties]
    logger.info(f"Built {n}-party switch circuit: {len(gates)} gates, {len(controls)} control qubits")
    return SwitchCircuit(
        n=n,
        d=d,
        gates=gate_list,
        unitary=LabeledOperator(u, tuple(rows), tuple(cols)),
        controls=controls,
        ctc_pairs=tuple((s.in_label, s.out_label) for s in parties),
    )


def circuit_process(circuit: SwitchCircuit) -> ProcessMatrix:
    """Pure process of the dashed-box unitary; the unary register is part of P and F"""
    d = circuit.d
    past = [(f"P1_{b}", 2) for b in circuit.controls] + [("P2", d)]
    future = [(f"F1_{b}", 2) for b in circuit.controls] + [("F2", d)]
    slots = [Slot.numbered(j, d) for j in range(circuit.n)]
    return process_from_unitary(circuit.unitary, past, future, slots, name=f"switch_circuit_{circuit.n}")


def circuit_induced_map(circuit: SwitchCircuit, unitaries: Sequence[np.ndarray]) -> LabeledOperator:
    """Insert the party unitaries after the box and close every party wire into a P-CTC"""
    if len(unitaries) != circuit.n:
        raise DimensionMismatch(f"Circuit has {circuit.n} parties, got {len(unitaries)} operations")
    d = circuit.d
    layer = [
        LabeledOperator(np.asarray(u, dtype=np.complex128), ((f"loop{j}", d),), ((in_label, d),))
        for j, (u, (in_label, _)) in enumerate(zip(unitaries, circuit.ctc_pairs))
    ]
    chronology = [s for s in circuit.unitary.row_labels if s.label not in {i for i, _ in circuit.ctc_pairs}]
    layer.append(LabeledOperator.identity(chronology))
    closed = kron_all(layer) @ circuit.unitary
    spec = PctcSpec(closed, tuple((f"loop{j}", out_label) for j, (_, out_label) in enumerate(circuit.ctc_pairs)))
    k = contract(spec) * d ** circuit.n
    return k.reorder(label_names(spec.future), label_names(spec.past))


def control_block(op: LabeledOperator, circuit: SwitchCircuit, code: FactoradicCode) -> np.ndarray:
    """Target-to-target block of a circuit-form map for one unary control setting"""
    rows = [f"F1_{b}" for b in circuit.controls] + ["F2"]
    cols = [f"P1_{b}" for b in circuit.controls] + ["P2"]
    t = op.reorder(rows, cols).tensor()
    bits = code.register
    return t[bits + (slice(None),) + bits + (slice(None),)]


def switch_equivalence(n: int, d: int = 2, budget: Optional[int] = None) -> dict:
    """Compare the circuit-form process with the vector form for every control value.

    The unary register at code(x) on both P1 and F1 must carry, up to one
    phase per x, the same party-space vector as control x of the vector form.
    """
    switch = build_switch_vector(n, d, budget)
    circuit = build_switch_circuit(n, d, budget)
    from_circuit = circuit_process(circuit)

    body = ["P2"] + [label for s in switch.process.slots for label in (s.in_label, s.out_label)] + ["F2"]
    past_bits = [f"P1_{b}" for b in circuit.controls]
    future_bits = [f"F1_{b}" for b in circuit.controls]
    circuit_t = from_circuit.vector.reorder(past_bits + future_bits + body).tensor()
    vector_t = switch.process.vector.reorder(["P1", "F1"] + body).tensor()

    deviations = []
    for x in range(switch.control_dim):
        bits = encode_permutation(n, x).register
        deviations.append(phase_deviation(circuit_t[bits + bits], vector_t[x, x]))
    worst = max(deviations)
    logger.info(f"Switch n={n}, d={d}: circuit vs vector max deviation {worst:.3e}")
    return {
        "n": n,
        "d": d,
        "control_qubits": circuit.control_qubits,
        "max_deviation": worst,
        "deviations": deviations,
        "orders": [list(order) for order in switch.orders],
        "order_convention": ORDER_CONVENTION,
    }


__all__ = [
    "ORDER_CONVENTION",
    "all_orders",
    "build_switch_circuit",
    "build_switch_vector",
    "circuit_induced_map",
    "circuit_process",
    "control_block",
    "decode",
    "encode_permutation",
    "ordered_product",
    "staircase_gate_list",
    "staircase_gates",
    "staircase_permutation",
    "switch_equivalence",
    "switch_target_maps",
]
