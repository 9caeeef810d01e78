from __future__ import annotations

import logging
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np

from config.settings import settings
from models.channel import Channel, Purification
from models.circuit import Gate, GateList
from models.det import BitString, ClassicalReduction, DetProcess, OrderedRun
from models.errors import DimensionMismatch, OutOfRange
from models.labeled import StateVector
from models.process import ProcessMatrix, Slot
from services import channel_service
from services.process_service import apply_process
from services.tensor_service import apply_local, check_budget

logger = logging.getLogger(__name__)

KRAUS_CUTOFF = 1e-12

PartyOp = Union[np.ndarray, Channel]

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)


# Bit strings and f

def to_bits(index: int, n: int) -> BitString:
    """x_0 is the most significant bit, matching the qubit order of party 0 first"""
    return tuple((index >> (n - 1 - k)) & 1 for k in range(n))


def to_index(x: Sequence[int]) -> int:
    index = 0
    for bit in x:
        index = (index << 1) | int(bit)
    return index


def rotate(x: Sequence[int], shift: int = 1) -> BitString:
    """Translate by `shift` parties: bit k moves to position k + shift (mod n)"""
    n = len(x)
    return tuple(x[(k - shift) % n] for k in range(n))


def f(x: Sequence[int]) -> BitString:
    """f(x)_k = x_{k-1} and not x_{k+1}, ..., not x_{k+n-2}, indices mod n"""
    n = len(x)
    if n < 3:
        raise OutOfRange(f"f is defined for n >= 3, got {n}")
    return tuple(
        int(bool(x[(k - 1) % n]) and not any(x[(k + l) % n] for l in range(1, n - 1)))
        for k in range(n)
    )


@lru_cache(maxsize=None)
def f_table(n: int) -> tuple[int, ...]:
    return tuple(to_index(f(to_bits(i, n))) for i in range(2 ** n))


def promise_set(n: int) -> list[BitString]:
    """Strings with f(x) != 0: the translations of 100... and 110..."""
    return [to_bits(i, n) for i, image in enumerate(f_table(n)) if image != 0]


def _table(n: int) -> np.ndarray:
    return np.asarray(f_table(n), dtype=np.intp)


# Process

def build_det_vector(n: int, budget: Optional[int] = None) -> DetProcess:
    """sum_{x,y} |y>_P |x>_AO |y + f(x)>_AI |x>_F, with one qubit per party slot"""
    if n < 3:
        raise OutOfRange(f"w_det needs n >= 3, got {n}")
    budget = settings.budget if budget is None else budget
    dim = 2 ** n
    check_budget(dim ** 4, budget, f"w_det process vector (n={n})")

    table = _table(n)
    tensor = np.zeros((dim,) * 4, dtype=np.complex128)
    y = np.arange(dim)[:, None]
    x = np.arange(dim)[None, :]
    tensor[y, x, y ^ table[x], x] = 1.0

    slots = tuple(Slot.numbered(k, 2) for k in range(n))
    subsystems = (
        [("P", dim)]
        + [(s.out_label, 2) for s in slots]
        + [(s.in_label, 2) for s in slots]
        + [("F", dim)]
    )
    process = ProcessMatrix(
        (("P", dim),), (("F", dim),), slots,
        vector=StateVector(tensor.reshape(-1), tuple(subsystems)),
        name=f"w_det_{n}",
    )
    logger.info(f"Built w_det_{n} over {process.size} amplitudes")
    return DetProcess(n=n, process=process, table=f_table(n))


def classical_reduction(n: int, tol: float = 1e-9) -> ClassicalReduction:
    """Feed |0...0> into P and trace F: the reduced operator on (A_O, A_I) is |x><x| (x) |f(x)><f(x)|"""
    det = build_det_vector(n)
    dim = det.dim
    order = ["P"] + [s.out_label for s in det.process.slots] + [s.in_label for s in det.process.slots] + ["F"]
    v = det.process.vector.reorder(order).tensor().reshape(dim, dim * dim, dim)[0]
    reduced = v @ v.conj().T
    diagonal = np.real(np.diagonal(reduced))
    off = float(np.abs(reduced - np.diag(np.diagonal(reduced))).max())

    mapping = {}
    for x in range(dim):
        row = diagonal[x * dim:(x + 1) * dim]
        mapping[to_bits(x, n)] = to_bits(int(np.argmax(row)), n)
    return ClassicalReduction(mapping=mapping, diagonal=off < tol, off_diagonal=off)


# Acausal evolution

def _check_parties(n: int, ops: Sequence) -> None:
    if len(ops) != n:
        raise DimensionMismatch(f"Expected {n} party operations, got {len(ops)}")
    for k, op in enumerate(ops):
        shape = (op.out_dim, op.in_dim) if isinstance(op, Channel) else np.asarray(op).shape
        if tuple(shape) != (2, 2):
            raise DimensionMismatch(f"Party {k} must act on a qubit, got shape {tuple(shape)}")


def _product(unitaries: Sequence[np.ndarray]) -> np.ndarray:
    r = np.eye(1, dtype=np.complex128)
    for u in unitaries:
        r = np.kron(r, np.asarray(u, dtype=np.complex128))
    return r


def acausal_evolution(n: int, party_ops: Sequence[PartyOp], budget: Optional[int] = None) -> Channel:
    """Map from P to F induced by w_det_n.

    For unitaries this is U_G = sum_x |x><x| R U_f(x) with R the product of
    the party unitaries; channels go through the full process contraction.
    """
    _check_parties(n, party_ops)
    budget = settings.budget if budget is None else budget
    if all(not isinstance(op, Channel) for op in party_ops):
        dim = 2 ** n
        check_budget(dim * dim, budget, f"acausal evolution (n={n})")
        r = _product(party_ops)
        rows = np.arange(dim)[:, None]
        cols = np.arange(dim)[None, :] ^ _table(n)[:, None]
        return Channel.from_kraus([r[rows, cols]], name=f"acausal_{n}")
    channels = [op if isinstance(op, Channel) else channel_service.unitary_channel(op) for op in party_ops]
    det = build_det_vector(n, budget)
    return apply_process(det.process, channels)


def acausal_circuit(n: int) -> GateList:
    """The P-CTC circuit of w_det_n: f-oracle and swap in the box, parties on the looped wires"""
    loop = tuple(f"c{k}" for k in range(n))
    system = tuple(f"p{k}" for k in range(n))
    gates = [Gate("F-ORACLE", loop, system)]
    gates += [Gate("SWAP", (), (loop[k], system[k])) for k in range(n)]
    gates += [Gate(f"A{k}", (), (loop[k],), party=k) for k in range(n)]
    return GateList(tuple(gates), wires=loop + system, notes={"ctc_wires": list(loop), "past": "p", "future": "p"})


# Causally ordered simulation

def _party_layer(n: int, adjoint: bool, purified: bool) -> list[Gate]:
    gates = []
    for k in range(n):
        targets = (f"e{k}", f"x{k}") if purified else (f"x{k}",)
        name = f"A{k}^dag" if adjoint else f"A{k}"
        gates.append(Gate(name, (), targets, party=k, adjoint=adjoint))
    return gates


def ordered_circuit(n: int, purified: bool = False) -> GateList:
    """R, f-oracle, R^dag, CNOT correction, R, f-oracle; system x_k, oracle ancillas a_k, party ancillas e_k"""
    system = tuple(f"x{k}" for k in range(n))
    oracle = tuple(f"a{k}" for k in range(n))
    gates = _party_layer(n, False, purified)
    gates.append(Gate("F-ORACLE", system, oracle))
    gates += _party_layer(n, True, purified)
    gates += [Gate("CNOT", (oracle[k],), (system[k],)) for k in range(n)]
    gates += _party_layer(n, False, purified)
    gates.append(Gate("F-ORACLE", system, oracle))
    wires = (tuple(f"e{k}" for k in range(n)) if purified else ()) + system + oracle
    return GateList(tuple(gates), wires=wires)


def oracle_matrix(n: int) -> np.ndarray:
    """|x>|y> -> |x>|y + f(x)> on 2n qubits"""
    dim = 2 ** n
    table = _table(n)
    x = np.repeat(np.arange(dim), dim)
    y = np.tile(np.arange(dim), dim)
    m = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
    m[x * dim + (y ^ table[x]), x * dim + y] = 1.0
    return m


def _execute(
    circuit: GateList,
    dims: dict[str, int],
    party_ops: Sequence[np.ndarray],
    n: int,
) -> np.ndarray:
    """Run the gate list on every computational input of the system wires at once.

    Returns a tensor with one axis per wire plus a trailing input axis; every
    ancilla wire starts in |0>.
    """
    wires = list(circuit.wires)
    shape = [dims[w] for w in wires]
    dim = 2 ** n
    tensor = np.zeros(shape + [dim], dtype=np.complex128)
    index: list = [0] * len(wires)
    for k in range(n):
        index[wires.index(f"x{k}")] = (np.arange(dim) >> (n - 1 - k)) & 1
    tensor[tuple(index) + (np.arange(dim),)] = 1.0

    oracle = None
    for gate in circuit.gates:
        axes = [wires.index(w) for w in gate.controls + gate.targets]
        if gate.is_query:
            m = party_ops[gate.party]
            tensor = apply_local(tensor, m.conj().T if gate.adjoint else m, axes)
        elif gate.name == "CNOT":
            tensor = apply_local(tensor, CNOT, axes)
        elif gate.name == "F-ORACLE":
            oracle = oracle_matrix(n) if oracle is None else oracle
            tensor = apply_local(tensor, oracle, axes)
        else:
            raise ValueError(f"Unsupported gate {gate.name!r} in ordered circuit")
    return tensor


def run_ordered(n: int, party_ops: Sequence[PartyOp], budget: Optional[int] = None) -> OrderedRun:
    """Causally ordered simulation of w_det_n; channels are purified first"""
    if n < 3:
        raise OutOfRange(f"w_det needs n >= 3, got {n}")
    _check_parties(n, party_ops)
    budget = settings.budget if budget is None else budget
    purified = any(isinstance(op, Channel) for op in party_ops)
    circuit = ordered_circuit(n, purified)
    dims = {w: 2 for w in circuit.wires}

    if purified:
        purifications: list[Purification] = [
            channel_service.purify(op if isinstance(op, Channel) else channel_service.unitary_channel(op))
            for op in party_ops
        ]
        matrices = [p.unitary.data for p in purifications]
        for k, p in enumerate(purifications):
            dims[f"e{k}"] = p.ancilla_dim
    else:
        matrices = [np.asarray(op, dtype=np.complex128) for op in party_ops]

    dim = 2 ** n
    total = int(np.prod([dims[w] for w in circuit.wires])) * dim
    check_budget(total, budget, f"ordered simulation (n={n})")
    tensor = _execute(circuit, dims, matrices, n)

    wires = list(circuit.wires)
    system = [wires.index(f"x{k}") for k in range(n)]
    oracle = [wires.index(f"a{k}") for k in range(n)]
    party_anc = [i for i in range(len(wires)) if i not in system + oracle]
    moved = np.transpose(tensor, system + oracle + party_anc + [len(wires)])
    blocks = moved.reshape(dim, dim, -1, dim)

    # weight left on oracle ancilla states other than |0...0>, averaged over a maximally mixed input
    leakage = float(np.sum(np.abs(blocks[:, 1:]) ** 2) / dim)
    kraus = blocks.reshape(dim, -1, dim).transpose(1, 0, 2)
    norms = np.linalg.norm(kraus.reshape(kraus.shape[0], -1), axis=1)
    keep = [kraus[i] for i in np.flatnonzero(norms > KRAUS_CUTOFF)] or [kraus[0]]
    channel = Channel.from_kraus(keep, name=f"ordered_{n}")
    logger.info(
        f"Ordered simulation of w_det_{n}: {circuit.query_count} party queries, "
        f"{len(keep)} Kraus operators, ancilla leakage {leakage:.3e}"
    )
    return OrderedRun(channel=channel, circuit=circuit, leakage=leakage)


def ordered_simulation_unitary(n: int, party_unitaries: Sequence[np.ndarray]) -> Channel:
    if any(isinstance(op, Channel) for op in party_unitaries):
        raise TypeError("ordered_simulation_unitary takes unitary matrices; use ordered_simulation_general")
    return run_ordered(n, party_unitaries).channel


def ordered_simulation_general(n: int, party_channels: Sequence[PartyOp]) -> Channel:
    channels = [op if isinstance(op, Channel) else channel_service.unitary_channel(op) for op in party_channels]
    return run_ordered(n, channels).channel


def ancilla_leakage(n: int, party_ops: Sequence[PartyOp], budget: Optional[int] = None) -> float:
    """Population left outside |0...0> on the oracle ancillas after the ordered circuit"""
    return run_ordered(n, party_ops, budget).leakage


# Identities behind the construction

def _factor(op: Union[np.ndarray, Purification]) -> np.ndarray:
    """Party unitary as an (anc, sys, anc, sys) tensor; plain unitaries get a trivial ancilla"""
    if isinstance(op, Purification):
        e, d = op.ancilla_dim, op.system_dim
        return op.unitary.data.reshape(e, d, e, d)
    u = np.asarray(op, dtype=np.complex128)
    return u.reshape(1, u.shape[0], 1, u.shape[1])


def orthogonality_magnitudes(
    parties: Sequence[Union[np.ndarray, Purification]], y: Sequence[int], z: Sequence[int]
) -> tuple[float, float]:
    """Norms of (1 (x) <z|) R (1 (x) U_f(w)) R^dag (1 (x) |y>) for w = y and w = z.

    R is the product of the party factors, so each block factorizes over
    parties and its Frobenius norm is the product of per-party norms.
    """
    n = len(parties)
    if len(y) != n or len(z) != n:
        raise DimensionMismatch(f"Bit strings must have {n} bits")
    factors = [_factor(p) for p in parties]
    result = []
    for w in (f(y), f(z)):
        magnitude = 1.0
        for k, t in enumerate(factors):
            d = t.shape[1]
            flip = np.arange(d) ^ w[k]
            # B[e, e2] = sum_{e1, s1} R[e, z, e1, s1] conj(R[e2, y, e1, s1 ^ w_k])
            left = t[:, z[k]].reshape(t.shape[0], -1)
            right = t[:, y[k]][:, :, flip].reshape(t.shape[0], -1)
            magnitude *= float(np.linalg.norm(left @ right.conj().T))
        result.append(magnitude)
    return result[0], result[1]


def orthogonality_property(
    parties: Sequence[Union[np.ndarray, Purification]],
    y: Sequence[int],
    z: Sequence[int],
    tol: float = 1e-10,
) -> bool:
    """Whether both matrix elements vanish within tol (plain or dilated R)"""
    return max(orthogonality_magnitudes(parties, y, z)) < tol


def trace_condition(n: int, channels: Sequence[Channel]) -> np.ndarray:
    """sum_{i,x} U_f(x) A_i^dag |x><x| A_i U_f(x); equals the identity when every party map is TP"""
    _check_parties(n, channels)
    # sum_i A_i^dag |x><x| A_i factorizes into per-party 2x2 blocks
    local = []
    for channel in channels:
        kraus = channel_service.kraus_of(channel)
        local.append([sum(np.outer(k[b].conj(), k[b]) for k in kraus) for b in (0, 1)])

    dim = 2 ** n
    table = _table(n)
    total = np.zeros((dim, dim), dtype=np.complex128)
    for x in range(dim):
        bits = to_bits(x, n)
        term = np.eye(1, dtype=np.complex128)
        for k, b in enumerate(bits):
            term = np.kron(term, local[k][b])
        flip = np.arange(dim) ^ table[x]
        total += term[np.ix_(flip, flip)]
    return total


__all__ = [
    "acausal_circuit",
    "acausal_evolution",
    "ancilla_leakage",
    "build_det_vector",
    "classical_reduction",
    "f",
    "f_table",
    "oracle_matrix",
    "ordered_circuit",
    "ordered_simulation_general",
    "ordered_simulation_unitary",
    "orthogonality_magnitudes",
    "orthogonality_property",
    "promise_set",
    "rotate",
    "run_ordered",
    "to_bits",
    "to_index",
    "trace_condition",
]
