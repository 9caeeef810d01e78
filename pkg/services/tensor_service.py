from __future__ import annotations

import logging
from typing import Iterable, Sequence, Union

import numpy as np

from models.errors import (
    DimensionMismatch,
    DuplicateLabel,
    NonSquareSubsystem,
    ResourceLimit,
    ShapeMismatch,
    UnknownLabel,
)
from models.labeled import (
    LabeledOperator,
    StateVector,
    Subsystem,
    as_subsystems,
    label_names,
    position,
    total_dim,
)

logger = logging.getLogger(__name__)


def kron(a: LabeledOperator, b: LabeledOperator) -> LabeledOperator:
    """Tensor product; subsystem lists are concatenated"""
    for side, left, right in (("output", a.row_labels, b.row_labels), ("input", a.col_labels, b.col_labels)):
        clash = set(label_names(left)) & set(label_names(right))
        if clash:
            raise DuplicateLabel(f"Labels {sorted(clash)} appear in both factors ({side} side)")
    return LabeledOperator(np.kron(a.data, b.data), a.row_labels + b.row_labels, a.col_labels + b.col_labels)


def kron_all(ops: Iterable[LabeledOperator]) -> LabeledOperator:
    ops = list(ops)
    if not ops:
        raise ValueError("kron_all needs at least one operator")
    result = ops[0]
    for op in ops[1:]:
        result = kron(result, op)
    return result


def _square_positions(m: LabeledOperator, label: str) -> tuple[int, int]:
    in_rows = label in label_names(m.row_labels)
    in_cols = label in label_names(m.col_labels)
    if not in_rows and not in_cols:
        raise UnknownLabel(f"Label {label!r} is not carried by the operator")
    if not (in_rows and in_cols):
        raise NonSquareSubsystem(f"Label {label!r} appears on one side only")
    r, c = position(m.row_labels, label), position(m.col_labels, label)
    if m.row_labels[r].dim != m.col_labels[c].dim:
        raise NonSquareSubsystem(
            f"Label {label!r} has dimension {m.row_labels[r].dim} out vs {m.col_labels[c].dim} in"
        )
    return r, c


def _contract_pairs(m: LabeledOperator, pairs: Sequence[tuple[int, int]]) -> LabeledOperator:
    """Trace row axis r against column axis c for each (r, c) pair"""
    nr, nc = len(m.row_labels), len(m.col_labels)
    row_ids = list(range(nr))
    col_ids = list(range(nr, nr + nc))
    traced_rows = {r for r, _ in pairs}
    traced_cols = {c for _, c in pairs}
    for r, c in pairs:
        col_ids[c] = row_ids[r]
    keep_rows = [i for i in range(nr) if i not in traced_rows]
    keep_cols = [j for j in range(nc) if j not in traced_cols]
    out_ids = [row_ids[i] for i in keep_rows] + [col_ids[j] for j in keep_cols]
    result = np.einsum(m.tensor(), row_ids + col_ids, out_ids)
    rows = tuple(m.row_labels[i] for i in keep_rows)
    cols = tuple(m.col_labels[j] for j in keep_cols)
    return LabeledOperator(np.asarray(result).reshape(total_dim(rows), total_dim(cols)), rows, cols)


def partial_trace(m: LabeledOperator, labels: Iterable[str]) -> LabeledOperator:
    """Trace out subsystems present on both sides of `m`"""
    pairs = [_square_positions(m, label) for label in dict.fromkeys(labels)]
    return _contract_pairs(m, pairs)


def loop_trace(m: LabeledOperator, pairs: Sequence[tuple[str, str]]) -> LabeledOperator:
    """Trace each output subsystem against an input subsystem of equal dimension.

    ``pairs`` holds (output label, input label); the labels may differ, which
    is how a wire is fed back from an output into an input.
    """
    index_pairs = []
    for out_label, in_label in pairs:
        r = position(m.row_labels, out_label)
        c = position(m.col_labels, in_label)
        if m.row_labels[r].dim != m.col_labels[c].dim:
            raise DimensionMismatch(
                f"Cannot wire {out_label!r} (dim {m.row_labels[r].dim}) into "
                f"{in_label!r} (dim {m.col_labels[c].dim})"
            )
        index_pairs.append((r, c))
    if len({r for r, _ in index_pairs}) != len(index_pairs) or len({c for _, c in index_pairs}) != len(index_pairs):
        raise DuplicateLabel("A subsystem is wired more than once")
    return _contract_pairs(m, index_pairs)


def partial_transpose(m: LabeledOperator, labels: Iterable[str]) -> LabeledOperator:
    """Swap row and column indices of the given subsystems (an exact permutation)"""
    nr = len(m.row_labels)
    axes = list(range(nr + len(m.col_labels)))
    for label in dict.fromkeys(labels):
        r, c = _square_positions(m, label)
        axes[r], axes[nr + c] = axes[nr + c], axes[r]
    data = m.tensor().transpose(axes).reshape(m.shape)
    return LabeledOperator(data, m.row_labels, m.col_labels)


def double_ket(
    m: Union[np.ndarray, LabeledOperator],
    in_label: str = "in",
    out_label: str = "out",
) -> StateVector:
    """|M>> = sum_i |i> (x) M|i>, input space first.

    For a LabeledOperator the input subsystems come first, then the outputs;
    the two label sets must be disjoint.
    """
    if isinstance(m, LabeledOperator):
        clash = set(label_names(m.row_labels)) & set(label_names(m.col_labels))
        if clash:
            raise DuplicateLabel(f"Input and output share labels {sorted(clash)}")
        return StateVector(m.data.T.reshape(-1), m.col_labels + m.row_labels)
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2:
        raise ShapeMismatch(f"double_ket expects a matrix, got shape {m.shape}")
    out_dim, in_dim = m.shape
    return StateVector(m.T.reshape(-1), ((in_label, in_dim), (out_label, out_dim)))


def undouble(v: Union[StateVector, np.ndarray], in_dim: int, out_dim: int) -> np.ndarray:
    """Inverse of double_ket: returns the out_dim x in_dim matrix"""
    amplitudes = v.amplitudes if isinstance(v, StateVector) else np.asarray(v, dtype=np.complex128).reshape(-1)
    if amplitudes.size != in_dim * out_dim:
        raise ShapeMismatch(f"Vector of length {amplitudes.size} cannot be a {out_dim}x{in_dim} matrix")
    return amplitudes.reshape(in_dim, out_dim).T.copy()


def undouble_operator(v: StateVector, in_labels: Sequence[str], out_labels: Sequence[str]) -> LabeledOperator:
    """Inverse of double_ket for labeled vectors"""
    ordered = v.reorder(list(in_labels) + list(out_labels))
    n_in = len(in_labels)
    ins, outs = ordered.subsystems[:n_in], ordered.subsystems[n_in:]
    matrix = undouble(ordered, total_dim(ins), total_dim(outs))
    return LabeledOperator(matrix, outs, ins)


def kron_states(a: StateVector, b: StateVector) -> StateVector:
    clash = set(label_names(a.subsystems)) & set(label_names(b.subsystems))
    if clash:
        raise DuplicateLabel(f"Labels {sorted(clash)} appear in both states")
    return StateVector(np.kron(a.amplitudes, b.amplitudes), a.subsystems + b.subsystems)


def basis_state(labels: Iterable, digits: Sequence[int]) -> StateVector:
    """Computational basis state with one digit per subsystem"""
    labels = as_subsystems(labels)
    if len(digits) != len(labels):
        raise ShapeMismatch(f"Expected {len(labels)} digits, got {len(digits)}")
    index = int(np.ravel_multi_index(tuple(digits), tuple(s.dim for s in labels)))
    amplitudes = np.zeros(total_dim(labels), dtype=np.complex128)
    amplitudes[index] = 1.0
    return StateVector(amplitudes, labels)


def max_entangled(d: int, labels: tuple[str, str] = ("a", "b")) -> StateVector:
    """Normalized |phi+> = sum_i |ii> / sqrt(d)"""
    return StateVector(np.eye(d).reshape(-1) / np.sqrt(d), ((labels[0], d), (labels[1], d)))


def apply_local(tensor: np.ndarray, matrix: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Apply a square matrix to the given axes of a tensor, leaving the rest untouched"""
    axes = list(axes)
    dims = [tensor.shape[a] for a in axes]
    block = int(np.prod(dims))
    if matrix.shape != (block, block):
        raise DimensionMismatch(f"Gate of shape {matrix.shape} does not act on axes with dims {dims}")
    moved = np.moveaxis(tensor, axes, range(len(axes)))
    rest = moved.shape[len(axes):]
    out = (matrix @ moved.reshape(block, -1)).reshape(dims + list(rest))
    return np.moveaxis(out, range(len(axes)), axes)


def check_budget(length: int, budget: int, what: str = "state vector") -> None:
    if length > budget:
        logger.error(f"Refusing {what} of {length} amplitudes (budget {budget})")
        raise ResourceLimit(f"{what} needs {length} amplitudes, budget is {budget}")


def phase_deviation(a: np.ndarray, b: np.ndarray) -> float:
    """Largest entrywise distance between a and b after removing one global phase"""
    a = np.asarray(a, dtype=np.complex128).reshape(-1)
    b = np.asarray(b, dtype=np.complex128).reshape(-1)
    if a.shape != b.shape:
        raise ShapeMismatch(f"Cannot compare arrays of {a.size} and {b.size} entries")
    k = int(np.argmax(np.abs(b)))
    if abs(b[k]) == 0.0:
        return float(np.abs(a).max(initial=0.0))
    phase = a[k] / b[k]
    if abs(phase) > 0:
        phase /= abs(phase)
    else:
        phase = 1.0
    return float(np.abs(a - phase * b).max())


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-9) -> bool:
    """Entrywise equality after removing one global phase"""
    try:
        return phase_deviation(a, b) <= atol
    except ShapeMismatch:
        return False


__all__ = [
    "Subsystem",
    "apply_local",
    "basis_state",
    "check_budget",
    "double_ket",
    "equal_up_to_phase",
    "kron",
    "kron_all",
    "loop_trace",
    "max_entangled",
    "partial_trace",
    "partial_transpose",
    "phase_deviation",
    "undouble",
    "undouble_operator",
]
