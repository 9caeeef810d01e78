from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np
import numpy.typing as npt

from models.errors import DimensionMismatch, DuplicateLabel, ShapeMismatch, UnknownLabel

DEFAULT_ATOL = 1e-9


class Subsystem(NamedTuple):
    """A named tensor factor"""
    label: str
    dim: int


SubsystemLike = Union[Subsystem, tuple]
Labels = tuple[Subsystem, ...]


def as_subsystems(items: Iterable[SubsystemLike]) -> Labels:
    """Normalize (label, dim) pairs into a tuple of Subsystem"""
    result = []
    for item in items:
        label, dim = item
        dim = int(dim)
        if dim < 1:
            raise ShapeMismatch(f"Subsystem {label!r} has non-positive dimension {dim}")
        result.append(Subsystem(str(label), dim))
    return tuple(result)


def total_dim(labels: Sequence[Subsystem]) -> int:
    return math.prod(s.dim for s in labels)


def label_names(labels: Sequence[Subsystem]) -> tuple[str, ...]:
    return tuple(s.label for s in labels)


def check_unique(labels: Sequence[Subsystem], side: str = "operator") -> None:
    seen = set()
    for s in labels:
        if s.label in seen:
            raise DuplicateLabel(f"Label {s.label!r} appears twice on the {side} side")
        seen.add(s.label)


def position(labels: Sequence[Subsystem], label: str) -> int:
    for i, s in enumerate(labels):
        if s.label == label:
            return i
    raise UnknownLabel(f"Unknown label {label!r}; available: {list(label_names(labels))}")


def permutation_to(labels: Sequence[Subsystem], order: Sequence[str]) -> list[int]:
    """Axis permutation bringing `labels` into `order` (same label set)"""
    if sorted(order) != sorted(label_names(labels)) or len(order) != len(labels):
        raise UnknownLabel(
            f"Reordering {list(label_names(labels))} into {list(order)} is not a permutation"
        )
    return [position(labels, name) for name in order]


@dataclass(frozen=True)
class LabeledOperator:
    """Dense complex matrix with named input (column) and output (row) subsystems.

    Subsystem order is row-major: the first label is the most significant
    index, matching ``np.kron``. Data is copied on construction and frozen.
    """

    data: npt.NDArray[np.complex128]
    row_labels: Labels
    col_labels: Labels

    def __post_init__(self):
        rows = as_subsystems(self.row_labels)
        cols = as_subsystems(self.col_labels)
        check_unique(rows, "output")
        check_unique(cols, "input")
        data = np.array(self.data, dtype=np.complex128)
        expected = (total_dim(rows), total_dim(cols))
        if data.shape != expected:
            raise ShapeMismatch(
                f"Data shape {data.shape} does not match declared dimensions {expected}"
            )
        data.flags.writeable = False
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "col_labels", cols)
        object.__setattr__(self, "data", data)

    @classmethod
    def square(cls, data, labels: Iterable[SubsystemLike]) -> LabeledOperator:
        labels = as_subsystems(labels)
        return cls(data, labels, labels)

    @classmethod
    def identity(cls, labels: Iterable[SubsystemLike]) -> LabeledOperator:
        labels = as_subsystems(labels)
        return cls(np.eye(total_dim(labels)), labels, labels)

    @property
    def is_square(self) -> bool:
        return self.row_labels == self.col_labels

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def tensor(self) -> np.ndarray:
        """View with one axis per subsystem: row axes first, then column axes"""
        dims = [s.dim for s in self.row_labels] + [s.dim for s in self.col_labels]
        return self.data.reshape(dims)

    def dag(self) -> LabeledOperator:
        return LabeledOperator(self.data.conj().T, self.col_labels, self.row_labels)

    def trace(self) -> complex:
        if sorted(self.row_labels) != sorted(self.col_labels):
            raise DimensionMismatch("Trace requires the same subsystems on both sides")
        aligned = self.reorder(col_order=label_names(self.row_labels))
        return complex(np.trace(aligned.data))

    def reorder(
        self,
        row_order: Sequence[str] | None = None,
        col_order: Sequence[str] | None = None,
    ) -> LabeledOperator:
        """Permute subsystems on either side to the given label order"""
        row_order = label_names(self.row_labels) if row_order is None else tuple(row_order)
        col_order = label_names(self.col_labels) if col_order is None else tuple(col_order)
        row_perm = permutation_to(self.row_labels, row_order)
        col_perm = permutation_to(self.col_labels, col_order)
        if row_perm == list(range(len(row_perm))) and col_perm == list(range(len(col_perm))):
            return self
        nr = len(self.row_labels)
        axes = row_perm + [nr + c for c in col_perm]
        rows = tuple(self.row_labels[i] for i in row_perm)
        cols = tuple(self.col_labels[i] for i in col_perm)
        data = self.tensor().transpose(axes).reshape(total_dim(rows), total_dim(cols))
        return LabeledOperator(data, rows, cols)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            state = other.reorder(label_names(self.col_labels))
            if state.subsystems != self.col_labels:
                raise DimensionMismatch("State subsystems do not match operator inputs")
            return StateVector(self.data @ state.amplitudes, self.row_labels)
        if not isinstance(other, LabeledOperator):
            return NotImplemented
        aligned = other.reorder(row_order=label_names(self.col_labels))
        if aligned.row_labels != self.col_labels:
            raise DimensionMismatch(
                f"Cannot compose: inputs {self.col_labels} vs outputs {other.row_labels}"
            )
        return LabeledOperator(self.data @ aligned.data, self.row_labels, aligned.col_labels)

    def _aligned(self, other: LabeledOperator) -> LabeledOperator:
        aligned = other.reorder(label_names(self.row_labels), label_names(self.col_labels))
        if aligned.row_labels != self.row_labels or aligned.col_labels != self.col_labels:
            raise DimensionMismatch("Operands carry different subsystems")
        return aligned

    def __add__(self, other: LabeledOperator) -> LabeledOperator:
        return LabeledOperator(self.data + self._aligned(other).data, self.row_labels, self.col_labels)

    def __sub__(self, other: LabeledOperator) -> LabeledOperator:
        return LabeledOperator(self.data - self._aligned(other).data, self.row_labels, self.col_labels)

    def __mul__(self, scalar) -> LabeledOperator:
        return LabeledOperator(self.data * scalar, self.row_labels, self.col_labels)

    __rmul__ = __mul__

    def __neg__(self) -> LabeledOperator:
        return self * -1

    def allclose(self, other: LabeledOperator, atol: float = DEFAULT_ATOL) -> bool:
        return bool(np.allclose(self.data, self._aligned(other).data, rtol=0.0, atol=atol))


@dataclass(frozen=True)
class StateVector:
    """Dense amplitude vector over named subsystems (not necessarily normalized)."""

    amplitudes: npt.NDArray[np.complex128]
    subsystems: Labels

    def __post_init__(self):
        subsystems = as_subsystems(self.subsystems)
        check_unique(subsystems, "state")
        amplitudes = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amplitudes.size != total_dim(subsystems):
            raise ShapeMismatch(
                f"State has {amplitudes.size} amplitudes, subsystems need {total_dim(subsystems)}"
            )
        if not np.all(np.isfinite(amplitudes)):
            raise ValueError("State amplitudes must be finite")
        amplitudes.flags.writeable = False
        object.__setattr__(self, "subsystems", subsystems)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.subsystems)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def reorder(self, order: Sequence[str]) -> StateVector:
        perm = permutation_to(self.subsystems, order)
        if perm == list(range(len(perm))):
            return self
        subsystems = tuple(self.subsystems[i] for i in perm)
        return StateVector(self.tensor().transpose(perm).reshape(-1), subsystems)

    def normalized(self) -> StateVector:
        return StateVector(self.amplitudes / self.norm, self.subsystems)

    def density(self) -> LabeledOperator:
        """Projector |v><v| over the same subsystems"""
        return LabeledOperator.square(np.outer(self.amplitudes, self.amplitudes.conj()), self.subsystems)

    def inner(self, other: StateVector) -> complex:
        """<self|other> after aligning subsystem order"""
        aligned = other.reorder(label_names(self.subsystems))
        return complex(np.vdot(self.amplitudes, aligned.amplitudes))

    def allclose(self, other: StateVector, atol: float = DEFAULT_ATOL) -> bool:
        aligned = other.reorder(label_names(self.subsystems))
        return bool(np.allclose(self.amplitudes, aligned.amplitudes, rtol=0.0, atol=atol))
