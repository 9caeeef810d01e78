from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

from pydantic import BaseModel, Field

from models.errors import DimensionMismatch, ShapeMismatch, UnknownLabel
from models.labeled import (
    LabeledOperator,
    Labels,
    StateVector,
    Subsystem,
    as_subsystems,
    check_unique,
    label_names,
    total_dim,
)


@dataclass(frozen=True)
class Slot:
    """A party: receives `in_label` (A_I) from the process and returns `out_label` (A_O)"""
    name: str
    in_label: str
    out_label: str
    in_dim: int
    out_dim: int

    @classmethod
    def numbered(cls, k: int, in_dim: int = 2, out_dim: Optional[int] = None) -> Slot:
        return cls(f"A{k}", f"AI{k}", f"AO{k}", in_dim, in_dim if out_dim is None else out_dim)


@dataclass(frozen=True)
class ProcessMatrix:
    """Process over past, future and party slots, as a matrix W or a pure vector |w>"""

    past: Labels
    future: Labels
    slots: tuple[Slot, ...]
    vector: Optional[StateVector] = None
    matrix: Optional[LabeledOperator] = None
    name: str = ""

    def __post_init__(self):
        past = as_subsystems(self.past)
        future = as_subsystems(self.future)
        slots = tuple(self.slots)
        object.__setattr__(self, "past", past)
        object.__setattr__(self, "future", future)
        object.__setattr__(self, "slots", slots)
        if (self.vector is None) == (self.matrix is None):
            raise ValueError("Process needs exactly one of a vector or a matrix body")

        declared = self.subsystems
        check_unique(declared, "process")
        body = self.vector.subsystems if self.vector is not None else self.matrix.row_labels
        if sorted(body) != sorted(declared):
            missing = set(label_names(declared)) - set(label_names(body))
            if missing:
                raise UnknownLabel(f"Process body lacks subsystems {sorted(missing)}")
            raise ShapeMismatch(f"Process body subsystems {body} do not match the declared {declared}")
        if self.matrix is not None:
            aligned = self.matrix.reorder(col_order=label_names(self.matrix.row_labels))
            if aligned.col_labels != aligned.row_labels:
                raise DimensionMismatch("Process matrix must act on the same subsystems on both sides")
            object.__setattr__(self, "matrix", aligned)

    @property
    def n(self) -> int:
        return len(self.slots)

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    @property
    def subsystems(self) -> Labels:
        """Canonical order: past, then (in, out) per slot, then future"""
        party = []
        for s in self.slots:
            party.append(Subsystem(s.in_label, s.in_dim))
            party.append(Subsystem(s.out_label, s.out_dim))
        return self.past + tuple(party) + self.future

    @property
    def input_labels(self) -> tuple[str, ...]:
        """Inputs of the underlying map: past and every party output"""
        return label_names(self.past) + tuple(s.out_label for s in self.slots)

    @property
    def output_labels(self) -> tuple[str, ...]:
        return label_names(self.future) + tuple(s.in_label for s in self.slots)

    @property
    def past_dim(self) -> int:
        return total_dim(self.past)

    @property
    def future_dim(self) -> int:
        return total_dim(self.future)

    @property
    def expected_probability(self) -> float:
        """Post-selection probability of a valid process: prod over slots of d_out^-2"""
        return 1.0 / math.prod(s.out_dim for s in self.slots) ** 2

    @property
    def size(self) -> int:
        return total_dim(self.subsystems)

    def slot(self, name: str) -> Slot:
        for s in self.slots:
            if s.name == name:
                return s
        raise UnknownLabel(f"No slot named {name!r}")

    def to_matrix(self) -> LabeledOperator:
        if self.matrix is not None:
            return self.matrix
        v = self.vector.amplitudes
        return LabeledOperator.square(v[:, None] * v.conj()[None, :], self.vector.subsystems)

    def as_matrix_process(self) -> ProcessMatrix:
        return ProcessMatrix(self.past, self.future, self.slots, matrix=self.to_matrix(), name=self.name)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "pure": self.is_pure,
            "past": [list(s) for s in self.past],
            "future": [list(s) for s in self.future],
            "slots": [{"name": s.name, "in": s.in_dim, "out": s.out_dim} for s in self.slots],
            "expected_probability": self.expected_probability,
        }


class SamplerConfig(BaseModel):
    samples: int = Field(default=200, ge=1)
    seed: int = Field(default=0, ge=0)
    tolerance: float = Field(default=1e-9, gt=0)
    mode: Literal["random", "basis"] = "random"
    workers: int = Field(default=1, ge=1)
    basis_limit: int = Field(default=5000, ge=1)


class SampleDeviation(BaseModel):
    index: int
    tp_deviation: float
    probability: float
    probability_deviation: float
    cp_floor: Optional[float] = None


class ValidityReport(BaseModel):
    process: str
    mode: Literal["random", "basis"]
    samples: int
    seed: int
    tolerance: float
    expected_probability: float
    max_tp_deviation: float
    max_probability_deviation: float
    min_cp_eigenvalue: Optional[float] = None
    structure_tp_deviation: Optional[float] = None
    basis_tuples: int = 0
    basis_max_tp_deviation: Optional[float] = None
    per_sample: list[SampleDeviation] = Field(default_factory=list)
    verdict: Literal["valid", "invalid"]

    @property
    def valid(self) -> bool:
        return self.verdict == "valid"

    @property
    def worst_sample(self) -> Optional[SampleDeviation]:
        if not self.per_sample:
            return None
        return max(self.per_sample, key=lambda s: (s.tp_deviation, s.probability_deviation))
