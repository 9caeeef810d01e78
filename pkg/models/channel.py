from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from models.errors import DimensionMismatch, ShapeMismatch
from models.labeled import LabeledOperator, total_dim

IN_LABEL = "in"
OUT_LABEL = "out"


def _frozen(matrix) -> np.ndarray:
    array = np.array(matrix, dtype=np.complex128)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class Channel:
    """Completely positive map from in_dim to out_dim.

    Held either as Kraus operators (each out_dim x in_dim) or as a Choi
    operator over in (x) out. Trace preservation is not enforced here; use
    ``channel_service.is_cptp`` to check it.
    """

    in_dim: int
    out_dim: int
    kraus: Optional[tuple[np.ndarray, ...]] = None
    choi: Optional[LabeledOperator] = None
    name: str = ""

    def __post_init__(self):
        if self.kraus is None and self.choi is None:
            raise ValueError("Channel needs a Kraus list or a Choi operator")
        if self.kraus is not None:
            ops = tuple(_frozen(k) for k in self.kraus)
            if not ops:
                raise ValueError("Kraus list is empty")
            for k in ops:
                if k.shape != (self.out_dim, self.in_dim):
                    raise ShapeMismatch(
                        f"Kraus operator of shape {k.shape}, expected {(self.out_dim, self.in_dim)}"
                    )
            object.__setattr__(self, "kraus", ops)
        if self.choi is not None:
            size = self.in_dim * self.out_dim
            if self.choi.shape != (size, size):
                raise ShapeMismatch(f"Choi operator of shape {self.choi.shape}, expected {(size, size)}")

    @classmethod
    def from_kraus(cls, kraus: Sequence, name: str = "") -> Channel:
        ops = [np.asarray(k, dtype=np.complex128) for k in kraus]
        if not ops:
            raise ValueError("Kraus list is empty")
        out_dim, in_dim = ops[0].shape
        return cls(in_dim=in_dim, out_dim=out_dim, kraus=tuple(ops), name=name)

    @classmethod
    def from_choi(cls, choi, in_dim: int, out_dim: int, name: str = "") -> Channel:
        if not isinstance(choi, LabeledOperator):
            labels = ((IN_LABEL, in_dim), (OUT_LABEL, out_dim))
            choi = LabeledOperator.square(choi, labels)
        return cls(in_dim=in_dim, out_dim=out_dim, choi=choi, name=name)

    @property
    def is_kraus(self) -> bool:
        return self.kraus is not None

    @property
    def rank(self) -> Optional[int]:
        return len(self.kraus) if self.kraus is not None else None

    def describe(self) -> dict:
        return {
            "name": self.name,
            "in": self.in_dim,
            "out": self.out_dim,
            "representation": "kraus" if self.is_kraus else "choi",
            "rank": self.rank,
        }


@dataclass(frozen=True)
class Instrument:
    """Outcome-tagged CP maps whose sum is a channel"""

    elements: tuple[tuple[int, Channel], ...]

    def __post_init__(self):
        elements = tuple((int(outcome), channel) for outcome, channel in self.elements)
        if not elements:
            raise ValueError("Instrument has no elements")
        outcomes = [outcome for outcome, _ in elements]
        if len(set(outcomes)) != len(outcomes):
            raise ValueError(f"Instrument outcomes must be unique, got {outcomes}")
        in_dim, out_dim = elements[0][1].in_dim, elements[0][1].out_dim
        for outcome, channel in elements:
            if (channel.in_dim, channel.out_dim) != (in_dim, out_dim):
                raise DimensionMismatch(f"Instrument element {outcome} has mismatched dimensions")
        object.__setattr__(self, "elements", elements)

    @classmethod
    def single(cls, channel: Channel, outcome: int = 0) -> Instrument:
        return cls(((outcome, channel),))

    @property
    def in_dim(self) -> int:
        return self.elements[0][1].in_dim

    @property
    def out_dim(self) -> int:
        return self.elements[0][1].out_dim

    @property
    def outcomes(self) -> tuple[int, ...]:
        return tuple(outcome for outcome, _ in self.elements)


@dataclass(frozen=True)
class Purification:
    """Unitary on ancilla (x) system with K_i = (<i| (x) 1) U (|0> (x) 1)"""

    unitary: LabeledOperator
    ancilla_dim: int
    kraus_rank: int
    ancilla_label: str = "anc"
    system_label: str = "sys"

    @property
    def system_dim(self) -> int:
        return total_dim(self.unitary.row_labels) // self.ancilla_dim

    def kraus(self, i: int) -> np.ndarray:
        d = self.system_dim
        block = self.unitary.reorder(
            (self.ancilla_label, self.system_label), (self.ancilla_label, self.system_label)
        ).data
        return block[i * d:(i + 1) * d, 0:d].copy()


@dataclass(frozen=True)
class CptpDiagnostics:
    cp_floor: float
    tp_deviation: float
    tolerance: float = 1e-9
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def is_cp(self) -> bool:
        return self.cp_floor >= -self.tolerance

    @property
    def is_tp(self) -> bool:
        return self.tp_deviation <= self.tolerance

    @property
    def is_cptp(self) -> bool:
        return self.is_cp and self.is_tp

    def __bool__(self) -> bool:
        return self.is_cptp

    def to_dict(self) -> dict:
        return {
            "cp_floor": self.cp_floor,
            "tp_deviation": self.tp_deviation,
            "tolerance": self.tolerance,
            "is_cp": self.is_cp,
            "is_tp": self.is_tp,
            "is_cptp": self.is_cptp,
        }
