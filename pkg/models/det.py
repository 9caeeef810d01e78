from __future__ import annotations

from dataclasses import dataclass

from models.channel import Channel
from models.circuit import GateList
from models.process import ProcessMatrix

BitString = tuple[int, ...]


@dataclass(frozen=True)
class DetProcess:
    """Purified w_det process; `table[i]` is the index of f(x) for the string with index i"""
    n: int
    process: ProcessMatrix
    table: tuple[int, ...]

    @property
    def dim(self) -> int:
        return 2 ** self.n


@dataclass(frozen=True)
class ClassicalReduction:
    mapping: dict[BitString, BitString]
    diagonal: bool
    off_diagonal: float

    def to_dict(self) -> dict:
        return {
            "mapping": {"".join(map(str, x)): "".join(map(str, y)) for x, y in self.mapping.items()},
            "diagonal": self.diagonal,
            "off_diagonal": self.off_diagonal,
        }


@dataclass(frozen=True)
class OrderedRun:
    """Result of running the causally ordered circuit: the P -> F channel and its diagnostics"""
    channel: Channel
    circuit: GateList
    leakage: float

    @property
    def queries(self) -> int:
        return self.circuit.query_count
