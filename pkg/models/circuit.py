from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

KNOWN_GATES = ("CSWAP", "CNOT", "X", "SWAP", "F-ORACLE")


@dataclass(frozen=True)
class Gate:
    """One gate of a gate list; party boxes carry the party index"""
    name: str
    controls: tuple[str, ...] = ()
    targets: tuple[str, ...] = ()
    matrix: Optional[np.ndarray] = None
    party: Optional[int] = None
    adjoint: bool = False

    @property
    def is_query(self) -> bool:
        return self.party is not None

    def to_dict(self) -> dict:
        entry = {"name": self.name, "controls": list(self.controls), "targets": list(self.targets)}
        if self.matrix is not None and self.name not in KNOWN_GATES:
            entry["matrix"] = [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(self.matrix)]
        if self.party is not None:
            entry["party"] = self.party
            entry["adjoint"] = self.adjoint
        return entry


@dataclass(frozen=True)
class GateList:
    gates: tuple[Gate, ...]
    wires: tuple[str, ...] = ()
    notes: dict = field(default_factory=dict)

    @property
    def query_count(self) -> int:
        return sum(1 for g in self.gates if g.is_query)

    def to_dict(self) -> dict:
        return {"wires": list(self.wires), "gates": [g.to_dict() for g in self.gates], **self.notes}
