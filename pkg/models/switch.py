from __future__ import annotations

import math
from dataclasses import dataclass

from models.circuit import GateList
from models.labeled import LabeledOperator
from models.process import ProcessMatrix


def register_labels(n: int) -> tuple[str, ...]:
    """Unary control qubits in circuit order: b11, b21, b22, b31, ..."""
    return tuple(f"b{k}{i}" for k in range(1, n) for i in range(1, k + 1))


@dataclass(frozen=True)
class FactoradicCode:
    """s = sum_k a_k k! with a_k <= k, plus the unary bits b_{k,i} = [i <= a_k]"""
    n: int
    digits: tuple[int, ...]

    def digit(self, k: int) -> int:
        """a_k for 1 <= k <= n-1"""
        return self.digits[k - 1]

    def bits(self, k: int) -> tuple[int, ...]:
        """(b_{k,1}, ..., b_{k,k})"""
        return tuple(int(i <= self.digit(k)) for i in range(1, k + 1))

    @property
    def value(self) -> int:
        return sum(a * math.factorial(k) for k, a in enumerate(self.digits, start=1))

    @property
    def unary(self) -> dict[str, int]:
        return {f"b{k}{i}": bit for k in range(1, self.n) for i, bit in enumerate(self.bits(k), start=1)}

    @property
    def register(self) -> tuple[int, ...]:
        """Bits in the order of register_labels(n)"""
        unary = self.unary
        return tuple(unary[label] for label in register_labels(self.n))


@dataclass(frozen=True)
class SwitchProcess:
    n: int
    d: int
    process: ProcessMatrix
    orders: tuple[tuple[int, ...], ...]

    @property
    def control_dim(self) -> int:
        return math.factorial(self.n)


@dataclass(frozen=True)
class SwitchCircuit:
    """The controlled-SWAP unitary between the party boxes, with its CTC wiring"""
    n: int
    d: int
    gates: GateList
    unitary: LabeledOperator
    controls: tuple[str, ...]
    ctc_pairs: tuple[tuple[str, str], ...]

    @property
    def control_qubits(self) -> int:
        return len(self.controls)
