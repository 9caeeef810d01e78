from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from pydantic import BaseModel

from models.det import BitString
from models.errors import DimensionMismatch


@dataclass(frozen=True)
class GameSpec:
    """Inputs are uniform over `inputs`; party k must answer targets[i][k] on inputs[i]"""
    n: int
    inputs: tuple[BitString, ...]
    targets: tuple[BitString, ...]

    @property
    def size(self) -> int:
        return len(self.inputs)


@dataclass(frozen=True)
class CausalStrategy:
    """Deterministic strategy under a fixed total order.

    tables[j] belongs to the party order[j] and maps the game inputs of
    order[0], ..., order[j] (in that order) to its answer bit.
    """
    order: tuple[int, ...]
    tables: tuple[dict[BitString, int], ...]
    name: str = ""

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise DimensionMismatch(f"Order {self.order} is not a permutation of the parties")
        if len(self.tables) != len(self.order):
            raise DimensionMismatch(f"{len(self.order)} parties but {len(self.tables)} decision tables")
        for j, table in enumerate(self.tables):
            if any(len(key) != j + 1 for key in table):
                raise DimensionMismatch(f"Table of party {self.order[j]} uses inputs it cannot have seen")

    @property
    def n(self) -> int:
        return len(self.order)

    def answers(self, x: BitString) -> BitString:
        a = [0] * self.n
        seen = tuple(x[p] for p in self.order)
        for j, party in enumerate(self.order):
            a[party] = self.tables[j].get(seen[: j + 1], 0)
        return tuple(a)


@dataclass(frozen=True)
class BruteForceResult:
    n: int
    value: float
    per_order: dict[tuple[int, ...], float]
    best_order: tuple[int, ...]
    strategies: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "value": self.value,
            "best_order": list(self.best_order),
            "per_order": {"".join(map(str, o)): v for o, v in self.per_order.items()},
            "strategies": self.strategies,
        }


class GameRow(BaseModel):
    n: int
    process: Optional[float] = None
    causal_guess: Optional[float] = None
    brute_force: Optional[float] = None
    bound: float
