from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from models.errors import DimensionMismatch, DuplicateLabel
from models.labeled import LabeledOperator, Subsystem, label_names, position


@dataclass(frozen=True)
class PctcSpec:
    """A gate whose `ctc_pairs` outputs are teleported back into its inputs.

    Each pair is (output label, input label). Whatever is not part of a pair
    is chronology respecting: leftover inputs form the past, leftover outputs
    the future. A purification ancilla, if present, starts in |0> and is
    kept out of both.
    """

    unitary: LabeledOperator
    ctc_pairs: tuple[tuple[str, str], ...]
    ancilla: Optional[Subsystem] = None

    def __post_init__(self):
        pairs = tuple((str(out), str(inp)) for out, inp in self.ctc_pairs)
        outs = [out for out, _ in pairs]
        ins = [inp for _, inp in pairs]
        if len(set(outs)) != len(outs) or len(set(ins)) != len(ins):
            raise DuplicateLabel(f"CTC pairs reuse a subsystem: {pairs}")
        for out, inp in pairs:
            d_out = self.unitary.row_labels[position(self.unitary.row_labels, out)].dim
            d_in = self.unitary.col_labels[position(self.unitary.col_labels, inp)].dim
            if d_out != d_in:
                raise DimensionMismatch(f"CTC pair ({out}, {inp}) joins dimensions {d_out} and {d_in}")
        if self.ancilla is not None and self.ancilla.label in outs + ins:
            raise DuplicateLabel(f"Ancilla {self.ancilla.label!r} cannot be a CTC subsystem")
        object.__setattr__(self, "ctc_pairs", pairs)

    @property
    def ctc_dims(self) -> tuple[int, ...]:
        return tuple(
            self.unitary.row_labels[position(self.unitary.row_labels, out)].dim for out, _ in self.ctc_pairs
        )

    @property
    def past(self) -> tuple[Subsystem, ...]:
        skip = {inp for _, inp in self.ctc_pairs}
        if self.ancilla is not None:
            skip.add(self.ancilla.label)
        return tuple(s for s in self.unitary.col_labels if s.label not in skip)

    @property
    def future(self) -> tuple[Subsystem, ...]:
        skip = {out for out, _ in self.ctc_pairs}
        if self.ancilla is not None:
            skip.add(self.ancilla.label)
        return tuple(s for s in self.unitary.row_labels if s.label not in skip)

    def describe(self) -> dict:
        return {
            "past": [list(s) for s in self.past],
            "future": [list(s) for s in self.future],
            "ctc_pairs": [list(p) for p in self.ctc_pairs],
            "ancilla": list(self.ancilla) if self.ancilla else None,
            "labels": list(label_names(self.unitary.col_labels)),
        }
