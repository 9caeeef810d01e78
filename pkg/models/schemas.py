from __future__ import annotations

import json
import logging
from typing import Any, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from models.channel import Channel
from models.errors import AcausalError, ParseError
from models.labeled import LabeledOperator, StateVector
from models.pctc import PctcSpec
from models.process import ProcessMatrix, Slot

logger = logging.getLogger(__name__)

ComplexPair = list[float]
SubsystemSpec = Union[int, list[tuple[str, int]]]


def encode_complex(z: complex) -> ComplexPair:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def encode_vector(amplitudes: np.ndarray) -> list[ComplexPair]:
    return [encode_complex(z) for z in np.asarray(amplitudes).reshape(-1)]


def encode_sparse_vector(amplitudes: np.ndarray, cutoff: float = 0.0) -> list[list]:
    """[[index, [re, im]], ...] for entries with magnitude above cutoff"""
    a = np.asarray(amplitudes).reshape(-1)
    return [[int(i), encode_complex(a[i])] for i in np.flatnonzero(np.abs(a) > cutoff)]


def encode_matrix(matrix: np.ndarray) -> list[list[ComplexPair]]:
    return [encode_vector(row) for row in np.asarray(matrix)]


def _complex(pair: Any, where: str) -> complex:
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise ParseError(f"{where}: complex numbers are written as [re, im], got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def decode_vector(entries: list, length: Optional[int] = None, where: str = "vector") -> np.ndarray:
    values = np.array([_complex(p, f"{where}[{i}]") for i, p in enumerate(entries)], dtype=np.complex128)
    if length is not None and values.size != length:
        raise ParseError(f"{where}: expected {length} amplitudes, got {values.size}")
    return values


def decode_sparse_vector(entries: list, length: int, where: str = "sparse_vector") -> np.ndarray:
    values = np.zeros(length, dtype=np.complex128)
    for item in entries:
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise ParseError(f"{where}: entries are [index, [re, im]], got {item!r}")
        index = int(item[0])
        if not 0 <= index < length:
            raise ParseError(f"{where}: index {index} outside [0, {length})")
        values[index] += _complex(item[1], f"{where}[{index}]")
    return values


def decode_matrix(rows: list, shape: Optional[tuple[int, int]] = None, where: str = "matrix") -> np.ndarray:
    if len({len(row) for row in rows}) > 1:
        raise ParseError(f"{where}: rows have different lengths")
    matrix = np.array(
        [[_complex(p, f"{where}[{r}][{c}]") for c, p in enumerate(row)] for r, row in enumerate(rows)],
        dtype=np.complex128,
    )
    if matrix.ndim != 2:
        raise ParseError(f"{where}: expected a nested list of rows")
    if shape is not None and matrix.shape != shape:
        raise ParseError(f"{where}: expected shape {shape}, got {matrix.shape}")
    return matrix


def _subsystems(spec: SubsystemSpec, default_label: str) -> list[tuple[str, int]]:
    if isinstance(spec, int):
        return [(default_label, spec)]
    return [(str(label), int(dim)) for label, dim in spec]


class SlotHeader(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    name: Optional[str] = None
    in_dim: int = Field(alias="in", ge=1)
    out_dim: int = Field(alias="out", ge=1)


class ProcessHeader(BaseModel):
    """Dimensions of P, F and the slots; P and F are a dimension or a list of [label, dim]"""
    P: SubsystemSpec
    F: SubsystemSpec
    slots: list[SlotHeader] = Field(min_length=1)

    @field_validator("P", "F")
    @classmethod
    def _positive(cls, value):
        dims = [value] if isinstance(value, int) else [dim for _, dim in value]
        if any(d < 1 for d in dims):
            raise ValueError("dimensions must be positive")
        return value


class ProcessFile(BaseModel):
    """Process file: amplitudes follow the canonical order P, (A_I, A_O) per slot, F"""
    name: str = ""
    header: ProcessHeader
    vector: Optional[list[ComplexPair]] = None
    sparse_vector: Optional[list[list[Any]]] = None
    matrix: Optional[list[list[ComplexPair]]] = None

    @model_validator(mode="after")
    def _one_body(self):
        bodies = [b for b in (self.vector, self.sparse_vector, self.matrix) if b is not None]
        if len(bodies) != 1:
            raise ValueError("exactly one of vector, sparse_vector or matrix is required")
        return self

    def to_process(self) -> ProcessMatrix:
        past = _subsystems(self.header.P, "P")
        future = _subsystems(self.header.F, "F")
        slots = tuple(
            Slot(s.name or f"A{k}", f"AI{k}", f"AO{k}", s.in_dim, s.out_dim)
            for k, s in enumerate(self.header.slots)
        )
        labels = list(past)
        for s in slots:
            labels.extend([(s.in_label, s.in_dim), (s.out_label, s.out_dim)])
        labels.extend(future)
        size = int(np.prod([dim for _, dim in labels]))
        if self.matrix is not None:
            data = decode_matrix(self.matrix, (size, size))
            return ProcessMatrix(past, future, slots, matrix=LabeledOperator.square(data, labels), name=self.name)
        if self.vector is not None:
            amplitudes = decode_vector(self.vector, size)
        else:
            amplitudes = decode_sparse_vector(self.sparse_vector, size)
        return ProcessMatrix(past, future, slots, vector=StateVector(amplitudes, labels), name=self.name)

    @classmethod
    def from_process(cls, w: ProcessMatrix, sparse: bool = True) -> ProcessFile:
        header = ProcessHeader(
            P=[list(s) for s in w.past],
            F=[list(s) for s in w.future],
            slots=[SlotHeader(name=s.name, **{"in": s.in_dim, "out": s.out_dim}) for s in w.slots],
        )
        order = [s.label for s in w.subsystems]
        if w.is_pure:
            amplitudes = w.vector.reorder(order).amplitudes
            if sparse:
                return cls(name=w.name, header=header, sparse_vector=encode_sparse_vector(amplitudes))
            return cls(name=w.name, header=header, vector=encode_vector(amplitudes))
        return cls(name=w.name, header=header, matrix=encode_matrix(w.matrix.reorder(order, order).data))


class StateFile(BaseModel):
    subsystems: list[tuple[str, int]] = Field(min_length=1)
    amplitudes: list[ComplexPair]

    def to_state(self) -> StateVector:
        size = int(np.prod([dim for _, dim in self.subsystems]))
        return StateVector(decode_vector(self.amplitudes, size, "amplitudes"), self.subsystems)


class ChannelFile(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    in_dim: int = Field(alias="in", ge=1)
    out_dim: int = Field(alias="out", ge=1)
    kraus: Optional[list[list[list[ComplexPair]]]] = None
    choi: Optional[list[list[ComplexPair]]] = None
    name: str = ""

    @model_validator(mode="after")
    def _one_body(self):
        if (self.kraus is None) == (self.choi is None):
            raise ValueError("exactly one of kraus or choi is required")
        return self

    def to_channel(self) -> Channel:
        if self.kraus is not None:
            shape = (self.out_dim, self.in_dim)
            ops = [decode_matrix(k, shape, f"kraus[{i}]") for i, k in enumerate(self.kraus)]
            return Channel.from_kraus(ops, name=self.name)
        size = self.in_dim * self.out_dim
        return Channel.from_choi(decode_matrix(self.choi, (size, size), "choi"), self.in_dim, self.out_dim, self.name)


class UnitaryFile(BaseModel):
    """Gate for P-CTC evolution: a square operator over `subsystems` with wired (output, input) pairs"""
    subsystems: list[tuple[str, int]] = Field(min_length=1)
    ctc_pairs: list[tuple[str, str]] = Field(default_factory=list)
    matrix: list[list[ComplexPair]]

    def to_spec(self) -> PctcSpec:
        size = int(np.prod([dim for _, dim in self.subsystems]))
        data = decode_matrix(self.matrix, (size, size))
        return PctcSpec(LabeledOperator.square(data, self.subsystems), tuple(self.ctc_pairs))


def read_json(path: str) -> Any:
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise ParseError(f"Input file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path} is not valid JSON: {str(e)}") from e


def load_model(path: str, model: type[BaseModel]) -> BaseModel:
    data = read_json(path)
    try:
        return model.model_validate(data)
    except ValidationError as e:
        logger.error(f"Validation error in {path}: {str(e)}")
        raise ParseError(f"{path} does not match the {model.__name__} format: {e.error_count()} error(s)") from e


def load_process(path: str) -> ProcessMatrix:
    parsed = load_model(path, ProcessFile)
    try:
        return parsed.to_process()
    except ParseError:
        raise
    except (AcausalError, ValueError) as e:
        raise ParseError(f"{path}: {str(e)}") from e


def load_state(path: str) -> StateVector:
    parsed = load_model(path, StateFile)
    try:
        return parsed.to_state()
    except ParseError:
        raise
    except (AcausalError, ValueError) as e:
        raise ParseError(f"{path}: {str(e)}") from e


def load_channel(path: str) -> Channel:
    parsed = load_model(path, ChannelFile)
    try:
        return parsed.to_channel()
    except ParseError:
        raise
    except (AcausalError, ValueError) as e:
        raise ParseError(f"{path}: {str(e)}") from e


def load_pctc(path: str) -> PctcSpec:
    parsed = load_model(path, UnitaryFile)
    try:
        return parsed.to_spec()
    except ParseError:
        raise
    except (AcausalError, ValueError) as e:
        raise ParseError(f"{path}: {str(e)}") from e
