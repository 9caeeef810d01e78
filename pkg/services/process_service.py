from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from models.channel import Channel, CptpDiagnostics, Instrument
from models.errors import AcausalError, DimensionMismatch, NotPure, ResourceLimit, UndefinedEvolution
from models.labeled import LabeledOperator, StateVector, Subsystem, label_names, total_dim
from models.pctc import PctcSpec
from models.process import ProcessMatrix, SampleDeviation, SamplerConfig, Slot, ValidityReport
from services import channel_service
from services.pctc_service import contract
from services.tensor_service import double_ket, undouble_operator

logger = logging.getLogger(__name__)


# Contraction

@dataclass
class _Partial:
    """Process with some slots already contracted.

    Pure form keeps a batch of vectors (axis 0) with real weights; matrix form
    keeps the row axes followed by the column axes of W.
    """
    labels: list[str]
    tensor: np.ndarray
    weights: Optional[np.ndarray] = None

    @property
    def pure(self) -> bool:
        return self.weights is not None


@dataclass
class Contraction:
    """Result of contracting every slot: the induced map from P to F"""
    past: tuple[Subsystem, ...]
    future: tuple[Subsystem, ...]
    weights: Optional[np.ndarray] = None
    vectors: Optional[np.ndarray] = None
    choi_matrix: Optional[np.ndarray] = None

    @property
    def d_in(self) -> int:
        return total_dim(self.past)

    @property
    def d_out(self) -> int:
        return total_dim(self.future)

    def tp_operator(self) -> np.ndarray:
        """sum_i K_i^dag K_i of the induced map"""
        if self.vectors is not None:
            g = self.vectors.reshape(-1, self.d_in, self.d_out)
            return np.einsum("b,bpf,bqf->pq", self.weights, g.conj(), g)
        t = self.choi_matrix.reshape(self.d_in, self.d_out, self.d_in, self.d_out)
        return np.einsum("iaja->ij", t).T

    def choi(self) -> np.ndarray:
        if self.choi_matrix is not None:
            return self.choi_matrix
        return self.vectors.T @ (self.weights[:, None] * self.vectors.conj())

    def to_channel(self, name: str = "induced") -> Channel:
        labels = self.past + self.future
        if self.vectors is not None and np.all(self.weights >= 0):
            g = self.vectors.reshape(-1, self.d_in, self.d_out)
            kraus = tuple(np.sqrt(w) * g[b].T for b, w in enumerate(self.weights))
            return Channel(in_dim=self.d_in, out_dim=self.d_out, kraus=kraus, name=name)
        choi = LabeledOperator.square(self.choi(), labels)
        return Channel(in_dim=self.d_in, out_dim=self.d_out, choi=choi, name=name)


def _check_channels(w: ProcessMatrix, channels: Sequence[Channel]) -> None:
    if len(channels) != w.n:
        raise DimensionMismatch(f"Process has {w.n} slots but {len(channels)} channels were given")
    for slot, channel in zip(w.slots, channels):
        _check_slot(slot, channel)


def _check_slot(slot: Slot, channel: Channel) -> None:
    if (channel.in_dim, channel.out_dim) != (slot.in_dim, slot.out_dim):
        raise DimensionMismatch(
            f"Slot {slot.name} expects {slot.in_dim}->{slot.out_dim}, "
            f"channel is {channel.in_dim}->{channel.out_dim}"
        )


def _start(w: ProcessMatrix) -> _Partial:
    if w.is_pure:
        labels = list(label_names(w.vector.subsystems))
        return _Partial(labels, w.vector.tensor()[None, ...], np.ones(1))
    return _Partial(list(label_names(w.matrix.row_labels)), w.matrix.tensor())


def _absorb(state: _Partial, slot: Slot, channel: Channel) -> _Partial:
    """Contract one slot against the (transposed) Choi operator of `channel`"""
    i_in = state.labels.index(slot.in_label)
    i_out = state.labels.index(slot.out_label)
    keep = [i for i in range(len(state.labels)) if i not in (i_in, i_out)]
    labels = [state.labels[i] for i in keep]

    if state.pure:
        weights, vectors = channel_service.signed_decomposition(channel)
        t = np.moveaxis(state.tensor, [1 + i_in, 1 + i_out], [-2, -1])
        rest = t.shape[1:-2]
        batch = t.shape[0]
        t = t.reshape(batch, -1, slot.in_dim * slot.out_dim)
        contracted = np.einsum("bRx,rx->brR", t, vectors)
        tensor = contracted.reshape((batch * len(weights),) + rest)
        return _Partial(labels, tensor, np.outer(state.weights, weights).reshape(-1))

    n = len(state.labels)
    row_ids = list(range(n))
    col_ids = list(range(n, 2 * n))
    choi = channel_service.choi_of(channel).data.reshape(
        slot.in_dim, slot.out_dim, slot.in_dim, slot.out_dim
    )
    choi_ids = [row_ids[i_in], row_ids[i_out], col_ids[i_in], col_ids[i_out]]
    out_ids = [row_ids[i] for i in keep] + [col_ids[i] for i in keep]
    tensor = np.einsum(state.tensor, row_ids + col_ids, choi, choi_ids, out_ids, optimize=True)
    return _Partial(labels, tensor)


def _finish(state: _Partial, w: ProcessMatrix) -> Contraction:
    order = list(label_names(w.past)) + list(label_names(w.future))
    perm = [state.labels.index(name) for name in order]
    d = w.past_dim * w.future_dim
    if state.pure:
        tensor = state.tensor.transpose([0] + [1 + p for p in perm])
        return Contraction(w.past, w.future, weights=state.weights, vectors=tensor.reshape(-1, d))
    n = len(state.labels)
    tensor = state.tensor.transpose(perm + [n + p for p in perm])
    return Contraction(w.past, w.future, choi_matrix=tensor.reshape(d, d))


def contract_process(w: ProcessMatrix, channels: Sequence[Channel]) -> Contraction:
    _check_channels(w, channels)
    state = _start(w)
    for slot, channel in zip(w.slots, channels):
        state = _absorb(state, slot, channel)
    return _finish(state, w)


def iterate_contractions(
    w: ProcessMatrix, options: Sequence[Sequence[Channel]]
) -> Iterator[tuple[tuple[int, ...], Contraction]]:
    """Contract every combination of per-slot options, sharing contracted prefixes"""
    if len(options) != w.n:
        raise DimensionMismatch(f"Process has {w.n} slots but {len(options)} option lists were given")
    for slot, choices in zip(w.slots, options):
        for channel in choices:
            _check_slot(slot, channel)

    def recurse(k: int, state: _Partial, prefix: tuple[int, ...]):
        if k == w.n:
            yield prefix, _finish(state, w)
            return
        for j, channel in enumerate(options[k]):
            yield from recurse(k + 1, _absorb(state, w.slots[k], channel), prefix + (j,))

    yield from recurse(0, _start(w), ())


# Operations

def apply_process(w: ProcessMatrix, channels: Sequence[Channel]) -> Channel:
    """Induced map G from P to F: G = tr[W (x)_k (A^k)^T] over the party spaces"""
    return contract_process(w, channels).to_channel(name=f"G[{w.name}]" if w.name else "G")


def _check_rho(w: ProcessMatrix, rho_p: np.ndarray) -> np.ndarray:
    rho_p = np.asarray(rho_p, dtype=np.complex128)
    if rho_p.shape != (w.past_dim, w.past_dim):
        raise DimensionMismatch(f"Input state of shape {rho_p.shape}, past has dimension {w.past_dim}")
    return rho_p


def _trace_output(contraction: Contraction, rho_p: np.ndarray) -> float:
    """tr G(rho) = tr(rho sum K^dag K)"""
    return float(np.trace(contraction.tp_operator() @ rho_p).real)


def postselection_probability(w: ProcessMatrix, channels: Sequence[Channel], rho_p: np.ndarray) -> float:
    """Probability that every teleportation post-selection in the circuit succeeds"""
    rho_p = _check_rho(w, rho_p)
    return _trace_output(contract_process(w, channels), rho_p) * w.expected_probability


def renormalized_output(w: ProcessMatrix, channels: Sequence[Channel], rho_p: np.ndarray) -> np.ndarray:
    """State on F after successful post-selection: G(rho) / tr G(rho)"""
    rho_p = _check_rho(w, rho_p)
    g = apply_process(w, channels)
    out = channel_service.apply_channel(g, rho_p)
    weight = float(np.trace(out).real)
    if weight < 1e-12:
        raise UndefinedEvolution(f"Post-selection never succeeds (tr G(rho) = {weight:.3e})")
    return out / weight


def expected_repetitions(w: ProcessMatrix, confidence: float = 0.9) -> int:
    """Circuit runs needed to see one successful post-selection with the given confidence"""
    if not 0 < confidence < 1:
        raise ValueError(f"Confidence must lie in (0, 1), got {confidence}")
    p = w.expected_probability
    if p >= 1:
        return 1
    return math.ceil(math.log(1 - confidence) / math.log1p(-p))


def induced_unitary(w: ProcessMatrix) -> LabeledOperator:
    """U_G = d^n * K where K is the P-CTC contraction of U_W over every A_I -> A_O loop"""
    if not w.is_pure:
        raise NotPure("induced_unitary needs a process stored as a vector")
    for slot in w.slots:
        if slot.in_dim != slot.out_dim:
            raise DimensionMismatch(f"Slot {slot.name} is not square ({slot.in_dim}->{slot.out_dim})")
    u_w = undouble_operator(w.vector, w.input_labels, w.output_labels)
    spec = PctcSpec(u_w, tuple((s.in_label, s.out_label) for s in w.slots))
    k = contract(spec) * math.prod(s.in_dim for s in w.slots)
    return k.reorder(label_names(w.future), label_names(w.past))


def outcome_probabilities(
    w: ProcessMatrix, instruments: Sequence[Instrument], rho_p: np.ndarray
) -> dict[tuple[int, ...], float]:
    """Joint outcome distribution p(a) = tr G_a(rho_P)"""
    rho_p = _check_rho(w, rho_p)
    options = [[channel for _, channel in inst.elements] for inst in instruments]
    outcomes = [inst.outcomes for inst in instruments]
    distribution = {}
    for index, contraction in iterate_contractions(w, options):
        key = tuple(outcomes[k][j] for k, j in enumerate(index))
        distribution[key] = _trace_output(contraction, rho_p)
    return distribution


def structure_diagnostics(w: ProcessMatrix, tol: float = 1e-9) -> CptpDiagnostics:
    """Check that W is the Choi operator of a CPTP map from P, A_O to F, A_I"""
    ins, outs = w.input_labels, w.output_labels
    if w.is_pure:
        # rank one, so CP holds; TP means U_W is an isometry
        u_w = undouble_operator(w.vector, ins, outs).data
        deviation = float(np.linalg.norm(u_w.conj().T @ u_w - np.eye(u_w.shape[1]), 2))
        return CptpDiagnostics(cp_floor=0.0, tp_deviation=deviation, tolerance=tol)
    m = w.matrix.reorder(ins + outs, ins + outs)
    d_in = total_dim(m.row_labels[: len(ins)])
    d_out = total_dim(m.row_labels[len(ins):])
    channel = Channel.from_choi(m.data, d_in, d_out)
    return channel_service.is_cptp(channel, tol)


# Validity

def affine_basis(in_dim: int, out_dim: int) -> list[Channel]:
    """Points spanning the affine hull of Choi operators of trace-preserving maps.

    The completely depolarizing map plus one perturbation per element of
    Herm(in) (x) Herm_0(out); the perturbed points need not be CP.
    """
    base = np.eye(in_dim * out_dim, dtype=np.complex128) / out_dim
    eps = 0.5 / out_dim
    points = [Channel.from_choi(base, in_dim, out_dim, name="depolarizing")]
    for h_in in _hermitian_basis(in_dim, traceless=False):
        for h_out in _hermitian_basis(out_dim, traceless=True):
            points.append(Channel.from_choi(base + eps * np.kron(h_in, h_out), in_dim, out_dim, name="perturbed"))
    return points


def _hermitian_basis(d: int, traceless: bool) -> list[np.ndarray]:
    basis = []
    for a in range(d):
        for b in range(a + 1, d):
            sym = np.zeros((d, d), dtype=np.complex128)
            sym[a, b] = sym[b, a] = 1
            anti = np.zeros((d, d), dtype=np.complex128)
            anti[a, b], anti[b, a] = -1j, 1j
            basis.extend([sym, anti])
    for a in range(d):
        diag = np.zeros((d, d), dtype=np.complex128)
        if traceless:
            if a == 0:
                continue
            diag[0, 0], diag[a, a] = 1, -1
        else:
            diag[a, a] = 1
        basis.append(diag)
    return basis


class ProcessValidator:
    """Checks the process condition for sampled and affine-basis party channels"""

    def __init__(self, config: Optional[SamplerConfig] = None):
        self.config = config or SamplerConfig()

    def check(self, w: ProcessMatrix) -> ValidityReport:
        try:
            logger.info(
                f"Validating process {w.name or '<unnamed>'} ({w.n} slots, "
                f"{'vector' if w.is_pure else 'matrix'} form) with {self.config.samples} samples"
            )
            structure = structure_diagnostics(w, self.config.tolerance)
            if self.config.workers > 1:
                with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                    samples = list(pool.map(lambda i: self._sample(w, i), range(self.config.samples)))
            else:
                samples = [self._sample(w, i) for i in range(self.config.samples)]

            basis_tuples, basis_max = 0, None
            if self.config.mode == "basis":
                basis_tuples, basis_max = self._basis(w)

            report = self._build_report(w, samples, structure, basis_tuples, basis_max)
            logger.info(
                f"Process {w.name or '<unnamed>'} is {report.verdict}: "
                f"tp deviation {report.max_tp_deviation:.3e}, "
                f"probability deviation {report.max_probability_deviation:.3e}"
            )
            return report
        except AcausalError as e:
            logger.error(f"Error validating process: {str(e)}")
            raise
        except Exception as e:
            logger.error(f"Unexpected error validating process: {str(e)}")
            raise

    def sample_channels(self, w: ProcessMatrix, rng: np.random.Generator) -> list[Channel]:
        """Full-rank random channels; the first slot is always non-unital"""
        channels = []
        for k, slot in enumerate(w.slots):
            if k == 0 and slot.in_dim == slot.out_dim:
                channels.append(channel_service.random_nonunital(rng, slot.in_dim, slot.out_dim))
            else:
                channels.append(channel_service.random_cptp(rng, slot.in_dim, slot.out_dim))
        return channels

    def _sample(self, w: ProcessMatrix, index: int) -> SampleDeviation:
        rng = np.random.default_rng([self.config.seed, index])
        channels = self.sample_channels(w, rng)
        rho_p = channel_service.random_density(rng, w.past_dim)
        contraction = contract_process(w, channels)
        tp = contraction.tp_operator()
        tp_deviation = float(np.linalg.norm(tp - np.eye(w.past_dim), 2))
        probability = float(np.trace(tp @ rho_p).real) * w.expected_probability
        cp_floor = None
        if not w.is_pure:
            choi = contraction.choi()
            cp_floor = float(np.linalg.eigvalsh((choi + choi.conj().T) / 2)[0])
        return SampleDeviation(
            index=index,
            tp_deviation=tp_deviation,
            probability=probability,
            probability_deviation=abs(probability - w.expected_probability),
            cp_floor=cp_floor,
        )

    def _basis(self, w: ProcessMatrix) -> tuple[int, float]:
        options = [affine_basis(s.in_dim, s.out_dim) for s in w.slots]
        count = math.prod(len(o) for o in options)
        if count > self.config.basis_limit:
            raise ResourceLimit(f"Affine basis check needs {count} tuples, limit is {self.config.basis_limit}")
        worst = 0.0
        for _, contraction in iterate_contractions(w, options):
            deviation = float(np.linalg.norm(contraction.tp_operator() - np.eye(w.past_dim), 2))
            worst = max(worst, deviation)
        logger.info(f"Affine basis check over {count} tuples: max tp deviation {worst:.3e}")
        return count, worst

    def _build_report(self, w, samples, structure, basis_tuples, basis_max) -> ValidityReport:
        tol = self.config.tolerance
        max_tp = max(s.tp_deviation for s in samples)
        max_prob = max(s.probability_deviation for s in samples)
        floors = [s.cp_floor for s in samples if s.cp_floor is not None]
        min_cp = min(floors) if floors else None
        valid = max_tp < tol and max_prob < tol
        if min_cp is not None and min_cp < -tol:
            valid = False
        if basis_max is not None and basis_max >= tol:
            valid = False
        return ValidityReport(
            process=w.name,
            mode=self.config.mode,
            samples=len(samples),
            seed=self.config.seed,
            tolerance=tol,
            expected_probability=w.expected_probability,
            max_tp_deviation=max_tp,
            max_probability_deviation=max_prob,
            min_cp_eigenvalue=min_cp,
            structure_tp_deviation=structure.tp_deviation,
            basis_tuples=basis_tuples,
            basis_max_tp_deviation=basis_max,
            per_sample=samples,
            verdict="valid" if valid else "invalid",
        )


def check_validity(w: ProcessMatrix, config: Optional[SamplerConfig] = None) -> ValidityReport:
    return ProcessValidator(config).check(w)


# Builders

def pair_vector(dim: int, matrix: Optional[np.ndarray] = None) -> np.ndarray:
    """Coefficients of |M>> (|1>> when matrix is None) as a dim x dim array (input, output)"""
    m = np.eye(dim, dtype=np.complex128) if matrix is None else np.asarray(matrix, dtype=np.complex128)
    return m.T.copy()


def process_from_unitary(
    u_w: LabeledOperator,
    past: Sequence[tuple[str, int]],
    future: Sequence[tuple[str, int]],
    slots: Sequence[Slot],
    name: str = "",
) -> ProcessMatrix:
    """Pure process |U_W>> of a unitary from (past, A_O) to (future, A_I)"""
    vector = double_ket(u_w)
    return ProcessMatrix(tuple(past), tuple(future), tuple(slots), vector=vector, name=name)


def ordered_wiring(n: int = 2, d: int = 2) -> ProcessMatrix:
    """Causally ordered identity wiring P -> A0 -> A1 -> ... -> F"""
    slots = tuple(Slot.numbered(k, d) for k in range(n))
    chain = ["P"] + [x for s in slots for x in (s.in_label, s.out_label)] + ["F"]
    labels, tensor = [], np.ones(())
    for k in range(0, len(chain), 2):
        labels.extend(chain[k:k + 2])
        tensor = np.multiply.outer(tensor, pair_vector(d))
    vector = StateVector(tensor.reshape(-1), tuple((label, d) for label in labels))
    return ProcessMatrix((("P", d),), (("F", d),), slots, vector=vector, name=f"ordered_wiring_{n}")


def counterexample_process(u: np.ndarray, n: int = 2) -> ProcessMatrix:
    """U_W = 1 (x) U^(x)n: P goes straight to F, each A_O is fed to its own A_I through U"""
    u = np.asarray(u, dtype=np.complex128)
    d = u.shape[0]
    slots = tuple(Slot.numbered(k, d) for k in range(n))
    labels, tensor = ["P", "F"], pair_vector(d)
    for s in slots:
        labels.extend([s.out_label, s.in_label])
        tensor = np.multiply.outer(tensor, pair_vector(d, u))
    vector = StateVector(tensor.reshape(-1), tuple((label, d) for label in labels))
    return ProcessMatrix((("P", d),), (("F", d),), slots, vector=vector, name=f"counterexample_{n}")


def random_pure_process(seed, n: int = 2, d: int = 2) -> ProcessMatrix:
    """|U_W>> for a Haar-random U_W; generally not a valid process"""
    slots = tuple(Slot.numbered(k, d) for k in range(n))
    ins = [("P", d)] + [(s.out_label, d) for s in slots]
    outs = [("F", d)] + [(s.in_label, d) for s in slots]
    u = channel_service.random_unitary(seed, d ** (n + 1))
    u_w = LabeledOperator(u, outs, ins)
    return process_from_unitary(u_w, [("P", d)], [("F", d)], slots, name=f"random_pure_{n}")


def identity_channels(w: ProcessMatrix) -> list[Channel]:
    return [channel_service.identity_channel(s.in_dim) for s in w.slots]


__all__ = [
    "Contraction",
    "ProcessValidator",
    "affine_basis",
    "apply_process",
    "check_validity",
    "contract_process",
    "counterexample_process",
    "expected_repetitions",
    "induced_unitary",
    "iterate_contractions",
    "ordered_wiring",
    "outcome_probabilities",
    "postselection_probability",
    "process_from_unitary",
    "random_pure_process",
    "renormalized_output",
    "structure_diagnostics",
]
