from __future__ import annotations

import logging
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from models.channel import IN_LABEL, OUT_LABEL, Channel, CptpDiagnostics, Instrument, Purification
from models.errors import DimensionMismatch, NotCPTP, NotPSD, OutOfRange
from models.labeled import LabeledOperator
from services.tensor_service import undouble

logger = logging.getLogger(__name__)

KRAUS_CUTOFF = 1e-12
DEFAULT_TOL = 1e-9

SeedLike = Union[None, int, Sequence[int], np.random.SeedSequence, np.random.Generator]

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def get_generator(seed: SeedLike) -> np.random.Generator:
    """Return a Generator; a Generator passed in is used as is"""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# Conversions

def vec(matrix: np.ndarray) -> np.ndarray:
    """Coefficients of |M>> with the input index first"""
    return np.asarray(matrix, dtype=np.complex128).T.reshape(-1)


def kraus_to_choi(c: Channel) -> LabeledOperator:
    if c.kraus is None:
        raise ValueError("Channel has no Kraus representation")
    vectors = np.stack([vec(k) for k in c.kraus])
    choi = vectors.T @ vectors.conj()
    return LabeledOperator.square(choi, ((IN_LABEL, c.in_dim), (OUT_LABEL, c.out_dim)))


def choi_of(c: Channel) -> LabeledOperator:
    return c.choi if c.choi is not None else kraus_to_choi(c)


def choi_to_kraus(choi, in_dim: int, out_dim: int, tol: float = DEFAULT_TOL) -> Channel:
    """Kraus operators from the eigendecomposition of a PSD Choi operator"""
    data = choi.data if isinstance(choi, LabeledOperator) else np.asarray(choi, dtype=np.complex128)
    if data.shape != (in_dim * out_dim, in_dim * out_dim):
        raise DimensionMismatch(f"Choi of shape {data.shape} does not match {in_dim}->{out_dim}")
    hermitian = (data + data.conj().T) / 2
    eigenvalues, eigenvectors = np.linalg.eigh(hermitian)
    if eigenvalues[0] < -tol:
        raise NotPSD(f"Choi operator has eigenvalue {eigenvalues[0]:.3e}")
    kraus = [
        undouble(np.sqrt(lam) * eigenvectors[:, j], in_dim, out_dim)
        for j, lam in enumerate(eigenvalues)
        if lam > KRAUS_CUTOFF
    ]
    if not kraus:
        kraus = [np.zeros((out_dim, in_dim), dtype=np.complex128)]
    return Channel(in_dim=in_dim, out_dim=out_dim, kraus=tuple(kraus))


def kraus_of(c: Channel) -> tuple[np.ndarray, ...]:
    if c.kraus is not None:
        return c.kraus
    return choi_to_kraus(c.choi, c.in_dim, c.out_dim).kraus


def signed_decomposition(c: Channel) -> tuple[np.ndarray, np.ndarray]:
    """Weights and vectors with Choi = sum_j w_j |v_j><v_j|.

    Kraus channels give unit weights; a Choi operator is diagonalized and may
    produce negative weights (needed for affine perturbations that are not CP).
    """
    if c.kraus is not None:
        return np.ones(len(c.kraus)), np.stack([vec(k) for k in c.kraus])
    data = c.choi.data
    eigenvalues, eigenvectors = np.linalg.eigh((data + data.conj().T) / 2)
    keep = np.abs(eigenvalues) > KRAUS_CUTOFF
    if not np.any(keep):
        return np.zeros(1), np.zeros((1, data.shape[0]), dtype=np.complex128)
    return eigenvalues[keep], eigenvectors[:, keep].T.copy()


# Diagnostics

def tp_operator(c: Channel) -> np.ndarray:
    """sum_i K_i^dag K_i (or the Choi partial trace over the output, transposed)"""
    if c.kraus is not None:
        return sum(k.conj().T @ k for k in c.kraus)
    t = c.choi.data.reshape(c.in_dim, c.out_dim, c.in_dim, c.out_dim)
    return np.einsum("iaja->ij", t).T


def is_cptp(c: Channel, tol: float = DEFAULT_TOL) -> CptpDiagnostics:
    choi = choi_of(c).data
    notes = []
    asymmetry = float(np.abs(choi - choi.conj().T).max())
    if asymmetry > tol:
        notes.append(f"Choi operator is not Hermitian (deviation {asymmetry:.3e})")
    cp_floor = float(np.linalg.eigvalsh((choi + choi.conj().T) / 2)[0])
    if asymmetry > tol:
        cp_floor = min(cp_floor, -asymmetry)
    tp_deviation = float(np.linalg.norm(tp_operator(c) - np.eye(c.in_dim), 2))
    return CptpDiagnostics(cp_floor=cp_floor, tp_deviation=tp_deviation, tolerance=tol, notes=tuple(notes))


def instrument_diagnostics(instrument: Instrument, tol: float = DEFAULT_TOL) -> CptpDiagnostics:
    """CP floor over all elements together with the TP deviation of their sum"""
    floors = [is_cptp(channel, tol).cp_floor for _, channel in instrument.elements]
    total = sum(choi_of(channel).data for _, channel in instrument.elements)
    summed = Channel.from_choi(total, instrument.in_dim, instrument.out_dim)
    return CptpDiagnostics(cp_floor=min(floors), tp_deviation=is_cptp(summed, tol).tp_deviation, tolerance=tol)


def validate_instrument(instrument: Instrument, tol: float = DEFAULT_TOL) -> None:
    diagnostics = instrument_diagnostics(instrument, tol)
    if not diagnostics:
        raise NotCPTP(
            f"Instrument is not valid: cp floor {diagnostics.cp_floor:.3e}, "
            f"tp deviation {diagnostics.tp_deviation:.3e}"
        )


def choi_distance(a: Channel, b: Channel) -> float:
    """Operator norm of the difference of Choi operators"""
    if (a.in_dim, a.out_dim) != (b.in_dim, b.out_dim):
        raise DimensionMismatch(f"Cannot compare {a.in_dim}->{a.out_dim} with {b.in_dim}->{b.out_dim}")
    return float(np.linalg.norm(choi_of(a).data - choi_of(b).data, 2))


def apply_channel(c: Channel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (c.in_dim, c.in_dim):
        raise DimensionMismatch(f"State of shape {rho.shape} fed to a channel on dimension {c.in_dim}")
    if c.kraus is not None:
        return sum(k @ rho @ k.conj().T for k in c.kraus)
    t = c.choi.data.reshape(c.in_dim, c.out_dim, c.in_dim, c.out_dim)
    return np.einsum("ji,joip->op", rho, t)


# Sampling

def random_cptp(seed: SeedLike, in_dim: int, out_dim: int, kraus_rank: Optional[int] = None) -> Channel:
    """Random channel from a Haar-distributed Stinespring isometry.

    The isometry is the Q factor of a complex Ginibre matrix with the
    phases of R's diagonal absorbed, so the draw is Haar distributed.
    """
    rank = in_dim * out_dim if kraus_rank is None else int(kraus_rank)
    if rank < 1:
        raise OutOfRange(f"kraus_rank must be at least 1, got {rank}")
    rows = out_dim * rank
    if rows < in_dim:
        raise DimensionMismatch(f"No isometry from dimension {in_dim} into {out_dim}x{rank}")
    rng = get_generator(seed)
    z = (rng.standard_normal((rows, in_dim)) + 1j * rng.standard_normal((rows, in_dim))) / np.sqrt(2)
    q, r = scipy.linalg.qr(z, mode="economic")
    diagonal = np.diagonal(r)
    q = q * (diagonal / np.abs(diagonal))
    kraus = q.reshape(rank, out_dim, in_dim)
    return Channel(in_dim=in_dim, out_dim=out_dim, kraus=tuple(kraus), name=f"random(rank={rank})")


def random_unitary(seed: SeedLike, d: int) -> np.ndarray:
    return random_cptp(seed, d, d, kraus_rank=1).kraus[0].copy()


def random_density(seed: SeedLike, d: int) -> np.ndarray:
    """Full-rank density matrix from the Ginibre ensemble"""
    rng = get_generator(seed)
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def is_unital(c: Channel, tol: float = 1e-6) -> bool:
    if c.in_dim != c.out_dim:
        return False
    image = apply_channel(c, np.eye(c.in_dim))
    return bool(np.abs(image - np.eye(c.in_dim)).max() < tol)


def random_nonunital(seed: SeedLike, in_dim: int, out_dim: int, kraus_rank: Optional[int] = None) -> Channel:
    """random_cptp redrawn until the identity is not a fixed point"""
    rng = get_generator(seed)
    while True:
        channel = random_cptp(rng, in_dim, out_dim, kraus_rank)
        if not is_unital(channel):
            return channel


# Purification

def purify(c: Channel, tol: float = DEFAULT_TOL) -> Purification:
    """Complete the Stinespring isometry of `c` to a unitary on ancilla (x) system.

    The ancilla starts in |0> and its dimension is the smallest power of two
    holding the Kraus rank (1 for a unitary channel).
    """
    diagnostics = is_cptp(c, tol)
    if not diagnostics:
        raise NotCPTP(
            f"Cannot purify: cp floor {diagnostics.cp_floor:.3e}, tp deviation {diagnostics.tp_deviation:.3e}"
        )
    if c.in_dim != c.out_dim:
        raise DimensionMismatch("Purification needs equal input and output dimensions")
    kraus = kraus_of(c)
    rank, d = len(kraus), c.in_dim
    ancilla_dim = 1 if rank == 1 else 1 << (rank - 1).bit_length()
    isometry = np.zeros((ancilla_dim * d, d), dtype=np.complex128)
    for i, k in enumerate(kraus):
        isometry[i * d:(i + 1) * d, :] = k
    unitary = np.zeros((ancilla_dim * d, ancilla_dim * d), dtype=np.complex128)
    unitary[:, :d] = isometry
    if ancilla_dim > 1:
        unitary[:, d:] = scipy.linalg.null_space(isometry.conj().T)
    logger.debug(f"Purified rank-{rank} channel with ancilla dimension {ancilla_dim}")
    return Purification(
        unitary=LabeledOperator.square(unitary, (("anc", ancilla_dim), ("sys", d))),
        ancilla_dim=ancilla_dim,
        kraus_rank=rank,
    )


# Standard channels

def unitary_channel(u: np.ndarray, name: str = "unitary") -> Channel:
    return Channel.from_kraus([u], name=name)


def identity_channel(d: int = 2) -> Channel:
    return Channel.from_kraus([np.eye(d)], name="identity")


def _check_probability(value: float, name: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise OutOfRange(f"{name} must lie in [0, 1], got {value}")


def dephasing(p: float) -> Channel:
    _check_probability(p, "Dephasing probability")
    return Channel.from_kraus([np.sqrt(1 - p) * PAULI["I"], np.sqrt(p) * PAULI["Z"]], name=f"dephasing({p})")


def amplitude_damping(gamma: float) -> Channel:
    _check_probability(gamma, "Damping rate")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=np.complex128)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=np.complex128)
    return Channel.from_kraus([k0, k1], name=f"amplitude_damping({gamma})")


def depolarizing(p: float) -> Channel:
    """rho -> (1-p) rho + p I/2; p = 1 is completely depolarizing"""
    _check_probability(p, "Depolarizing probability")
    weights = [1 - 3 * p / 4, p / 4, p / 4, p / 4]
    ops = [np.sqrt(w) * PAULI[name] for w, name in zip(weights, "IXYZ")]
    return Channel.from_kraus(ops, name=f"depolarizing({p})")
