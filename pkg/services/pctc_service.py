from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np

from models.channel import Channel
from models.errors import DimensionMismatch, UndefinedEvolution
from models.labeled import LabeledOperator, StateVector, Subsystem, label_names, total_dim
from models.pctc import PctcSpec
from services.channel_service import purify
from services.tensor_service import kron, kron_states, loop_trace, max_entangled

logger = logging.getLogger(__name__)

ZERO_NORM = 1e-12


def contract(spec: PctcSpec) -> LabeledOperator:
    """K = <phi+|U|phi+> for every CTC pair, i.e. the wired partial trace with 1/d per pair"""
    k = loop_trace(spec.unitary, spec.ctc_pairs)
    return k * (1.0 / math.prod(spec.ctc_dims))


def spec_from_channel(
    channel: Channel,
    subsystems: Sequence[tuple[str, int]],
    ctc_pairs: Sequence[tuple[str, str]],
    ancilla_label: str = "anc",
) -> PctcSpec:
    """Purify a channel acting on `subsystems` and wrap it for contraction"""
    purification = purify(channel)
    labels = (Subsystem(ancilla_label, purification.ancilla_dim),) + tuple(Subsystem(*s) for s in subsystems)
    if total_dim(labels[1:]) != channel.in_dim:
        raise DimensionMismatch(f"Subsystems {subsystems} do not match channel dimension {channel.in_dim}")
    unitary = LabeledOperator.square(purification.unitary.data, labels)
    return PctcSpec(unitary=unitary, ctc_pairs=tuple(ctc_pairs), ancilla=labels[0])


def contract_channel(spec: PctcSpec) -> tuple[LabeledOperator, ...]:
    """Kraus operators of the contracted map: K_i = (<i| (x) 1) K (|0> (x) 1) on the ancilla"""
    k = contract(spec)
    if spec.ancilla is None:
        return (k,)
    anc = spec.ancilla.label
    ordered = k.reorder(
        (anc,) + label_names(spec.future),
        (anc,) + label_names(spec.past),
    )
    d_out, d_in = total_dim(spec.future), total_dim(spec.past)
    return tuple(
        LabeledOperator(ordered.data[i * d_out:(i + 1) * d_out, 0:d_in], spec.future, spec.past)
        for i in range(spec.ancilla.dim)
    )


def evolve(k: LabeledOperator, psi: StateVector) -> StateVector:
    """K|psi> / ||K|psi>||"""
    image = k @ psi
    norm = image.norm
    if norm < ZERO_NORM:
        logger.warning(f"P-CTC evolution undefined: ||K psi|| = {norm:.3e}")
        raise UndefinedEvolution(f"Post-selection never succeeds for this input (||K psi|| = {norm:.3e})")
    return StateVector(image.amplitudes / norm, image.subsystems)


def postselection_success(k: LabeledOperator, psi: StateVector) -> float:
    """Probability that every teleportation post-selection succeeds: ||K psi||^2 for unit psi"""
    image = k @ psi.normalized()
    return image.norm ** 2


def evolve_mixed(kraus: Sequence[LabeledOperator], rho: np.ndarray) -> np.ndarray:
    """sum_i K_i rho K_i^dag renormalized; the mixed-state form of `evolve`"""
    rho = np.asarray(rho, dtype=np.complex128)
    out = sum(k.data @ rho @ k.data.conj().T for k in kraus)
    weight = float(np.trace(out).real)
    if weight < ZERO_NORM:
        raise UndefinedEvolution(f"Post-selection never succeeds for this input (weight {weight:.3e})")
    return out / weight


def postselected_teleport(psi: StateVector) -> tuple[StateVector, float]:
    """Teleport psi through |phi+> and post-select the Bell outcome phi+ (no correction)"""
    d = total_dim(psi.subsystems)
    source = StateVector(psi.normalized().amplitudes, (("1", d),))
    pair = max_entangled(d, ("2", "3"))
    joint = kron_states(source, pair)
    bell = max_entangled(d, ("1", "2"))
    projector = kron(
        LabeledOperator(bell.amplitudes.conj().reshape(1, -1), (), bell.subsystems),
        LabeledOperator.identity((("3", d),)),
    )
    remainder = projector @ joint
    probability = remainder.norm ** 2
    output = StateVector(remainder.amplitudes / remainder.norm, psi.subsystems)
    logger.debug(f"Teleported a {d}-level state, success probability {probability:.6f}")
    return output, probability
