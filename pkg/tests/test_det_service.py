import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from models.errors import DimensionMismatch, OutOfRange, ResourceLimit
from services.channel_service import (
    amplitude_damping,
    choi_distance,
    is_cptp,
    purify,
    random_cptp,
    random_nonunital,
    random_unitary,
    unitary_channel,
)
from services.det_service import (
    acausal_circuit,
    acausal_evolution,
    ancilla_leakage,
    build_det_vector,
    classical_reduction,
    f,
    oracle_matrix,
    ordered_circuit,
    ordered_simulation_general,
    ordered_simulation_unitary,
    orthogonality_magnitudes,
    orthogonality_property,
    promise_set,
    rotate,
    run_ordered,
    to_bits,
    trace_condition,
)


def strings(n):
    return list(itertools.product((0, 1), repeat=n))


def random_unitaries(seed, n):
    rng = np.random.default_rng(seed)
    return [random_unitary(rng, 2) for _ in range(n)]


def random_channels(seed, n):
    rng = np.random.default_rng(seed)
    return [random_cptp(rng, 2, 2) for _ in range(n)]


class TestF:
    def test_examples(self):
        assert f((1, 0, 0)) == (0, 1, 0)
        assert f((0, 0, 0)) == (0, 0, 0)
        assert f((1, 1, 0, 0)) == (0, 1, 0, 0)

    def test_needs_three_parties(self):
        with pytest.raises(OutOfRange):
            f((1, 0))

    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_one_hot_with_two_preimages(self, n):
        images = [f(x) for x in strings(n)]
        assert all(sum(y) <= 1 for y in images)
        for k in range(n):
            one_hot = tuple(int(j == k) for j in range(n))
            assert images.count(one_hot) == 2

    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_promise_set_is_translations(self, n):
        single = (1,) + (0,) * (n - 1)
        double = (1, 1) + (0,) * (n - 2)
        translations = {rotate(single, s) for s in range(n)} | {rotate(double, s) for s in range(n)}
        assert set(promise_set(n)) == translations
        assert len(promise_set(n)) == 2 * n

    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_translation_equivariance(self, n):
        for x in strings(n):
            assert f(rotate(x, 1)) == rotate(f(x), 1)


class TestDetVector:
    def test_norm(self):
        det = build_det_vector(3)
        assert det.process.vector.norm ** 2 == pytest.approx(64)
        assert det.process.expected_probability == pytest.approx(1 / 64)

    def test_classical_reduction(self):
        reduction = classical_reduction(3)
        assert reduction.diagonal
        assert reduction.mapping[(1, 0, 0)] == (0, 1, 0)
        assert all(reduction.mapping[x] == f(x) for x in strings(3))

    def test_needs_three_parties(self):
        with pytest.raises(OutOfRange):
            build_det_vector(2)


class TestAcausalEvolution:
    def test_identity_parties(self):
        (k,) = acausal_evolution(3, [np.eye(2)] * 3).kraus
        assert abs(k[0b100, 0b110]) == pytest.approx(1.0)
        for y in range(8):
            x = int(np.argmax(np.abs(k[:, y])))
            assert x ^ int("".join(map(str, f(to_bits(x, 3)))), 2) == y

    def test_matrix_elements(self):
        unitaries = random_unitaries(7, 3)
        r = np.kron(np.kron(unitaries[0], unitaries[1]), unitaries[2])
        (k,) = acausal_evolution(3, unitaries).kraus
        for y in range(8):
            column = [r[x, y ^ int("".join(map(str, f(to_bits(x, 3)))), 2)] for x in range(8)]
            assert_allclose(k[:, y], column, atol=1e-12)

    def test_unitary_parties_give_unitary(self):
        (k,) = acausal_evolution(4, random_unitaries(3, 4)).kraus
        assert_allclose(k.conj().T @ k, np.eye(16), atol=1e-9)

    def test_channels_give_cptp(self):
        assert is_cptp(acausal_evolution(3, random_channels(23, 3)))

    def test_unitary_and_channel_paths_agree(self):
        unitaries = random_unitaries(11, 3)
        as_channels = [unitary_channel(u) for u in unitaries]
        assert choi_distance(acausal_evolution(3, unitaries), acausal_evolution(3, as_channels)) < 1e-9

    def test_party_checks(self):
        with pytest.raises(DimensionMismatch):
            acausal_evolution(3, [np.eye(2)] * 2)
        with pytest.raises(DimensionMismatch):
            acausal_evolution(3, [np.eye(2), np.eye(2), np.eye(3)])


class TestOrderedSimulation:
    def test_identities(self):
        ordered = ordered_simulation_unitary(3, [np.eye(2)] * 3)
        assert choi_distance(ordered, acausal_evolution(3, [np.eye(2)] * 3)) < 1e-9

    @pytest.mark.parametrize("seed", range(50))
    def test_unitaries_n3(self, seed):
        unitaries = random_unitaries([11, seed], 3)
        assert choi_distance(ordered_simulation_unitary(3, unitaries), acausal_evolution(3, unitaries)) < 1e-9

    @pytest.mark.parametrize("seed", range(50))
    def test_channels_n3(self, seed):
        channels = random_channels([23, seed], 3)
        assert choi_distance(ordered_simulation_general(3, channels), acausal_evolution(3, channels)) < 1e-9

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(10))
    def test_n4(self, seed):
        unitaries = random_unitaries([41, seed], 4)
        assert choi_distance(ordered_simulation_unitary(4, unitaries), acausal_evolution(4, unitaries)) < 1e-9
        channels = random_channels([43, seed], 4)
        assert choi_distance(ordered_simulation_general(4, channels), acausal_evolution(4, channels)) < 1e-9

    def test_non_unital_parties(self):
        rng = np.random.default_rng(5)
        channels = [amplitude_damping(0.3), amplitude_damping(0.8), random_nonunital(rng, 2, 2)]
        assert choi_distance(ordered_simulation_general(3, channels), acausal_evolution(3, channels)) < 1e-9

    def test_general_reduces_to_unitary(self):
        unitaries = random_unitaries(13, 3)
        general = ordered_simulation_general(3, [unitary_channel(u) for u in unitaries])
        assert choi_distance(general, ordered_simulation_unitary(3, unitaries)) < 1e-9

    @pytest.mark.parametrize("n", [3, 4])
    def test_three_n_queries(self, n):
        run = run_ordered(n, random_unitaries(n, n))
        assert run.queries == 3 * n
        assert run_ordered(3, random_channels(1, 3)).queries == 9

    @pytest.mark.parametrize("n", [3, 4])
    def test_oracle_ancillas_disentangle(self, n):
        unitaries = random_unitaries(17, n)
        assert ancilla_leakage(n, unitaries) < 1e-12
        assert ancilla_leakage(n, unitaries) == run_ordered(n, unitaries).leakage

    def test_leakage_respects_budget(self):
        with pytest.raises(ResourceLimit):
            ancilla_leakage(3, random_unitaries(17, 3), budget=10)

    def test_rejects_channels(self):
        with pytest.raises(TypeError):
            ordered_simulation_unitary(3, random_channels(2, 3))

    def test_circuit_layout(self):
        circuit = ordered_circuit(3)
        names = [g.name for g in circuit.gates]
        assert names.count("F-ORACLE") == 2
        assert names.count("CNOT") == 3
        assert sum(g.adjoint for g in circuit.gates) == 3
        assert ordered_circuit(3, purified=True).wires[:3] == ("e0", "e1", "e2")
        assert acausal_circuit(3).notes["ctc_wires"] == ["c0", "c1", "c2"]

    def test_oracle_is_permutation(self):
        m = oracle_matrix(3)
        assert_allclose(m @ m, np.eye(64), atol=1e-12)


class TestIdentities:
    @pytest.mark.parametrize("n", [3, 4])
    @pytest.mark.parametrize("seed", range(20))
    def test_orthogonality(self, n, seed):
        unitaries = random_unitaries([31, seed], n)
        for y, z in itertools.product(strings(n), repeat=2):
            if f(y) != f(z):
                assert orthogonality_property(unitaries, y, z)

    def test_diagonal_term_survives(self):
        unitaries = random_unitaries(31, 3)
        assert orthogonality_magnitudes(unitaries, (0, 0, 0), (0, 0, 0))[0] == pytest.approx(1.0)
        assert not orthogonality_property(unitaries, (0, 0, 0), (0, 0, 0))

    def test_orthogonality_n4_dilated(self):
        purifications = [purify(c) for c in random_channels(29, 4)]
        for y, z in itertools.product(strings(4), repeat=2):
            if f(y) != f(z):
                assert orthogonality_property(purifications, y, z)

    def test_bit_string_length_checked(self):
        with pytest.raises(DimensionMismatch):
            orthogonality_magnitudes(random_unitaries(1, 3), (0, 0), (0, 0, 0))

    @pytest.mark.parametrize("seed", range(5))
    def test_trace_condition(self, seed):
        assert_allclose(trace_condition(3, random_channels([53, seed], 3)), np.eye(8), atol=1e-9)
