import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from models.errors import OutOfRange, ResourceLimit
from models.process import SamplerConfig
from models.switch import FactoradicCode, register_labels
from services.channel_service import apply_channel, identity_channel, random_density, random_unitary, unitary_channel
from services.process_service import apply_process, check_validity
from services.switch_service import (
    all_orders,
    build_switch_circuit,
    build_switch_vector,
    circuit_induced_map,
    control_block,
    decode,
    encode_permutation,
    ordered_product,
    staircase_gate_list,
    staircase_permutation,
    switch_equivalence,
    switch_target_maps,
)
from services.tensor_service import equal_up_to_phase


class TestFactoradic:
    def test_thirteen_of_four(self):
        code = encode_permutation(4, 13)
        assert (code.digit(3), code.digit(2), code.digit(1)) == (2, 0, 1)
        assert code.bits(3)[::-1] == (0, 1, 1)
        assert code.bits(2) == (0, 0)
        assert code.bits(1) == (1,)

    def test_five_of_three(self):
        code = encode_permutation(3, 5)
        assert (code.digit(2), code.digit(1)) == (2, 1)
        assert code.unary == {"b11": 1, "b21": 1, "b22": 1}

    def test_zero(self):
        code = encode_permutation(4, 0)
        assert set(code.digits) == {0}
        assert set(code.register) == {0}

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_decode_inverts(self, n):
        assert [decode(encode_permutation(n, s)) for s in range(math.factorial(n))] == list(
            range(math.factorial(n))
        )

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            encode_permutation(3, 6)
        with pytest.raises(OutOfRange):
            encode_permutation(3, -1)
        with pytest.raises(OutOfRange):
            decode(FactoradicCode(n=3, digits=(2, 0)))

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_register_size(self, n):
        assert len(register_labels(n)) == n * (n - 1) // 2
        assert len(encode_permutation(n, 0).register) == n * (n - 1) // 2


class TestStaircase:
    def test_two_party_orders(self):
        assert all_orders(2) == ((0, 1), (1, 0))

    @pytest.mark.parametrize("n", [3, 4])
    def test_every_permutation_once(self, n):
        orders = all_orders(n)
        assert len(set(orders)) == math.factorial(n)
        assert all(sorted(order) == list(range(n)) for order in orders)

    def test_forbidden_control_string(self):
        order = staircase_permutation(3, {"b11": 0, "b21": 0, "b22": 1})
        assert sorted(order) == [0, 1, 2]

    def test_two_party_gate_list(self):
        gate_list = staircase_gate_list(2)
        names = [g.name for g in gate_list.gates]
        assert names.count("CSWAP") == 2
        assert gate_list.gates[0].controls == ("b11",)
        assert "order_convention" in gate_list.to_dict()

    def test_three_party_controls_mirrored(self):
        controls = [g.controls[0] for g in staircase_gate_list(3).gates if g.name == "CSWAP"]
        assert controls == ["b11", "b21", "b22", "b22", "b21", "b11"]


class TestSwitchVector:
    @pytest.mark.parametrize("n,d", [(2, 2), (3, 2), (2, 3)])
    def test_norm(self, n, d):
        switch = build_switch_vector(n, d)
        assert switch.process.vector.norm ** 2 == pytest.approx(math.factorial(n) * d ** (n + 1))

    @pytest.mark.parametrize("n", [2, 3])
    def test_is_valid_process(self, n):
        report = check_validity(build_switch_vector(n).process, SamplerConfig(samples=20, seed=n))
        assert report.valid
        assert report.expected_probability == pytest.approx(4.0 ** -n)
        assert report.max_tp_deviation < 1e-9

    def test_two_party_target_maps(self, fx_rng):
        ua, ub = random_unitary(fx_rng, 2), random_unitary(fx_rng, 2)
        maps = switch_target_maps(build_switch_vector(2), [ua, ub])
        assert equal_up_to_phase(maps[0], ub @ ua)
        assert equal_up_to_phase(maps[1], ua @ ub)

    def test_three_party_target_maps(self, fx_rng):
        unitaries = [random_unitary(fx_rng, 2) for _ in range(3)]
        switch = build_switch_vector(3)
        for x, block in enumerate(switch_target_maps(switch, unitaries)):
            assert equal_up_to_phase(block, ordered_product(unitaries, switch.orders[x]))

    def test_superposed_control_with_identities(self, fx_rng):
        switch = build_switch_vector(2)
        plus = np.full((2, 2), 0.5)
        rho = np.kron(plus, random_density(fx_rng, 2))
        g = apply_process(switch.process, [identity_channel(2)] * 2)
        assert_allclose(apply_channel(g, rho), rho, atol=1e-9)

    def test_unitary_parties_give_unitary_map(self, fx_rng):
        switch = build_switch_vector(3)
        channels = [unitary_channel(random_unitary(fx_rng, 2)) for _ in range(3)]
        (k,) = apply_process(switch.process, channels).kraus
        assert_allclose(k.conj().T @ k, np.eye(12), atol=1e-9)

    def test_budget(self):
        with pytest.raises(ResourceLimit):
            build_switch_vector(9)
        with pytest.raises(ResourceLimit):
            build_switch_vector(3, budget=1000)

    def test_too_few_parties(self):
        with pytest.raises(OutOfRange):
            build_switch_vector(1)


class TestSwitchCircuit:
    def test_unitary_is_permutation(self):
        u = build_switch_circuit(3).unitary.data
        assert_allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-12)
        assert set(np.unique(np.abs(u))) == {0.0, 1.0}

    @pytest.mark.parametrize("n", [2, 3])
    def test_equivalent_to_vector(self, n):
        report = switch_equivalence(n)
        assert report["max_deviation"] < 1e-9
        assert report["control_qubits"] == n * (n - 1) // 2
        assert len(report["deviations"]) == math.factorial(n)

    @pytest.mark.parametrize("n", [2, 3])
    def test_control_blocks(self, fx_rng, n):
        unitaries = [random_unitary(fx_rng, 2) for _ in range(n)]
        circuit = build_switch_circuit(n)
        induced = circuit_induced_map(circuit, unitaries)
        orders = all_orders(n)
        for s in range(math.factorial(n)):
            block = control_block(induced, circuit, encode_permutation(n, s))
            assert equal_up_to_phase(block, ordered_product(unitaries, orders[s]))

    def test_budget(self):
        with pytest.raises(ResourceLimit):
            build_switch_circuit(9)
