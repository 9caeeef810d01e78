import numpy as np
import pytest
from numpy.testing import assert_allclose

from models.errors import (
    DimensionMismatch,
    DuplicateLabel,
    NonSquareSubsystem,
    ResourceLimit,
    ShapeMismatch,
    UnknownLabel,
)
from models.labeled import LabeledOperator, StateVector
from services.tensor_service import (
    apply_local,
    basis_state,
    check_budget,
    double_ket,
    equal_up_to_phase,
    kron,
    loop_trace,
    max_entangled,
    partial_trace,
    partial_transpose,
    phase_deviation,
    undouble,
    undouble_operator,
)

X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SWAP = np.eye(4)[[0, 2, 1, 3]]


def random_matrix(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


class TestLabeledOperator:
    def test_shape_must_match_labels(self):
        with pytest.raises(ShapeMismatch):
            LabeledOperator(np.eye(3), (("a", 2),), (("a", 2),))

    def test_duplicate_labels_rejected(self):
        with pytest.raises(DuplicateLabel):
            LabeledOperator.square(np.eye(4), (("a", 2), ("a", 2)))

    def test_reorder_matches_kron_order(self, fx_rng):
        a = LabeledOperator.square(random_matrix(fx_rng, 2, 2), (("a", 2),))
        b = LabeledOperator.square(random_matrix(fx_rng, 3, 3), (("b", 3),))
        ab = kron(a, b).reorder(["b", "a"], ["b", "a"])
        assert_allclose(ab.data, np.kron(b.data, a.data), atol=1e-12)

    def test_matmul_aligns_labels(self, fx_rng):
        m = random_matrix(fx_rng, 4, 4)
        op = LabeledOperator.square(m, (("a", 2), ("b", 2)))
        swapped = op.reorder(["b", "a"], ["b", "a"])
        product = (op @ swapped.dag()).reorder(col_order=["a", "b"])
        assert_allclose(product.data, m @ m.conj().T, atol=1e-12)

    def test_matmul_rejects_foreign_labels(self):
        a = LabeledOperator.identity((("a", 2),))
        b = LabeledOperator.identity((("b", 2),))
        with pytest.raises((DimensionMismatch, UnknownLabel)):
            a @ b

    def test_data_is_frozen(self):
        op = LabeledOperator.identity((("a", 2),))
        with pytest.raises(ValueError):
            op.data[0, 0] = 5


class TestPartialTrace:
    def test_product_operator(self, fx_rng):
        a = random_matrix(fx_rng, 2, 2)
        b = random_matrix(fx_rng, 3, 3)
        ab = kron(LabeledOperator.square(a, (("a", 2),)), LabeledOperator.square(b, (("b", 3),)))
        reduced = partial_trace(ab, ["b"])
        assert reduced.row_labels == (("a", 2),)
        assert_allclose(reduced.data, a * np.trace(b), atol=1e-12)

    def test_trace_everything(self, fx_rng):
        m = random_matrix(fx_rng, 6, 6)
        op = LabeledOperator.square(m, (("a", 2), ("b", 3)))
        assert_allclose(partial_trace(op, ["a", "b"]).data[0, 0], np.trace(m), atol=1e-12)

    def test_unknown_label(self):
        with pytest.raises(UnknownLabel):
            partial_trace(LabeledOperator.identity((("a", 2),)), ["z"])

    def test_one_sided_label(self):
        op = LabeledOperator(np.ones((2, 3)), (("a", 2),), (("b", 3),))
        with pytest.raises(NonSquareSubsystem):
            partial_trace(op, ["a"])

    def test_duplicate_kron_factor(self):
        a = LabeledOperator.identity((("a", 2),))
        with pytest.raises(DuplicateLabel):
            kron(a, a)


class TestLoopTrace:
    def test_swap_loop_gives_identity(self):
        swap = LabeledOperator.square(SWAP, (("s", 2), ("c", 2)))
        assert_allclose(loop_trace(swap, [("c", "c")]).data, np.eye(2), atol=1e-12)

    def test_wire_between_different_labels(self, fx_rng):
        m = random_matrix(fx_rng, 4, 4)
        op = LabeledOperator(m, (("out", 2), ("loop", 2)), (("in", 2), ("back", 2)))
        looped = loop_trace(op, [("loop", "back")])
        expected = np.einsum("ajbj->ab", m.reshape(2, 2, 2, 2))
        assert_allclose(looped.data, expected, atol=1e-12)

    def test_dimension_mismatch(self):
        op = LabeledOperator(np.ones((6, 4)), (("a", 2), ("b", 3)), (("c", 2), ("d", 2)))
        with pytest.raises(DimensionMismatch):
            loop_trace(op, [("b", "d")])


class TestPartialTranspose:
    def test_bell_state_has_negative_eigenvalue(self):
        phi = max_entangled(2)
        rho = phi.density()
        eigenvalues = np.linalg.eigvalsh(partial_transpose(rho, ["b"]).data)
        assert_allclose(sorted(eigenvalues), [-0.5, 0.5, 0.5, 0.5], atol=1e-12)

    def test_involution(self, fx_rng):
        op = LabeledOperator.square(random_matrix(fx_rng, 6, 6), (("a", 2), ("b", 3)))
        twice = partial_transpose(partial_transpose(op, ["b"]), ["b"])
        assert twice.allclose(op)


class TestDoubleKet:
    def test_undouble_inverts(self, fx_rng):
        m = random_matrix(fx_rng, 3, 2)
        v = double_ket(m)
        assert v.subsystems == (("in", 2), ("out", 3))
        assert_allclose(undouble(v, 2, 3), m, atol=1e-12)

    def test_operator_acting_on_identity_ket(self, fx_rng):
        m = random_matrix(fx_rng, 3, 2)
        identity_ket = double_ket(np.eye(2)).amplitudes
        assert_allclose(double_ket(m).amplitudes, np.kron(np.eye(2), m) @ identity_ket, atol=1e-12)

    def test_labeled_operator_inputs_first(self, fx_rng):
        m = random_matrix(fx_rng, 2, 2)
        op = LabeledOperator(m, (("y", 2),), (("x", 2),))
        v = double_ket(op)
        assert [s.label for s in v.subsystems] == ["x", "y"]
        back = undouble_operator(v, ["x"], ["y"])
        assert back.allclose(op)

    def test_shared_labels_rejected(self):
        with pytest.raises(DuplicateLabel):
            double_ket(LabeledOperator.identity((("a", 2),)))


class TestStates:
    def test_basis_state_index(self):
        v = basis_state((("a", 2), ("b", 3)), [1, 2])
        assert int(np.argmax(np.abs(v.amplitudes))) == 5

    def test_max_entangled_is_normalized(self):
        assert max_entangled(3).norm == pytest.approx(1.0)

    def test_state_length_checked(self):
        with pytest.raises(ShapeMismatch):
            StateVector(np.ones(3), (("a", 2),))

    def test_apply_local_matches_kron(self, fx_rng):
        psi = random_matrix(fx_rng, 4, 1).reshape(-1)
        out = apply_local(psi.reshape(2, 2), X, [1]).reshape(-1)
        assert_allclose(out, np.kron(np.eye(2), X) @ psi, atol=1e-12)


class TestBudgetAndPhase:
    def test_budget(self):
        check_budget(16, 16)
        with pytest.raises(ResourceLimit):
            check_budget(17, 16)

    def test_global_phase_removed(self, fx_rng):
        a = random_matrix(fx_rng, 3, 3)
        b = np.exp(0.7j) * a
        assert phase_deviation(b, a) < 1e-12
        assert equal_up_to_phase(b, a)
        assert not equal_up_to_phase(a + 0.1, a)

    def test_shape_mismatch_is_not_equal(self):
        assert not equal_up_to_phase(np.ones(2), np.ones(3))
