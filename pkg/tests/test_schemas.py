import json
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from models.errors import ParseError
from models.schemas import (
    ProcessFile,
    decode_matrix,
    decode_sparse_vector,
    decode_vector,
    encode_sparse_vector,
    load_channel,
    load_pctc,
    load_process,
    load_state,
)
from services.process_service import counterexample_process, ordered_wiring

DATA = Path(__file__).resolve().parent.parent / "data"

SWAP_ROWS = [[[1, 0], [0, 0], [0, 0], [0, 0]],
             [[0, 0], [0, 0], [1, 0], [0, 0]],
             [[0, 0], [1, 0], [0, 0], [0, 0]],
             [[0, 0], [0, 0], [0, 0], [1, 0]]]


@pytest.fixture
def write_json(tmp_path):
    def write(name, payload):
        path = tmp_path / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
        return str(path)
    return write


class TestDecoding:
    def test_complex_pairs(self):
        assert_allclose(decode_vector([[1, 0], [0.5, -2]]), [1, 0.5 - 2j])

    def test_bad_complex(self):
        with pytest.raises(ParseError):
            decode_vector([[1, 2, 3]])
        with pytest.raises(ParseError):
            decode_vector([1.0])

    def test_wrong_length(self):
        with pytest.raises(ParseError):
            decode_vector([[1, 0]], length=2)

    def test_ragged_matrix(self):
        with pytest.raises(ParseError):
            decode_matrix([[[1, 0]], [[1, 0], [0, 0]]])

    def test_matrix_shape(self):
        with pytest.raises(ParseError):
            decode_matrix(SWAP_ROWS, shape=(2, 2))

    def test_sparse(self):
        values = decode_sparse_vector([[3, [0, 1]]], 4)
        assert_allclose(values, [0, 0, 0, 1j])
        assert encode_sparse_vector(values) == [[3, [0.0, 1.0]]]

    def test_sparse_index_out_of_range(self):
        with pytest.raises(ParseError):
            decode_sparse_vector([[4, [1, 0]]], 4)


class TestProcessFile:
    def test_bundled_switch(self):
        w = load_process(str(DATA / "w_switch2.json"))
        assert w.name == "w_switch2"
        assert w.past == (("P1", 2), ("P2", 2))
        assert [s.name for s in w.slots] == ["A0", "A1"]
        assert w.expected_probability == pytest.approx(1 / 16)

    def test_from_process(self):
        w = counterexample_process(np.diag([1, 1j]))
        parsed = ProcessFile.model_validate(json.loads(ProcessFile.from_process(w).model_dump_json(by_alias=True)))
        assert parsed.to_process().vector.allclose(w.vector)

    def test_dense_matrix_body(self, write_json):
        w = ordered_wiring(1).as_matrix_process()
        path = write_json("w.json", ProcessFile.from_process(w).model_dump(by_alias=True, exclude_none=True))
        loaded = load_process(path)
        assert not loaded.is_pure
        assert loaded.matrix.allclose(w.matrix)

    def test_two_bodies_rejected(self):
        header = {"P": 2, "F": 2, "slots": [{"in": 2, "out": 2}]}
        with pytest.raises(ValidationError):
            ProcessFile.model_validate({"header": header, "vector": [[1, 0]] * 16, "sparse_vector": []})

    def test_non_positive_dimension(self, write_json):
        path = write_json("w.json", {"header": {"P": 0, "F": 2, "slots": [{"in": 2, "out": 2}]}, "sparse_vector": []})
        with pytest.raises(ParseError):
            load_process(path)

    def test_wrong_amplitude_count(self, write_json):
        header = {"P": 2, "F": 2, "slots": [{"in": 2, "out": 2}]}
        path = write_json("w.json", {"header": header, "vector": [[1, 0]] * 8})
        with pytest.raises(ParseError):
            load_process(path)

    def test_malformed_json(self, write_json):
        with pytest.raises(ParseError):
            load_process(write_json("w.json", "{not json"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_process(str(tmp_path / "absent.json"))


class TestOtherFiles:
    def test_state(self, write_json):
        path = write_json("psi.json", {"subsystems": [["s", 2]], "amplitudes": [[0.6, 0], [0, 0.8]]})
        psi = load_state(path)
        assert_allclose(psi.amplitudes, [0.6, 0.8j])

    def test_state_length(self, write_json):
        path = write_json("psi.json", {"subsystems": [["s", 2]], "amplitudes": [[1, 0]]})
        with pytest.raises(ParseError):
            load_state(path)

    def test_pctc_gate(self, write_json):
        path = write_json("u.json", {"subsystems": [["s", 2], ["c", 2]], "ctc_pairs": [["c", "c"]], "matrix": SWAP_ROWS})
        spec = load_pctc(path)
        assert [s.label for s in spec.past] == ["s"]

    def test_pctc_unknown_loop_label(self, write_json):
        path = write_json("u.json", {"subsystems": [["s", 2], ["c", 2]], "ctc_pairs": [["z", "c"]], "matrix": SWAP_ROWS})
        with pytest.raises(ParseError):
            load_pctc(path)

    def test_channel(self, write_json):
        x = [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]
        channel = load_channel(write_json("c.json", {"in": 2, "out": 2, "kraus": [x]}))
        assert channel.rank == 1
        assert_allclose(channel.kraus[0], [[0, 1], [1, 0]])

    def test_channel_needs_one_body(self, write_json):
        path = write_json("c.json", {"in": 2, "out": 2})
        with pytest.raises(ParseError):
            load_channel(path)
