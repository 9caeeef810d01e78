import json
from pathlib import Path

import pytest

import app

DATA = Path(__file__).resolve().parent.parent / "data"

SWAP_ROWS = [[[1, 0], [0, 0], [0, 0], [0, 0]],
             [[0, 0], [0, 0], [1, 0], [0, 0]],
             [[0, 0], [1, 0], [0, 0], [0, 0]],
             [[0, 0], [0, 0], [0, 0], [1, 0]]]
FLIP_LOOP_ROWS = [[[0, 0], [1, 0], [0, 0], [0, 0]],
                  [[1, 0], [0, 0], [0, 0], [0, 0]],
                  [[0, 0], [0, 0], [0, 0], [1, 0]],
                  [[0, 0], [0, 0], [1, 0], [0, 0]]]


@pytest.fixture
def run(tmp_path):
    """Run the CLI with the report written to a file; returns (exit code, parsed report)"""
    def invoke(*argv, name="report.json"):
        out = tmp_path / name
        code = app.main([*argv, "--out", str(out)])
        text = out.read_text() if out.exists() else ""
        report = json.loads(text) if text and name.endswith(".json") else text
        return code, report
    return invoke


@pytest.fixture
def gate_files(tmp_path):
    def write(rows):
        unitary = tmp_path / "u.json"
        unitary.write_text(json.dumps({"subsystems": [["s", 2], ["c", 2]], "ctc_pairs": [["c", "c"]], "matrix": rows}))
        psi = tmp_path / "psi.json"
        psi.write_text(json.dumps({"subsystems": [["s", 2]], "amplitudes": [[0.6, 0], [0, 0.8]]}))
        return str(unitary), str(psi)
    return write


class TestValidate:
    def test_switch_is_valid(self, run):
        code, report = run("validate", str(DATA / "w_switch2.json"), "--samples", "5")
        assert code == 0
        assert report["success"]
        assert report["data"]["verdict"] == "valid"
        assert report["data"]["worst_sample"] is not None
        assert report["config"]["samples"] == 5

    def test_counterexample_is_invalid(self, run):
        code, report = run("validate", str(DATA / "counterexample_uw.json"), "--samples", "5")
        assert code == 1
        assert not report["success"]
        assert report["data"]["verdict"] == "invalid"

    def test_bundled_name(self, run):
        code, report = run("validate", "w_switch2.json", "--samples", "3")
        assert code == 0
        assert report["data"]["process"] == "w_switch2"

    def test_malformed_json(self, run, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"header\": ")
        code, report = run("validate", str(bad))
        assert code == 2
        assert report["details"]["error"] == "ParseError"

    def test_identical_reports_across_workers(self, run):
        args = ("validate", str(DATA / "w_switch2.json"), "--samples", "4", "--seed", "7")
        _, one = run(*args, "--workers", "1", name="one.json")
        _, two = run(*args, "--workers", "2", name="two.json")
        assert one == two
        assert "wall_time" not in one

    def test_timing(self, run):
        _, report = run("validate", str(DATA / "w_switch2.json"), "--samples", "2", "--timing")
        assert report["wall_time"] >= 0


class TestSwitch:
    @pytest.mark.parametrize("n", [2, 3])
    def test_equivalence(self, run, n):
        code, report = run("switch", "--n", str(n), "--check-equivalence")
        assert code == 0
        assert report["data"]["equivalence"]["passed"]
        assert report["data"]["equivalence"]["max_deviation"] < 1e-9

    def test_emit_circuit(self, run):
        code, report = run("switch", "--n", "2", "--emit-circuit")
        assert code == 0
        gates = report["data"]["circuit"]["gates"]
        assert gates[0] == {"name": "CSWAP", "controls": ["b11"], "targets": ["A0", "A1"]}

    def test_resource_limit(self, run):
        code, report = run("switch", "--n", "9")
        assert code == 3
        assert report["details"]["error"] == "ResourceLimit"

    def test_budget_flag(self, run):
        code, _ = run("switch", "--n", "2", "--budget", "100")
        assert code == 3

    def test_single_party(self, run):
        code, report = run("switch", "--n", "1")
        assert code == 2
        assert report["details"]["error"] == "OutOfRange"


class TestDet:
    def test_random_channels(self, run):
        code, report = run("det", "--n", "3", "--channels", "random:5")
        assert code == 0
        assert report["data"]["choi_distance"] < 1e-9
        assert report["data"]["ordered"]["queries"] == 9

    def test_identity_n4(self, run):
        code, report = run("det", "--n", "4")
        assert code == 0
        assert report["data"]["choi_distance"] < 1e-9

    def test_acausal_only(self, run):
        code, report = run("det", "--n", "3", "--simulate", "acausal", "--channels", "unitary:3")
        assert code == 0
        assert report["data"]["acausal"]["is_cptp"]
        assert "ordered" not in report["data"]

    def test_bad_channel_spec(self, run):
        code, _ = run("det", "--channels", "random:abc")
        assert code == 2

    @pytest.mark.parametrize("spec", ["dephasing:0.3", "amplitude_damping:0.2", "depolarizing:0.5"])
    def test_noise_channels(self, run, spec):
        code, report = run("det", "--n", "3", "--channels", spec)
        assert code == 0
        assert report["data"]["choi_distance"] < 1e-9

    @pytest.mark.parametrize("spec", ["dephasing:1.5", "depolarizing:lots"])
    def test_bad_noise_parameter(self, run, spec):
        code, report = run("det", "--channels", spec)
        assert code == 2
        assert not report["success"]

    def test_channel_file(self, run, tmp_path):
        path = tmp_path / "flip.json"
        path.write_text(json.dumps({"in": 2, "out": 2, "kraus": [[[[0, 0], [1, 0]], [[1, 0], [0, 0]]]]}))
        code, report = run("det", "--n", "3", "--channels", f"file:{path}")
        assert code == 0
        assert report["data"]["choi_distance"] < 1e-9

    def test_channel_file_must_be_cptp(self, run, tmp_path):
        path = tmp_path / "double.json"
        path.write_text(json.dumps({"in": 2, "out": 2, "kraus": [[[[2, 0], [0, 0]], [[0, 0], [2, 0]]]]}))
        code, report = run("det", "--channels", f"file:{path}")
        assert code == 2
        assert report["details"]["error"] == "NotCPTP"

    def test_too_few_parties(self, run):
        code, report = run("det", "--n", "2")
        assert code == 2
        assert report["details"]["error"] == "OutOfRange"


class TestGame:
    def test_process(self, run):
        code, report = run("game", "--n", "3", "--strategy", "process")
        assert code == 0
        assert report["data"]["rows"][0]["process"] == pytest.approx(1.0, abs=1e-9)

    def test_brute_force(self, run):
        code, report = run("game", "--n", "3", "--strategy", "brute-force")
        assert code == 0
        assert report["data"]["rows"][0]["brute_force"] <= 2 / 3 + 1e-12
        assert report["data"]["brute_force"]["strategies"] == 6 * 4 * 16 * 256

    def test_brute_force_refused_for_n4(self, run):
        code, _ = run("game", "--n", "4", "--strategy", "brute-force")
        assert code == 3

    def test_budget_bounds_the_process_strategy(self, run):
        code, report = run("game", "--n", "5", "--strategy", "process", "--budget", "1000")
        assert code == 3
        assert report["details"]["error"] == "ResourceLimit"

    def test_all_strategies_share_the_brute_force_run(self, run):
        code, report = run("game", "--n", "3")
        assert code == 0
        assert report["data"]["brute_force"]["n"] == 3
        assert report["data"]["brute_force"]["value"] == report["data"]["rows"][0]["brute_force"]

    def test_too_few_parties(self, run):
        code, report = run("game", "--n", "2")
        assert code == 2
        assert report["details"]["error"] == "OutOfRange"

    def test_csv_table(self, run):
        code, text = run("game", "--n", "4", "5", "--strategy", "causal-guess", "--format", "csv", name="table.csv")
        assert code == 0
        lines = text.splitlines()
        assert lines[0] == "n,process,causal_guess,brute_force,bound"
        assert lines[1] == "4,,0.75,,0.75"
        assert lines[2] == "5,,0.8,,0.8"


class TestPctc:
    def test_swap(self, run, gate_files):
        code, report = run("pctc", *gate_files(SWAP_ROWS))
        assert code == 0
        assert report["data"]["probability"] == pytest.approx(0.25)
        amplitudes = [part for pair in report["data"]["state"]["amplitudes"] for part in pair]
        assert amplitudes == pytest.approx([0.6, 0.0, 0.0, 0.8])

    def test_traceless_loop(self, run, gate_files):
        code, report = run("pctc", *gate_files(FLIP_LOOP_ROWS))
        assert code == 1
        assert report["details"]["error"] == "UndefinedEvolution"

    def test_missing_state(self, run, gate_files):
        unitary, _ = gate_files(SWAP_ROWS)
        code, _ = run("pctc", unitary)
        assert code == 2

    @pytest.mark.parametrize("d", [2, 3])
    def test_teleport(self, run, d):
        code, report = run("pctc", "--teleport", "--dim", str(d), "--seed", "4")
        assert code == 0
        assert report["data"]["probability"] == pytest.approx(1 / d ** 2, abs=1e-12)
        assert report["data"]["fidelity"] >= 1 - 1e-12


class TestArguments:
    def test_version(self, capsys):
        assert app.main(["--version"]) == 0
        assert "1.0.0" in capsys.readouterr().out

    def test_bad_usage(self):
        assert app.main(["switch", "--n", "two"]) == 2

    def test_invalid_tolerance(self, run):
        code, report = run("switch", "--tol", "-1")
        assert code == 2
        assert report["message"] == "Invalid run configuration"
