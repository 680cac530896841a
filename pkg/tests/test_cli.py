"""Circuit documents and the command-line front end."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from qubusim.circuits import (
    parse_circuit,
    report_to_json,
    run_program,
    serialize_program,
)
from qubusim.cli import main
from qubusim.errors import ParseError, ValidationError

REPO = Path(__file__).resolve().parents[1]

CNOT_DOC = """
{
  "photons": [
    {"id": "C", "path": 0, "state": "V"},
    {"id": "T", "path": 1, "state": "H"}
  ],
  "circuit": [{"op": "cnot", "control": "C", "target": "T"}],
  "run": {"mode": "exact", "alpha": 2.0, "theta": 0.5}
}
"""


class TestParsing:
    def test_minimal_cnot(self):
        program = parse_circuit(CNOT_DOC)
        assert len(program.instructions) == 1
        assert program.instructions[0]["op"] == "cnot"

    def test_unnormalized_state_rejected(self):
        doc = json.loads(CNOT_DOC)
        doc["photons"][1]["state"] = {"H": [0.6, 0], "V": [0.9, 0]}
        with pytest.raises(ValidationError, match="not normalized"):
            parse_circuit(json.dumps(doc))

    def test_unknown_reference_rejected(self):
        doc = json.loads(CNOT_DOC)
        doc["circuit"][0]["target"] = "nope"
        with pytest.raises(ValidationError, match="unknown photon"):
            parse_circuit(json.dumps(doc))

    def test_malformed_json_is_parse_error(self):
        with pytest.raises(ParseError):
            parse_circuit("{not json")

    def test_wrong_types_are_parse_errors(self):
        doc = json.loads(CNOT_DOC)
        doc["photons"][0]["path"] = "zero"
        with pytest.raises(ParseError):
            parse_circuit(json.dumps(doc))

    def test_roundtrip(self):
        program = parse_circuit(CNOT_DOC)
        again = parse_circuit(serialize_program(program))
        assert again == program
        assert serialize_program(again) == serialize_program(program)


class TestRunProgram:
    def test_cnot_on_vh(self):
        report = run_program(parse_circuit(CNOT_DOC))
        assert report["ok"]
        assert report["checks"]["probability_sum"] == pytest.approx(1.0)
        for rec in report["records"]:
            keys = " ".join(rec["amplitudes"])
            assert "C@0:V" in keys and "T@1:V" in keys

    def test_sample_mode_seed_determinism(self):
        doc = json.loads(CNOT_DOC)
        doc["photons"][1]["state"] = "+"
        doc["run"] = {"mode": "sample", "seed": 41, "shots": 5,
                      "alpha": 2.0, "theta": 0.5}
        text = json.dumps(doc)
        a = report_to_json(run_program(parse_circuit(text)))
        b = report_to_json(run_program(parse_circuit(text)))
        assert a == b
        other = json.dumps({**doc, "run": {**doc["run"], "seed": 42}})
        c = report_to_json(run_program(parse_circuit(other)))
        assert c != a

    def test_elements_and_measurement(self):
        doc = {
            "photons": [{"id": "p", "path": 0, "state": "V"}],
            "beams": [[1.0, 0.0], [1.0, 0.0]],
            "circuit": [
                {"op": "xpm", "path": 0, "pol": "V", "beam": 0, "theta": 0.5},
                {"op": "qubus_phase", "beam": 0, "phi": -0.5},
                {"op": "qubus_bs", "beams": [0, 1]},
                {"op": "measure_fock", "beam": 0},
            ],
            "run": {"mode": "exact", "theta": 0.5},
        }
        report = run_program(parse_circuit(json.dumps(doc)))
        assert report["ok"]
        # photon is V so the phases cancel: difference beam is vacuum
        assert len(report["records"]) == 1
        assert report["records"][0]["labels"][0] == ["3.n", 0]

    def test_fredkin_demo_file(self):
        text = (REPO / "circuits" / "fredkin.json").read_text()
        report = run_program(parse_circuit(text))
        assert report["ok"]
        for rec in report["records"]:
            keys = " ".join(rec["amplitudes"])
            assert "T1@1:V" in keys and "T2@2:H" in keys
        assert report["resources"]["c_path_count"] == 2
        assert report["resources"]["merging_count"] == 2


class TestCommandLine:
    def test_run_exit_codes(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        assert main(["run", str(bad)]) == 2
        unnorm = tmp_path / "unnorm.json"
        doc = json.loads(CNOT_DOC)
        doc["photons"][1]["state"] = {"H": [0.6, 0], "V": [0.9, 0]}
        unnorm.write_text(json.dumps(doc))
        assert main(["run", str(unnorm)]) == 3

    def test_run_writes_report(self, tmp_path, capsys):
        src = tmp_path / "cnot.json"
        src.write_text(CNOT_DOC)
        out = tmp_path / "report.json"
        assert main(["run", str(src), "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["ok"]
        capsys.readouterr()

    def test_verify_gate(self, capsys):
        assert main(["verify-gate", "cnot"]) == 0
        captured = capsys.readouterr()
        assert "PASS" in captured.out

    def test_verify_gate_toffoli_truth_table(self, capsys):
        assert main(["verify-gate", "toffoli"]) == 0
        out = capsys.readouterr().out
        assert "8x8" not in out  # table is printed directly
        assert "VVH" in out and "residual" in out
        assert "PASS" in out

    def test_error_curve_csv(self, tmp_path):
        out = tmp_path / "curve.csv"
        rc = main(["error-curve", "--theta", "0.01", "--alpha", "100",
                   "--gamma", "100", "--eta", "0.5", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("theta,alpha,gamma,eta,theta_p")
        assert len(lines) == 2

    def test_resources_command(self, capsys):
        assert main(["resources", "multi_toffoli", "--qubits", "4"]) == 0
        captured = capsys.readouterr()
        assert "c_path_count                 3" in captured.out

    def test_oracle_check(self, capsys):
        assert main(["oracle-check", "--alpha", "1.0", "--theta", "0.3",
                     "--cutoff", "30"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "qubusim", "verify-gate", "cz"],
            capture_output=True, text=True, cwd=REPO)
        assert proc.returncode == 0
        assert "PASS" in proc.stdout
