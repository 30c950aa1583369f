import json

import pytest

from qem.core.circuit import parse_circuit
from qem.main import EXIT_CONFIG, EXIT_OK, build_parser, main, qpr_solve


def test_qpr_solve_depolarizing(capsys):
    assert main(["qpr", "solve", "--gate", "H", "--noise", "depolarizing", "--epsilon", "0.01"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["target"] == "H"
    assert data["gamma"] == pytest.approx(1 + 1.5 * 0.01 / 0.99, rel=1e-9)
    assert len(data["terms"]) == 4


def test_qpr_solve_damping_without_preparations():
    data = json.loads(qpr_solve("T", "damping", 0.01, "simplex", with_prep=False))
    assert data["feasible"] is False
    data = json.loads(qpr_solve("T", "damping", 0.01, "scipy"))
    assert data["gamma"] <= (1 + 0.01) / (1 - 0.01) + 1e-9


def test_qpr_solve_damping_cnot():
    data = json.loads(qpr_solve("CNOT", "damping", 0.02))
    assert len(data["terms"]) == 16
    assert any(t["reset_control"] for t in data["terms"])


def test_qpr_solve_bad_epsilon():
    assert main(["qpr", "solve", "--gate", "H", "--noise", "damping", "--epsilon", "1.5"]) == EXIT_CONFIG


def test_circuit_gen(capsys):
    args = ["circuit", "gen", "--n", "4", "--depth", "5", "--seed", "3"]
    assert main(args) == EXIT_OK
    first = capsys.readouterr().out
    circuit = parse_circuit(first)
    assert circuit.n_qubits == 4
    assert circuit.depth == 5
    assert main(args) == EXIT_OK
    assert capsys.readouterr().out == first


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_missing_config_file(tmp_path):
    assert main(["pec", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG


def test_invalid_config_value(tmp_path):
    user = tmp_path / "bad.yaml"
    user.write_text("default:\n  pec:\n    noise: coherent\n", encoding="utf-8")
    assert main(["pec", "--config", str(user), "--output", str(tmp_path / "out")]) == EXIT_CONFIG


def test_pec_command_writes_results(tmp_path):
    user = tmp_path / "tiny.yaml"
    user.write_text(
        "default:\n"
        "  pec:\n"
        "    n_qubits: 2\n"
        "    depth: 3\n"
        "    runs: 200\n"
        "    groups: 20\n"
        "    circuits: 2\n",
        encoding="utf-8",
    )
    out = tmp_path / "out"
    assert main(["pec", "--config", str(user), "--seed", "4", "--output", str(out)]) == EXIT_OK
    assert (out / "fig2.csv").exists()
    metadata = json.loads((out / "metadata.json").read_text(encoding="utf-8"))
    assert metadata["seed"] == 4
