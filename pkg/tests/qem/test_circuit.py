import numpy as np
import pytest

from qem.core.circuit import (
    Circuit,
    CircuitNoise,
    PlacedGate,
    apply_circuit,
    contains_preparation,
    format_circuit,
    parse_circuit,
)
from qem.core.state import DensityMatrix


def test_bell_state(bell_circuit):
    rho = apply_circuit(bell_circuit)
    assert np.allclose(rho.probabilities(), [0.5, 0, 0, 0.5])


def test_overlapping_gates_rejected():
    with pytest.raises(ValueError):
        Circuit(2, [[PlacedGate("H", (0,)), PlacedGate("CNOT", (0, 1))]])
    with pytest.raises(ValueError):
        Circuit(2, [[PlacedGate("CNOT", (0, 2))]])
    with pytest.raises(ValueError):
        Circuit(2, [[PlacedGate("H", (0,), ("P:XY",))]])


def test_text_round_trip(damping_ready_circuit):
    text = format_circuit(damping_ready_circuit)
    assert text.splitlines()[1] == "H 0 | T 1"
    assert parse_circuit(text) == damping_ready_circuit


def test_parse_with_comments_and_dressing():
    circuit = parse_circuit("# qubits: 3\nH 0 | T 1  # first layer\nCNOT*P:XZ 2 0\n")
    assert circuit.n_qubits == 3
    assert circuit.layers[1][0] == PlacedGate("CNOT", (2, 0), ("P:XZ",))
    assert circuit.gate_counts() == (2, 1)
    with pytest.raises(ValueError):
        parse_circuit("H x")


def test_replace_and_token():
    circuit = Circuit(1, [[PlacedGate("H", (0,))]])
    replaced = circuit.replace({(0, 0): PlacedGate.from_token("H*P:Z", (0,))})
    assert replaced.layers[0][0].token == "H*P:Z"
    assert circuit.replace({}) is circuit
    assert not replaced.layers[0][0].is_ideal()


def test_noise_attachment_depolarizing():
    circuit = Circuit(1, [[PlacedGate("I", (0,))]])
    rho = apply_circuit(circuit, CircuitNoise("depolarizing", 0.2), DensityMatrix.plus_state(1))
    # ⟨X⟩ 缩小为 1−ε
    assert np.real(2 * rho.entries[0, 1]) == pytest.approx(0.8)


def test_damping_preparation_circuit():
    circuit = Circuit(1, [[PlacedGate("PREP:1", (0,))]])
    assert contains_preparation(circuit)
    rho = apply_circuit(circuit, CircuitNoise("damping", 0.1))
    assert np.allclose(rho.probabilities(), [0.1, 0.9])


def test_noise_validation():
    with pytest.raises(ValueError):
        CircuitNoise("bitflip", 0.1)
    with pytest.raises(ValueError):
        CircuitNoise("damping", 1.0)
