import numpy as np
import pytest

from qem.core.circuit import Circuit, PlacedGate


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def bell_circuit():
    return Circuit(2, [[PlacedGate("H", (0,))], [PlacedGate("CNOT", (0, 1))]])


@pytest.fixture
def damping_ready_circuit():
    # 每个 CNOT 之后两个比特上都有单比特门
    return Circuit(
        2,
        [
            [PlacedGate("H", (0,)), PlacedGate("T", (1,))],
            [PlacedGate("CNOT", (0, 1))],
            [PlacedGate("H", (0,)), PlacedGate("S", (1,))],
        ],
    )
