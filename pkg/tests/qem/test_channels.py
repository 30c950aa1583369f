import math

import numpy as np
import pytest

from qem.core.channels import (
    KrausChannel,
    PauliTransferMatrix,
    amplitude_damping_channel,
    compose_ptm,
    depolarizing_channel,
    depolarizing_ptm,
    operation_ptm,
    ptm_from_kraus,
    ptm_from_unitary,
    random_kraus_channel,
    state_preparation_channel,
    superoperator_from_kraus,
)
from qem.core.gates import gate_unitary


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("epsilon", [0.0, 0.01, 0.3])
def test_depolarizing_ptm_is_diagonal(k, epsilon):
    ptm = ptm_from_kraus(depolarizing_channel(k, epsilon))
    assert np.allclose(ptm.entries, depolarizing_ptm(k, epsilon).entries, atol=1e-12)


def test_amplitude_damping_ptm():
    epsilon = 0.2
    s = math.sqrt(1 - epsilon)
    expected = np.array([[1, 0, 0, 0], [0, s, 0, 0], [0, 0, s, 0], [epsilon, 0, 0, 1 - epsilon]])
    assert np.allclose(ptm_from_kraus(amplitude_damping_channel(epsilon)).entries, expected)


def test_incomplete_kraus_rejected():
    with pytest.raises(ValueError):
        KrausChannel([np.diag([1.0, 0.5])])


@pytest.mark.parametrize("epsilon", [-0.1, 1.0])
def test_epsilon_range(epsilon):
    with pytest.raises(ValueError):
        amplitude_damping_channel(epsilon)


def test_composition_matches_ptm_product(rng):
    first = random_kraus_channel(rng, 1)
    second = random_kraus_channel(rng, 1)
    composed = ptm_from_kraus(second.compose(first))
    assert np.allclose(composed.entries, compose_ptm(ptm_from_kraus(second), ptm_from_kraus(first)).entries)
    assert composed.is_trace_preserving(atol=1e-10)


def test_tensor_matches_kron_of_ptms():
    a = amplitude_damping_channel(0.1)
    d = depolarizing_channel(1, 0.05)
    assert np.allclose(
        ptm_from_kraus(a.tensor(d)).entries,
        ptm_from_kraus(a).tensor(ptm_from_kraus(d)).entries,
    )


def test_unitary_ptm_is_orthogonal():
    r = ptm_from_unitary(gate_unitary("T")).entries
    assert np.allclose(r @ r.T, np.eye(4))


def test_superoperator_acts_row_major():
    channel = amplitude_damping_channel(0.4)
    rho = np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, 0.7]])
    out = (superoperator_from_kraus(channel) @ rho.reshape(-1)).reshape(2, 2)
    assert np.allclose(out, channel.apply(rho))


def test_preparation_discards_input():
    channel = state_preparation_channel("-")
    out = channel.apply(np.diag([0.0, 1.0]))
    assert np.allclose(out, np.array([[0.5, -0.5], [-0.5, 0.5]]))


def test_noisy_operation_ptm_is_noise_after_gate():
    noisy = operation_ptm("H*P:X", "depolarizing", 0.1)
    ideal = compose_ptm(ptm_from_unitary(gate_unitary("X")), ptm_from_unitary(gate_unitary("H")))
    assert np.allclose(noisy.entries, compose_ptm(depolarizing_ptm(1, 0.1), ideal).entries)


def test_ptm_dimension_mismatch():
    with pytest.raises(ValueError):
        compose_ptm(PauliTransferMatrix.identity(1), PauliTransferMatrix.identity(2))
