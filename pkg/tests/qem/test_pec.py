import numpy as np
import pytest

from qem.core.circuit import CircuitNoise, apply_circuit
from qem.core.experiments import gen_clifford_t_circuit, median_projector
from qem.core.pec import (
    allocate_runs,
    exhaustive_pec_expectation,
    forecast_runs,
    required_samples,
    run_pec,
    run_pec_grouped,
    run_unmitigated,
    FINAL_STATE_CACHE_SIZE,
    _FinalStates,
    sample_noisy_circuit,
)
from qem.core.qpr import compose_circuit_qpr
from qem.core.state import DensityMatrix, DiagonalObservable, expectation_value


def test_required_samples():
    assert required_samples(0.07, 4.3) == 3774
    assert required_samples(0.1, 2.0) == 400
    assert required_samples(1.0, 1.0) == 1
    with pytest.raises(ValueError):
        required_samples(0.0, 2.0)
    with pytest.raises(ValueError):
        required_samples(0.1, 0.5)


def test_forecast_runs():
    assert forecast_runs(0.1, 2.0, 0.01, 50) == pytest.approx(100 * 1.02**100)
    assert forecast_runs(0.1, 2.0, 0.01, 50, approximate=True) == pytest.approx(100 * np.exp(2.0))
    with pytest.raises(ValueError):
        forecast_runs(0.1, 2.0, 0.01, -1)


def test_allocate_runs():
    assert allocate_runs(10, np.array([0.0, 1.0, 3.0])).tolist() == [1, 3, 6]
    assert allocate_runs(6, np.zeros(3)).tolist() == [2, 2, 2]
    assert allocate_runs(3, np.array([0.5, 0.1, 0.9])).tolist() == [1, 1, 1]
    with pytest.raises(ValueError):
        allocate_runs(2, np.ones(3))


def _ideal_median(circuit, rho0=None):
    return median_projector(apply_circuit(circuit, rho0=rho0))


@pytest.mark.parametrize("epsilon", [0.01, 0.1])
def test_exhaustive_depolarizing_recovers_ideal(epsilon):
    rng = np.random.default_rng(17)
    for _ in range(5):
        circuit = gen_clifford_t_circuit(rng, 2, 2)
        median = _ideal_median(circuit)
        plan = compose_circuit_qpr(circuit, "depolarizing", epsilon)
        value = exhaustive_pec_expectation(plan, None, median.observable)
        assert value == pytest.approx(median.ideal_value, abs=1e-9)


@pytest.mark.parametrize("epsilon", [0.01, 0.1])
def test_exhaustive_damping_recovers_ideal(epsilon):
    rng = np.random.default_rng(23)
    plus = DensityMatrix.plus_state(2)
    for _ in range(5):
        circuit = gen_clifford_t_circuit(rng, 2, 2, first_layer="cnot")
        for rho0 in (None, plus):
            median = _ideal_median(circuit, rho0)
            plan = compose_circuit_qpr(circuit, "damping", epsilon)
            value = exhaustive_pec_expectation(plan, None, median.observable, rho0=rho0)
            assert value == pytest.approx(median.ideal_value, abs=1e-9)


def test_exhaustive_damping_with_leading_singles(damping_ready_circuit):
    observable = DiagonalObservable([1.0, -1.0, 0.5, 0.0])
    exact = expectation_value(observable, apply_circuit(damping_ready_circuit))
    plan = compose_circuit_qpr(damping_ready_circuit, "damping", 0.05)
    assert exhaustive_pec_expectation(plan, None, observable) == pytest.approx(exact, abs=1e-9)


def test_exhaustive_branch_limit(bell_circuit):
    plan = compose_circuit_qpr(bell_circuit, "depolarizing", 0.01)
    with pytest.raises(ValueError):
        exhaustive_pec_expectation(plan, None, DiagonalObservable.projector([0], 2), max_branches=10)


def test_observable_size_checked(bell_circuit):
    plan = compose_circuit_qpr(bell_circuit, "depolarizing", 0.01)
    with pytest.raises(ValueError):
        run_pec(plan, None, DiagonalObservable.projector([0], 1), 10, seed=1)


def test_sign_average_matches_inverse_gamma(bell_circuit):
    plan = compose_circuit_qpr(bell_circuit, "depolarizing", 0.1)
    rng = np.random.default_rng(5)
    signs = [sample_noisy_circuit(plan, rng).sign for _ in range(5000)]
    assert np.mean(signs) == pytest.approx(1.0 / plan.gamma, abs=0.04)


def test_flat_pec_is_deterministic(bell_circuit):
    plan = compose_circuit_qpr(bell_circuit, "depolarizing", 0.05)
    observable = DiagonalObservable.projector([0, 3], 2)
    serial = run_pec(plan, None, observable, 200, seed=7)
    threaded = run_pec(plan, None, observable, 200, seed=7, workers=4)
    assert serial == threaded
    assert serial.allocation == (200,)
    assert serial.groups == 1


def test_grouped_pec_allocation_and_determinism(bell_circuit):
    plan = compose_circuit_qpr(bell_circuit, "depolarizing", 0.05)
    observable = DiagonalObservable.projector([0, 3], 2)
    first = run_pec_grouped(plan, None, observable, 400, 50, pilot_runs=2, seed=11)
    second = run_pec_grouped(plan, None, observable, 400, 50, pilot_runs=2, seed=11, workers=3)
    assert first == second
    assert sum(first.allocation) == 400
    assert min(first.allocation) >= 3
    assert first.gamma == pytest.approx(plan.gamma)


def test_grouped_pec_single_group(bell_circuit):
    plan = compose_circuit_qpr(bell_circuit, "depolarizing", 0.05)
    estimate = run_pec_grouped(plan, None, DiagonalObservable.projector([0, 3], 2), 10, 1, pilot_runs=2, seed=3)
    assert estimate.allocation == (10,)
    assert estimate.standard_error >= 0.0


def test_grouped_pec_budget_checks(bell_circuit):
    plan = compose_circuit_qpr(bell_circuit, "depolarizing", 0.05)
    observable = DiagonalObservable.projector([0, 3], 2)
    with pytest.raises(ValueError):
        run_pec_grouped(plan, None, observable, 20, 10, pilot_runs=2)
    with pytest.raises(ValueError):
        run_pec_grouped(plan, None, observable, 100, 10, pilot_runs=1)
    with pytest.raises(ValueError):
        run_pec_grouped(plan, None, observable, 100, 0)


@pytest.mark.parametrize("kind", ["depolarizing", "damping"])
def test_pec_concentrates_on_ideal_value(kind, damping_ready_circuit):
    epsilon = 0.05
    median = _ideal_median(damping_ready_circuit)
    plan = compose_circuit_qpr(damping_ready_circuit, kind, epsilon)
    noise = CircuitNoise(kind, epsilon)
    mitigated = run_pec_grouped(plan, noise, median.observable, 6000, 500, pilot_runs=2, seed=29)
    assert abs(mitigated.value - median.ideal_value) < 5 * mitigated.standard_error + 1e-3
    flat = run_pec(plan, noise, median.observable, 4000, seed=31)
    assert abs(flat.value - median.ideal_value) < 5 * flat.standard_error + 1e-3


def test_unmitigated_baseline(bell_circuit):
    noise = CircuitNoise("depolarizing", 0.2)
    observable = DiagonalObservable.projector([0, 3], 2)
    noisy = expectation_value(observable, apply_circuit(bell_circuit, noise))
    estimate = run_unmitigated(bell_circuit, noise, observable, 4000, seed=2)
    assert estimate.gamma == 1.0
    assert estimate.allocation == (4000,)
    assert abs(estimate.value - noisy) < 5 * estimate.standard_error + 1e-3
    assert noisy < 1.0


def test_final_state_cache_is_bounded():
    states = _FinalStates(CircuitNoise("depolarizing", 0.05), None, maxsize=4)
    circuits = [gen_clifford_t_circuit(np.random.default_rng(seed), 3, 4) for seed in range(40)]
    for circuit in circuits:
        states(circuit)
        assert len(states) <= 4
    assert states.misses >= 5
    # 最近一次的线路仍在缓存中
    hits = states.hits
    again = states(circuits[-1])
    assert again is states(circuits[-1])
    assert states.hits == hits + 2
    assert np.allclose(again.entries, apply_circuit(circuits[-1], CircuitNoise("depolarizing", 0.05)).entries)
    assert FINAL_STATE_CACHE_SIZE >= 1
    with pytest.raises(ValueError):
        _FinalStates(CircuitNoise("depolarizing", 0.05), None, maxsize=0)
