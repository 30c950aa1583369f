import numpy as np
import pytest

from qem.core.dynamics import Depolarizing, build_drift_schedule, evolve_master_equation
from qem.core.errors import NumericalError, SingularSystemError
from qem.core.pauli import PauliString
from qem.core.state import DensityMatrix, expectation_value
from qem.core.zne import (
    NodeSequence,
    SampledEstimator,
    closed_form_magnitudes,
    expansion_diagnostics,
    extrapolate,
    fit_expansion,
    make_node_sequence,
    remainder_and_error_bound,
    richardson_coefficients,
    run_zne_protocol,
)


def test_two_node_coefficients():
    plan = richardson_coefficients([1.0, 2.0])
    assert plan.gamma.tolist() == pytest.approx([2.0, -1.0])
    assert plan.stability == pytest.approx(6.0)


def test_node_sequence_validation():
    with pytest.raises(ValueError):
        NodeSequence([1.5, 2.0])
    with pytest.raises(ValueError):
        NodeSequence([1.0, 3.0, 2.0])
    with pytest.raises(ValueError):
        NodeSequence([1.0, 1.01])
    nodes = NodeSequence([1.0, 2.0, 4.0])
    assert nodes.prefix(1).values == (1.0, 2.0)
    with pytest.raises(ValueError):
        nodes.prefix(3)


def test_make_node_sequence():
    assert make_node_sequence("bulirsch_stoer", 2).values == (1.0, 2.0, 4.0)
    assert make_node_sequence("explicit", 1, {"values": [1.0, 3.0]}).values == (1.0, 3.0)
    with pytest.raises(ValueError):
        make_node_sequence("random_partition", 2)
    with pytest.raises(ValueError):
        make_node_sequence("explicit", 2, {"values": [1.0, 3.0]})


def test_near_singular_nodes_rejected():
    with pytest.raises(SingularSystemError):
        richardson_coefficients([1.0, 1.0 + 1e-5, 1.0 + 2e-5, 1.0 + 3e-5])
    assert issubclass(SingularSystemError, NumericalError)


def test_residuals_and_polynomial_exactness():
    rng = np.random.default_rng(42)
    for _ in range(100):
        order = int(rng.integers(1, 5))
        nodes = make_node_sequence("random_partition", order, {"c_max": 4.0}, rng=rng)
        plan = richardson_coefficients(nodes)
        assert np.max(np.abs(plan.residuals())) < 1e-12
        coefficients = rng.normal(size=order + 1)
        estimates = [np.polyval(coefficients[::-1], c) for c in nodes.values]
        assert abs(extrapolate(plan, estimates) - coefficients[0]) < 1e-10 * plan.stability


def test_closed_form_matches_solution_magnitudes():
    nodes = [1.0, 1.7, 2.5, 3.9]
    plan = richardson_coefficients(nodes)
    assert np.allclose(np.abs(plan.gamma), closed_form_magnitudes(nodes))


def test_extrapolate_checks_length():
    with pytest.raises(ValueError):
        extrapolate(richardson_coefficients([1.0, 2.0]), [0.1])


def test_error_bound():
    plan = richardson_coefficients([1.0, 2.0])
    assert remainder_and_error_bound(plan, 0.01, 10.0, 1.0, 1.0) == pytest.approx(6.0 * 0.1**2 / 2)
    assert remainder_and_error_bound(plan, 0.01, 10.0, 1.0, 1.0, delta_star=0.01) == pytest.approx(6.0 * 0.015)
    with pytest.raises(ValueError):
        remainder_and_error_bound(plan, 0.01, 10.0, 1.0, 0.0)


def test_fit_expansion_recovers_polynomial():
    rates = np.linspace(0.001, 0.01, 8)
    values = 0.3 - 2.0 * rates + 5.0 * rates**2
    diagnostics = fit_expansion(rates, values, 2)
    assert diagnostics.coefficients == pytest.approx((0.3, -2.0, 5.0), rel=1e-6)
    with pytest.raises(ValueError):
        fit_expansion(rates[:2], values[:2], 2)


@pytest.fixture
def small_problem():
    rng = np.random.default_rng(9)
    schedule = build_drift_schedule(rng, 2, 2, 1.0)
    observable = PauliString("ZX")
    rho0 = DensityMatrix.zero_state(2)
    exact = expectation_value(observable, evolve_master_equation(schedule, Depolarizing(), 0.0, rho0, method="expm"))
    return schedule, observable, rho0, exact


def test_zne_errors_decrease_with_order(small_problem):
    schedule, observable, rho0, exact = small_problem
    nodes = NodeSequence([1.0, 1.5, 2.0, 3.0])
    result = run_zne_protocol(schedule, Depolarizing(), 1e-3, observable, nodes, rho0, method="expm")
    errors = [
        abs(extrapolate(richardson_coefficients(nodes.prefix(n)), result.estimates[: n + 1]) - exact)
        for n in range(4)
    ]
    assert errors[2] < errors[0]
    assert errors[3] < errors[1]
    assert abs(result.extrapolated - exact) < 1e-3 * errors[0]
    assert result.errors == (0.0, 0.0, 0.0, 0.0)


def test_zne_with_sampled_estimator(small_problem):
    schedule, observable, rho0, exact = small_problem
    nodes = NodeSequence([1.0, 2.0])
    estimator = SampledEstimator(4000, np.random.default_rng(1))
    result = run_zne_protocol(schedule, Depolarizing(), 1e-3, observable, nodes, rho0, estimator=estimator, method="expm")
    assert all(err > 0 for err in result.errors)
    diagnostics = expansion_diagnostics(result, schedule.total_time, 1.0, 1.0)
    assert diagnostics.delta_star == max(result.errors)
    # 误差界包含了采样误差
    assert abs(result.extrapolated - exact) < 5 * diagnostics.remainder_bound


def test_unknown_estimator(small_problem):
    schedule, observable, rho0, _ = small_problem
    with pytest.raises(ValueError):
        run_zne_protocol(schedule, Depolarizing(), 1e-3, observable, NodeSequence([1.0, 2.0]), rho0, estimator="magic")
