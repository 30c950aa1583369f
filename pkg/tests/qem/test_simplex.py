import numpy as np
import pytest
from scipy.optimize import linprog

from qem.utils.simplex import DenseSimplex, solve_l1_equality


def test_small_lp():
    # min −x − y, x + y + s = 4, x + 3y + t = 6
    c = np.array([-1.0, -1.0, 0.0, 0.0])
    a = np.array([[1.0, 1.0, 1.0, 0.0], [1.0, 3.0, 0.0, 1.0]])
    result = DenseSimplex().solve(c, a, np.array([4.0, 6.0]))
    assert result.status == "optimal"
    assert result.objective == pytest.approx(-4.0)
    assert np.allclose(a @ result.x, [4.0, 6.0])
    assert np.all(result.x >= 0)


def test_negative_right_hand_side():
    result = DenseSimplex().solve(np.array([1.0, 1.0]), np.array([[-1.0, -1.0]]), np.array([-2.0]))
    assert result.status == "optimal"
    assert result.objective == pytest.approx(2.0)


def test_infeasible():
    # x + y = 1 与 x + y = 2 矛盾
    a = np.array([[1.0, 1.0], [1.0, 1.0]])
    result = DenseSimplex().solve(np.ones(2), a, np.array([1.0, 2.0]))
    assert result.status == "infeasible"
    assert result.x is None
    assert result.infeasibility > 0


def test_unbounded():
    result = DenseSimplex().solve(np.array([-1.0, 0.0]), np.array([[1.0, -1.0]]), np.array([1.0]))
    assert result.status == "unbounded"


def test_redundant_rows():
    a = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0]])
    result = DenseSimplex().solve(np.array([1.0, 1.0, 3.0]), a, np.array([2.0, 4.0]))
    assert result.status == "optimal"
    assert result.objective == pytest.approx(1.0)


def test_dimension_check():
    with pytest.raises(ValueError):
        DenseSimplex().solve(np.ones(3), np.ones((2, 2)), np.ones(2))


def test_l1_equality_agrees_with_scipy():
    rng = np.random.default_rng(11)
    for _ in range(20):
        columns = rng.normal(size=(4, 9))
        target = rng.normal(size=4)
        result = solve_l1_equality(columns, target)
        m = columns.shape[1]
        reference = linprog(
            np.ones(2 * m),
            A_eq=np.hstack([columns, -columns]),
            b_eq=target,
            bounds=(0, None),
            method="highs",
        )
        assert result.status == "optimal"
        assert result.objective == pytest.approx(reference.fun, rel=1e-8, abs=1e-10)
        assert np.allclose(columns @ result.x, target, atol=1e-9)
