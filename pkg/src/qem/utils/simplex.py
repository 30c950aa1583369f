import logging
from collections import namedtuple
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

# status: optimal | infeasible | unbounded | iteration_limit
LinearProgramResult = namedtuple(
    "LinearProgramResult", ["status", "x", "objective", "iterations", "infeasibility"]
)


class DenseSimplex:
    """
    稠密两阶段单纯形法，Bland 规则防止循环

    求解 min cᵀx，s.t. Ax = b，x ≥ 0。
    第一阶段以人工变量求可行基，结束后把仍在基中的人工变量换出，
    换不出的行为冗余约束，直接删除。
    """

    def __init__(self, tol: float = 1e-9, max_iterations: int = 50000):
        self.tol = tol
        self.max_iterations = max_iterations

    def solve(self, c: np.ndarray, a_eq: np.ndarray, b_eq: np.ndarray) -> LinearProgramResult:
        c = np.asarray(c, dtype=float)
        a_eq = np.array(a_eq, dtype=float)
        b_eq = np.array(b_eq, dtype=float)
        m, n = a_eq.shape
        if c.shape != (n,) or b_eq.shape != (m,):
            raise ValueError("线性规划的维度不一致")

        negative = b_eq < 0
        a_eq[negative] *= -1
        b_eq[negative] *= -1

        # 表格：[A | I | b]，最后一行为检验数
        tableau = np.zeros((m + 1, n + m + 1))
        tableau[:m, :n] = a_eq
        tableau[:m, n : n + m] = np.eye(m)
        tableau[:m, -1] = b_eq
        tableau[m, n : n + m] = 1.0
        tableau[m] -= tableau[:m].sum(axis=0)
        basis = list(range(n, n + m))

        status, iterations = self._iterate(tableau, basis, n + m)
        infeasibility = -tableau[-1, -1]
        scale = max(1.0, float(np.max(np.abs(b_eq), initial=0.0)))
        if infeasibility > self.tol * scale:
            logger.debug(f"phase one ended with infeasibility {infeasibility:.3e}")
            return LinearProgramResult("infeasible", None, None, iterations, float(infeasibility))
        if status == "iteration_limit":
            return LinearProgramResult(status, None, None, iterations, float(infeasibility))

        tableau, basis = self._drive_out_artificials(tableau, basis, n)
        tableau = np.delete(tableau, np.s_[n : n + m], axis=1)

        # 第二阶段检验数 r = c − c_Bᵀ B⁻¹A
        rows = len(basis)
        tableau[rows] = 0.0
        tableau[rows, :n] = c
        for i, var in enumerate(basis):
            tableau[rows] -= c[var] * tableau[i]
        status, more = self._iterate(tableau, basis, n)
        iterations += more
        if status != "optimal":
            return LinearProgramResult(status, None, None, iterations, float(infeasibility))

        x = np.zeros(n)
        for i, var in enumerate(basis):
            x[var] = tableau[i, -1]
        x[np.abs(x) < 1e-15] = 0.0
        logger.debug(f"simplex optimal after {iterations} pivots, objective {c @ x:.12g}")
        return LinearProgramResult("optimal", x, float(c @ x), iterations, float(infeasibility))

    def _iterate(self, tableau: np.ndarray, basis: list, n_cols: int):
        rows = len(basis)
        for iteration in range(self.max_iterations):
            reduced = tableau[rows, :n_cols]
            candidates = np.flatnonzero(reduced < -self.tol)
            if candidates.size == 0:
                return "optimal", iteration
            col = int(candidates[0])
            column = tableau[:rows, col]
            positive = np.flatnonzero(column > self.tol)
            if positive.size == 0:
                return "unbounded", iteration
            ratios = tableau[positive, -1] / column[positive]
            best = ratios.min()
            ties = positive[ratios <= best + self.tol * max(1.0, abs(best))]
            # Bland：比值相同时选基变量序号最小的行
            row = int(min(ties, key=lambda r: basis[r]))
            self._pivot(tableau, row, col)
            basis[row] = col
        return "iteration_limit", self.max_iterations

    @staticmethod
    def _pivot(tableau: np.ndarray, row: int, col: int):
        tableau[row] /= tableau[row, col]
        factors = tableau[:, col].copy()
        factors[row] = 0.0
        tableau -= np.outer(factors, tableau[row])

    def _drive_out_artificials(self, tableau: np.ndarray, basis: list, n: int):
        redundant = []
        for i, var in enumerate(basis):
            if var < n:
                continue
            candidates = np.flatnonzero(np.abs(tableau[i, :n]) > self.tol)
            if candidates.size:
                col = int(candidates[0])
                self._pivot(tableau, i, col)
                basis[i] = col
            else:
                redundant.append(i)
        if redundant:
            logger.debug(f"dropping {len(redundant)} redundant equality rows")
            keep = [i for i in range(len(basis)) if i not in set(redundant)]
            tableau = tableau[keep + [tableau.shape[0] - 1]]
            basis = [basis[i] for i in keep]
        return tableau, basis


def solve_l1_equality(
    columns: np.ndarray,
    target: np.ndarray,
    solver: Optional[DenseSimplex] = None,
) -> LinearProgramResult:
    """
    min Σ|η| s.t. columns·η = target

    η = η⁺ − η⁻ 拆成非负变量后交给单纯形法，返回结果中的 x 即为 η。
    """
    columns = np.asarray(columns, dtype=float)
    target = np.asarray(target, dtype=float)
    m = columns.shape[1]
    solver = solver or DenseSimplex()
    result = solver.solve(np.ones(2 * m), np.hstack([columns, -columns]), target)
    if result.status != "optimal":
        return result
    eta = result.x[:m] - result.x[m:]
    return result._replace(x=eta, objective=float(np.abs(eta).sum()))
