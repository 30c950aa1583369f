import logging
import math
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from qem.core.dynamics import NoiseGenerator, Schedule, evolve_master_equation, rescale_schedule
from qem.core.errors import SingularSystemError
from qem.core.model import ExpansionDiagnostics, ZneResult
from qem.core.pauli import PauliString
from qem.core.state import DensityMatrix, expectation_value, sample_pauli_expectation, sample_z_readouts
from qem.utils.sequence_generator import SequenceGenerator

logger = logging.getLogger(__name__)

NODE_KINDS = ("bulirsch_stoer", "harmonic", "random_partition", "explicit")

# Vandermonde 矩阵条件数上限
CONDITION_LIMIT = 1e12


class NodeSequence:
    """
    噪声放大节点 1 = c_0 < c_1 < … < c_n

    Raises:
        ValueError: 起点不是 1、不严格递增或间距小于 min_separation
    """

    def __init__(self, values: Iterable[float], kind: str = "explicit", min_separation: float = 0.05):
        values = tuple(float(v) for v in values)
        if kind not in NODE_KINDS:
            raise ValueError(f"未知的节点序列类型: {kind}")
        if not values:
            raise ValueError("节点序列不能为空")
        if abs(values[0] - 1.0) > 1e-12:
            raise ValueError(f"首个节点必须为 1，当前为 {values[0]}")
        gaps = np.diff(values)
        if np.any(gaps <= 0):
            raise ValueError("节点必须严格递增")
        if gaps.size and gaps.min() < min_separation - 1e-12:
            raise ValueError(f"节点间距 {gaps.min():.4g} 小于最小间距 {min_separation}")
        self._values = values
        self._kind = kind
        self._min_separation = min_separation

    @property
    def values(self) -> Tuple[float, ...]:
        return self._values

    @property
    def kind(self) -> str:
        return self._kind

    @property
    def order(self) -> int:
        return len(self._values) - 1

    def prefix(self, order: int) -> "NodeSequence":
        """前 order+1 个节点"""
        if not 0 <= order <= self.order:
            raise ValueError(f"阶数 {order} 超出序列范围 0..{self.order}")
        return NodeSequence(self._values[: order + 1], self._kind, self._min_separation)

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self):
        return iter(self._values)

    def __repr__(self) -> str:
        return f"NodeSequence({self._kind}, {list(self._values)})"


def make_node_sequence(
    kind: str,
    n: int,
    params: Optional[dict] = None,
    rng: Optional[np.random.Generator] = None,
) -> NodeSequence:
    """
    生成节点序列

    Args:
        kind (str): bulirsch_stoer | harmonic | random_partition | explicit
        n (int): 外推阶数，生成 n+1 个节点
        params (dict, optional): base / eta / q / c_max / min_separation / values
        rng (np.random.Generator, optional): random_partition 需要

    Returns:
        NodeSequence: 节点序列
    """
    params = dict(params or {})
    min_separation = params.get("min_separation", 0.05)
    if n < 0:
        raise ValueError("阶数不能为负")
    if kind == "bulirsch_stoer":
        values = SequenceGenerator.bulirsch_stoer(n, params.get("base", 2.0))
    elif kind == "harmonic":
        values = SequenceGenerator.harmonic(n, params.get("eta", 1.0), params.get("q", 1.0))
    elif kind == "random_partition":
        if rng is None:
            raise ValueError("随机划分需要随机数流")
        values = SequenceGenerator.random_partition(
            n, rng, params.get("c_max", 4.0), min_separation
        )
    elif kind == "explicit":
        values = list(params.get("values", ()))
        if len(values) != n + 1:
            raise ValueError(f"显式节点数量应为 {n + 1}，实际为 {len(values)}")
    else:
        raise ValueError(f"未知的节点序列类型: {kind}")
    return NodeSequence(values, kind, min_separation)


class RichardsonPlan:
    """Richardson 外推系数 γ_j 与稳定性常数 Γ_n = Σ|γ_j| c_j^{n+1}"""

    def __init__(self, nodes: NodeSequence, gamma: np.ndarray):
        gamma = np.array(gamma, dtype=float)
        gamma.setflags(write=False)
        self._nodes = nodes
        self._gamma = gamma

    @property
    def nodes(self) -> NodeSequence:
        return self._nodes

    @property
    def gamma(self) -> np.ndarray:
        return self._gamma

    @property
    def order(self) -> int:
        return self._nodes.order

    @property
    def stability(self) -> float:
        c = np.array(self._nodes.values)
        return float(np.sum(np.abs(self._gamma) * c ** (self.order + 1)))

    def residuals(self) -> np.ndarray:
        """Σ_j γ_j c_j^k − δ_{k0}，k = 0..n"""
        c = np.array(self._nodes.values)
        vander = np.vander(c, self.order + 1, increasing=True).T
        target = np.zeros(self.order + 1)
        target[0] = 1.0
        return vander @ self._gamma - target

    def __repr__(self) -> str:
        return f"RichardsonPlan(nodes={list(self._nodes.values)}, gamma={self._gamma.tolist()})"


def richardson_coefficients(nodes: Union[NodeSequence, Sequence[float]]) -> RichardsonPlan:
    """
    求解 Σγ_j = 1、Σγ_j c_j^k = 0 (k=1..n)

    以 LU 分解求解 Vandermonde 方程组，并做一步迭代精化。

    Raises:
        SingularSystemError: 方程组接近奇异（节点过近）
    """
    if not isinstance(nodes, NodeSequence):
        nodes = NodeSequence(nodes, "explicit", min_separation=0.0)
    c = np.array(nodes.values)
    size = len(c)
    vander = np.vander(c, size, increasing=True).T
    condition = np.linalg.cond(vander)
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise SingularSystemError(f"Richardson system is near-singular (cond={condition:.3e})")
    target = np.zeros(size)
    target[0] = 1.0
    factor = lu_factor(vander)
    gamma = lu_solve(factor, target)
    gamma = gamma + lu_solve(factor, target - vander @ gamma)
    plan = RichardsonPlan(nodes, gamma)
    logger.debug(f"richardson plan {plan}, max residual {np.max(np.abs(plan.residuals())):.3e}")
    return plan


def closed_form_magnitudes(nodes: Union[NodeSequence, Sequence[float]]) -> np.ndarray:
    """|Π_{m≠j} c_m (c_j − c_m)⁻¹|，只比较绝对值"""
    c = np.array(list(nodes), dtype=float)
    out = np.empty_like(c)
    for j in range(len(c)):
        others = np.delete(c, j)
        out[j] = abs(np.prod(others / (c[j] - others)))
    return out


def extrapolate(plan: RichardsonPlan, estimates: Sequence[float]) -> float:
    """Ê^n = Σ γ_j Ê_j"""
    estimates = np.asarray(estimates, dtype=float)
    if estimates.shape != plan.gamma.shape:
        raise ValueError(f"需要 {plan.gamma.size} 个节点估计，实际为 {estimates.size}")
    return float(np.dot(plan.gamma, estimates))


# ---------------------------------------------------------------- 估计器


def exact_estimator(observable, rho: DensityMatrix) -> Tuple[float, float]:
    return expectation_value(observable, rho), 0.0


class SampledEstimator:
    """
    有限次读出的估计器

    Pauli 观测量先做基变换再测 Z，对角观测量直接按读出加权；
    返回 (样本均值, 标准误差)。
    """

    def __init__(self, shots: int, rng: np.random.Generator):
        if shots < 1:
            raise ValueError("读出次数必须大于0")
        self.shots = shots
        self.rng = rng

    def __call__(self, observable, rho: DensityMatrix) -> Tuple[float, float]:
        if isinstance(observable, PauliString):
            return sample_pauli_expectation(observable, rho, self.rng, self.shots)
        values = observable.weights[sample_z_readouts(rho, self.rng, self.shots)]
        spread = float(values.std(ddof=1)) if self.shots > 1 else 0.0
        return float(values.mean()), spread / math.sqrt(self.shots)


def run_zne_protocol(
    schedule: Schedule,
    generator: NoiseGenerator,
    rate: float,
    observable,
    nodes: NodeSequence,
    rho0: Optional[DensityMatrix] = None,
    estimator: Union[str, Callable] = "exact",
    method: str = "rk4",
    dt_max: float = 0.01,
    mapper: Callable = map,
) -> ZneResult:
    """
    零噪声外推流程

    对每个节点 c_j 放大调度（时间乘 c_j，耦合除以 c_j），在原噪声速率下演化并估计观测量，
    再用 Richardson 系数组合各节点的估计。

    Args:
        schedule (Schedule): 原始调度
        generator: 噪声生成元
        rate (float): 硬件噪声速率 λ
        observable: PauliString 或 DiagonalObservable
        nodes (NodeSequence): 节点序列
        rho0 (DensityMatrix, optional): 初态，默认 |0…0⟩
        estimator: "exact" 或 SampledEstimator
        method (str): 积分方法
        dt_max (float): rk4 最大步长
        mapper (Callable): 保序映射函数，用于并行执行各节点

    Returns:
        ZneResult: 外推值、各节点估计与标准误差、Richardson 方案
    """
    plan = richardson_coefficients(nodes)
    if rho0 is None:
        rho0 = DensityMatrix.zero_state(schedule.n_qubits)
    if estimator == "exact":
        estimator = exact_estimator
    elif isinstance(estimator, str):
        raise ValueError(f"未知的估计器: {estimator}")

    def evolve(c):
        return evolve_master_equation(
            rescale_schedule(schedule, c), generator, rate, rho0, dt_max=dt_max, method=method
        )

    states = list(mapper(evolve, plan.nodes.values))
    pairs = [estimator(observable, rho) for rho in states]
    estimates = tuple(value for value, _ in pairs)
    errors = tuple(err for _, err in pairs)
    value = extrapolate(plan, estimates)
    logger.debug(f"zne rate={rate:.4e} nodes={list(plan.nodes.values)} estimate={value:.10f}")
    return ZneResult(value, estimates, errors, plan, rate)


def remainder_and_error_bound(
    plan: RichardsonPlan,
    rate: float,
    total_time: float,
    a_norm: float,
    l_next: float,
    delta_star: float = 0.0,
) -> float:
    """
    误差界 Γ_n·(δ* + ‖A‖·l_{n+1}·(λT)^{n+1}/(n+1)!)

    Raises:
        ValueError: l_next 不为正
    """
    if l_next <= 0:
        raise ValueError("l_{n+1} 必须为正")
    if delta_star < 0 or rate < 0 or total_time < 0:
        raise ValueError("δ*、λ、T 不能为负")
    order = plan.order
    remainder = a_norm * l_next * (rate * total_time) ** (order + 1) / math.factorial(order + 1)
    return plan.stability * (delta_star + remainder)


def fit_expansion(rates: Sequence[float], values: Sequence[float], order: int) -> ExpansionDiagnostics:
    """
    最小二乘拟合 E(λ) ≈ Σ_k a_k λ^k

    自变量先按最大值缩放以改善条件数，系数再换算回原尺度。

    Raises:
        ValueError: 数据点少于 order+1
    """
    rates = np.asarray(rates, dtype=float)
    values = np.asarray(values, dtype=float)
    if rates.shape != values.shape:
        raise ValueError("速率与期望值数量不一致")
    if order < 0 or rates.size < order + 1:
        raise ValueError(f"拟合 {order} 阶展开至少需要 {order + 1} 个点")
    scale = float(np.max(np.abs(rates))) or 1.0
    design = np.vander(rates / scale, order + 1, increasing=True)
    scaled, *_ = np.linalg.lstsq(design, values, rcond=None)
    coefficients = scaled / scale ** np.arange(order + 1)
    residual = float(np.linalg.norm(design @ scaled - values))
    return ExpansionDiagnostics(tuple(float(a) for a in coefficients), residual)


def expansion_diagnostics(
    result: ZneResult, total_time: float, a_norm: float, l_next: float
) -> ExpansionDiagnostics:
    """由一次外推结果给出误差界诊断，δ* 取各节点标准误差的最大值"""
    delta_star = max(result.errors, default=0.0)
    bound = remainder_and_error_bound(
        result.plan, result.rate, total_time, a_norm, l_next, delta_star
    )
    return ExpansionDiagnostics(
        coefficients=(),
        residual=None,
        remainder_bound=bound,
        l_next=l_next,
        delta_star=delta_star,
        node_errors=tuple(result.errors),
    )
