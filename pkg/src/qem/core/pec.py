import logging
import math
import threading
from collections import OrderedDict
from typing import Optional, Union

import numpy as np

from qem.core.circuit import Circuit, CircuitNoise, apply_circuit, format_circuit
from qem.core.model import PecEstimate, SampledCircuit
from qem.core.qpr import CircuitQPR
from qem.core.state import DensityMatrix, DiagonalObservable, sample_z_readouts
from qem.utils.rng_util import StreamFactory, as_stream_factory, ordered_map

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_BRANCHES = 100_000

# 末态缓存的条目上限；n=6 时每个末态约 65 KB
FINAL_STATE_CACHE_SIZE = 256

# 流索引的首位：线路采样、试探读出、正式读出、未消除噪声的基线
_SAMPLE, _PILOT, _FRESH, _BASELINE = 0, 1, 2, 3

Seed = Union[int, StreamFactory, np.random.Generator, None]


def required_samples(delta: float, gamma: float) -> int:
    """
    达到精度 δ 所需的运行次数 M = ⌈(γ/δ)²⌉

    Raises:
        ValueError: δ ≤ 0 或 γ < 1
    """
    if delta <= 0:
        raise ValueError("精度 δ 必须为正")
    if gamma < 1.0:
        raise ValueError("开销 γ 不能小于 1")
    # 先四舍五入到 9 位，避免 (2/0.1)² = 400.00000000000006 这类舍入误差进位
    return int(math.ceil(round((gamma / delta) ** 2, 9)))


def forecast_runs(delta: float, overhead_coefficient: float, epsilon: float, gate_count: int, approximate: bool = False) -> float:
    """
    每个门开销为 1+cε 时的运行次数预估 δ⁻²·(1+cε)^{2L}

    approximate=True 时使用 δ⁻²·exp(2cεL)。
    """
    if delta <= 0 or gate_count < 0 or epsilon < 0:
        raise ValueError("δ 必须为正，ε 与门数不能为负")
    if approximate:
        return math.exp(2.0 * overhead_coefficient * epsilon * gate_count) / delta**2
    return (1.0 + overhead_coefficient * epsilon) ** (2 * gate_count) / delta**2


def sample_noisy_circuit(plan: CircuitQPR, rng: np.random.Generator) -> SampledCircuit:
    return plan.sample(rng)


def _check_observable(observable, n_qubits: int) -> DiagonalObservable:
    if not isinstance(observable, DiagonalObservable):
        observable = DiagonalObservable(observable)
    if observable.n_qubits != n_qubits:
        raise ValueError("观测量与线路的比特数不一致")
    return observable


def _default_noise(plan: CircuitQPR, noise: Optional[CircuitNoise]) -> CircuitNoise:
    return noise if noise is not None else CircuitNoise(plan.kind, plan.epsilon)


class _FinalStates:
    """以线路文本为键缓存含噪末态，超过 maxsize 时淘汰最久未用的条目"""

    def __init__(self, noise: CircuitNoise, rho0: Optional[DensityMatrix], maxsize: int = FINAL_STATE_CACHE_SIZE):
        if maxsize < 1:
            raise ValueError("缓存容量必须大于0")
        self.noise = noise
        self.rho0 = rho0
        self.maxsize = maxsize
        self.hits = 0
        self.misses = 0
        self._cache: "OrderedDict[str, DensityMatrix]" = OrderedDict()
        self._lock = threading.Lock()

    def __call__(self, circuit: Circuit) -> DensityMatrix:
        key = format_circuit(circuit, header=False)
        with self._lock:
            state = self._cache.get(key)
            if state is not None:
                self._cache.move_to_end(key)
                self.hits += 1
                return state
        state = apply_circuit(circuit, self.noise, self.rho0)
        with self._lock:
            self.misses += 1
            self._cache[key] = state
            self._cache.move_to_end(key)
            while len(self._cache) > self.maxsize:
                self._cache.popitem(last=False)
        return state

    def __len__(self) -> int:
        return len(self._cache)


def run_pec(
    plan: CircuitQPR,
    noise: Optional[CircuitNoise],
    observable,
    runs: int,
    seed: Seed = None,
    rho0: Optional[DensityMatrix] = None,
    workers: int = 1,
) -> PecEstimate:
    """
    逐次采样的概率误差消除估计 Ê = (γ/M)·Σ_a σ(α^a)⟨x^a|A|x^a⟩

    每次运行从第 a 号随机流采样一条含噪线路并读出一次。

    Args:
        plan (CircuitQPR): 线路分解
        noise (CircuitNoise): 设备噪声，None 时取分解所用的噪声
        observable: 对角观测量
        runs (int): 运行次数 M
        seed: 主种子、StreamFactory 或 Generator
        rho0 (DensityMatrix, optional): 初态，默认 |0…0⟩
        workers (int): 线程数

    Returns:
        PecEstimate: 估计值，视作单组 M 次运行，allocation 为 (M,)
    """
    if runs < 1:
        raise ValueError("运行次数必须大于0")
    observable = _check_observable(observable, plan.circuit.n_qubits)
    streams = as_stream_factory(seed)
    states = _FinalStates(_default_noise(plan, noise), rho0)

    def one_run(a: int) -> float:
        rng = streams.stream(_SAMPLE, a)
        sampled = plan.sample(rng)
        index = sample_z_readouts(states(sampled.circuit), rng, 1)[0]
        return sampled.sign * observable.weights[index]

    values = plan.gamma * np.array(ordered_map(one_run, range(runs), workers))
    value = float(values.mean())
    error = float(values.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
    logger.debug(f"flat pec: {states.misses} final states evaluated over {runs} runs, estimate {value:.6f}")
    return PecEstimate(value, plan.gamma, runs, 1, (runs,), error)


def _largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    """按权重把 total 分配为整数，余数按小数部分从大到小补足，相同时序号小者优先"""
    if total == 0:
        return np.zeros(weights.size, dtype=int)
    if weights.sum() <= 0:
        weights = np.ones(weights.size)
    quotas = total * weights / weights.sum()
    counts = np.floor(quotas).astype(int)
    short = total - int(counts.sum())
    order = np.argsort(-(quotas - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


def allocate_runs(budget: int, sigmas: np.ndarray) -> np.ndarray:
    """
    M_j ≈ budget·σ_j/Σσ_i，每组至少 1 次

    Raises:
        ValueError: 预算小于组数
    """
    sigmas = np.asarray(sigmas, dtype=float)
    if budget < sigmas.size:
        raise ValueError(f"读出预算 {budget} 小于组数 {sigmas.size}")
    return 1 + _largest_remainder(budget - sigmas.size, sigmas)


def _jackknife_error(values: np.ndarray) -> float:
    k = values.size
    if k < 2:
        return 0.0
    leave_one_out = (values.sum() - values) / (k - 1)
    return float(math.sqrt((k - 1) / k * np.sum((leave_one_out - leave_one_out.mean()) ** 2)))


def run_pec_grouped(
    plan: CircuitQPR,
    noise: Optional[CircuitNoise],
    observable,
    runs: int,
    groups: int,
    pilot_runs: int = 8,
    seed: Seed = None,
    rho0: Optional[DensityMatrix] = None,
    workers: int = 1,
) -> PecEstimate:
    """
    分组方差优化的概率误差消除估计

    先采样 K 条含噪线路，每条做 pilot_runs 次试探读出估计 σ_j，
    再把剩余预算按 σ_j 比例分配为正式读出。估计值只用正式读出：
    Ê = (γ/K)·Σ_j σ(α^j)·Ē_j，对任何分配方式都无偏。

    Args:
        plan (CircuitQPR): 线路分解
        noise (CircuitNoise): 设备噪声，None 时取分解所用的噪声
        observable: 对角观测量
        runs (int): 总读出预算 M（含试探读出）
        groups (int): 线路数 K
        pilot_runs (int): 每组试探读出次数，至少为 2
        seed: 主种子、StreamFactory 或 Generator
        rho0 (DensityMatrix, optional): 初态
        workers (int): 线程数

    Returns:
        PecEstimate: allocation 为每组的总读出次数（试探 + 正式），其和为 M

    Raises:
        ValueError: K < 1、pilot_runs < 2 或预算不足
    """
    if groups < 1:
        raise ValueError("组数 K 必须大于0")
    if pilot_runs < 2:
        raise ValueError("每组至少需要 2 次试探读出")
    remaining = runs - groups * pilot_runs
    if remaining < groups:
        raise ValueError(f"预算 M={runs} 不足以支持 K={groups} 组、每组 {pilot_runs} 次试探读出")
    observable = _check_observable(observable, plan.circuit.n_qubits)
    weights = observable.weights
    streams = as_stream_factory(seed)
    states = _FinalStates(_default_noise(plan, noise), rho0)

    def pilot(j: int):
        sampled = plan.sample(streams.stream(_SAMPLE, j))
        state = states(sampled.circuit)
        readouts = weights[sample_z_readouts(state, streams.stream(_PILOT, j), pilot_runs)]
        return sampled.sign, sampled.circuit, float(readouts.std())

    pilots = ordered_map(pilot, range(groups), workers)
    sigmas = np.array([s for _, _, s in pilots])
    fresh = allocate_runs(remaining, sigmas)

    def measure(j: int) -> np.ndarray:
        return weights[sample_z_readouts(states(pilots[j][1]), streams.stream(_FRESH, j), int(fresh[j]))]

    readouts = ordered_map(measure, range(groups), workers)
    signs = np.array([sign for sign, _, _ in pilots])
    means = np.array([r.mean() for r in readouts])
    per_group = plan.gamma * signs * means
    value = float(per_group.mean())
    if groups == 1:
        r = readouts[0]
        error = float(plan.gamma * r.std(ddof=1) / math.sqrt(r.size)) if r.size > 1 else 0.0
    else:
        error = _jackknife_error(per_group)
    allocation = tuple(int(pilot_runs + f) for f in fresh)
    logger.debug(
        f"grouped pec: K={groups} evaluated={states.misses} sigma_mean={sigmas.mean():.4f} estimate={value:.6f}"
    )
    return PecEstimate(value, plan.gamma, runs, groups, allocation, error)


def run_unmitigated(
    circuit: Circuit,
    noise: CircuitNoise,
    observable,
    runs: int,
    seed: Seed = None,
    rho0: Optional[DensityMatrix] = None,
) -> PecEstimate:
    """理想线路直接在含噪设备上运行 M 次，取读出的平均值"""
    if runs < 1:
        raise ValueError("运行次数必须大于0")
    observable = _check_observable(observable, circuit.n_qubits)
    state = apply_circuit(circuit, noise, rho0)
    values = observable.weights[sample_z_readouts(state, as_stream_factory(seed).stream(_BASELINE, 0), runs)]
    error = float(values.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
    return PecEstimate(float(values.mean()), 1.0, runs, 1, (runs,), error)


def exhaustive_pec_expectation(
    plan: CircuitQPR,
    noise: Optional[CircuitNoise],
    observable,
    rho0: Optional[DensityMatrix] = None,
    max_branches: int = MAX_EXHAUSTIVE_BRANCHES,
) -> float:
    """
    完整枚举 Σ_α η_α·Tr[A·O_α(ρ0)]，即估计量的精确期望

    Raises:
        ValueError: 分支数超过 max_branches
    """
    count = plan.branch_count
    if count > max_branches:
        raise ValueError(f"分支数 {count} 超过枚举上限 {max_branches}")
    observable = _check_observable(observable, plan.circuit.n_qubits)
    states = _FinalStates(_default_noise(plan, noise), rho0)
    total = math.fsum(
        weight * float(observable.weights @ np.diag(states(circuit).entries).real)
        for circuit, weight in plan.branches()
    )
    logger.debug(f"exhaustive pec over {count} branches ({states.misses} final states evaluated)")
    return total
