import json
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm

from qem.core.errors import IntegrationError
from qem.core.model import Segment
from qem.core.pauli import PauliString, pauli_matrix
from qem.core.state import DensityMatrix, partial_trace

logger = logging.getLogger(__name__)

INTEGRATION_METHODS = ("rk4", "expm")
TRACE_DRIFT_LIMIT = 1e-6

_SIGMA = {letter: pauli_matrix(letter) for letter in "XYZ"}


class Schedule:
    """
    分段常数哈密顿量 K(t) = Σ J_α(t) P_α

    Args:
        n_qubits (int): 系统比特数
        segments: (持续时间, [(耦合系数, PauliString), …]) 序列
    """

    def __init__(self, n_qubits: int, segments: Sequence[Tuple[float, Sequence]]):
        if n_qubits < 1:
            raise ValueError("比特数必须大于0")
        checked = []
        for duration, terms in segments:
            duration = float(duration)
            if not duration > 0.0:
                raise ValueError(f"分段持续时间必须为正，当前为 {duration}")
            seg_terms = []
            for coupling, pauli in terms:
                if not isinstance(pauli, PauliString):
                    pauli = PauliString(pauli)
                if pauli.n_qubits != n_qubits:
                    raise ValueError(f"Pauli 串 {pauli} 与 {n_qubits} 比特不一致")
                seg_terms.append((float(coupling), pauli))
            checked.append(Segment(duration, tuple(seg_terms)))
        self._n_qubits = n_qubits
        self._segments = tuple(checked)

    @property
    def n_qubits(self) -> int:
        return self._n_qubits

    @property
    def segments(self) -> Tuple[Segment, ...]:
        return self._segments

    @property
    def total_time(self) -> float:
        return math.fsum(seg.duration for seg in self._segments)

    def hamiltonian(self, index: int) -> np.ndarray:
        dim = 2**self._n_qubits
        matrix = np.zeros((dim, dim), dtype=complex)
        for coupling, pauli in self._segments[index].terms:
            matrix += coupling * pauli_matrix(pauli)
        return matrix

    def __eq__(self, other) -> bool:
        if isinstance(other, Schedule):
            return self._n_qubits == other._n_qubits and self._segments == other._segments
        return NotImplemented

    def __len__(self) -> int:
        return len(self._segments)

    def __repr__(self) -> str:
        return f"Schedule(n_qubits={self._n_qubits}, segments={len(self._segments)}, T={self.total_time})"


def schedule_to_json(schedule: Schedule) -> str:
    """序列化为 JSON 文本，浮点数按 repr 输出可精确往返"""
    document = {
        "n_qubits": schedule.n_qubits,
        "segments": [
            {
                "duration": seg.duration,
                "terms": [[coupling, pauli.letters] for coupling, pauli in seg.terms],
            }
            for seg in schedule.segments
        ],
    }
    return json.dumps(document, ensure_ascii=False, indent=2)


def schedule_from_json(text: str) -> Schedule:
    document = json.loads(text)
    segments = [
        (seg["duration"], [(coupling, word) for coupling, word in seg["terms"]])
        for seg in document["segments"]
    ]
    return Schedule(document["n_qubits"], segments)


# ---------------------------------------------------------------- 噪声生成元


@dataclass(frozen=True)
class Depolarizing:
    """逐比特退极化：λ Σ_i (Tr_i[ρ]⊗I/2 − ρ)，等价于跃迁算符 X/2、Y/2、Z/2"""

    def jump_operators(self, n_qubits: int) -> List[Tuple[float, np.ndarray]]:
        jumps = []
        for qubit in range(n_qubits):
            for letter in "XYZ":
                op = pauli_matrix(PauliString.single(letter, qubit, n_qubits)) / 2.0
                jumps.append((1.0, op))
        return jumps


@dataclass(frozen=True)
class DampingDephasing:
    """逐比特振幅阻尼（跃迁算符 |0⟩⟨1|）加退相位（跃迁算符 Z）"""

    damping: float = 1.5
    dephasing: float = 1.0

    def __post_init__(self):
        if self.damping < 0 or self.dephasing < 0:
            raise ValueError("阻尼与退相位速率不能为负")

    def jump_operators(self, n_qubits: int) -> List[Tuple[float, np.ndarray]]:
        lowering = np.array([[0, 1], [0, 0]], dtype=complex)
        jumps = []
        for qubit in range(n_qubits):
            left = np.eye(2**qubit)
            right = np.eye(2 ** (n_qubits - qubit - 1))
            if self.damping > 0:
                jumps.append((self.damping, np.kron(np.kron(left, lowering), right)))
            if self.dephasing > 0:
                op = pauli_matrix(PauliString.single("Z", qubit, n_qubits))
                jumps.append((self.dephasing, np.array(op)))
        return jumps


@dataclass(frozen=True)
class CoherentBath:
    """
    每个系统比特耦合一个独立的单比特热浴

    耦合 V = Σ_i (½ X_i X_{b_i} + ½ Z_{b_i})，整体乘以噪声速率 λ；
    热浴初态 ρ_B ∝ exp(−β Σ σ^z)，按迹归一化。
    """

    beta: float = 1.0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("逆温度 β 不能为负")

    def coupling(self, n_qubits: int) -> np.ndarray:
        total = 2 * n_qubits
        dim = 2**total
        matrix = np.zeros((dim, dim), dtype=complex)
        for qubit in range(n_qubits):
            letters = ["I"] * total
            letters[qubit] = "X"
            letters[n_qubits + qubit] = "X"
            matrix += 0.5 * pauli_matrix("".join(letters))
            matrix += 0.5 * pauli_matrix(PauliString.single("Z", n_qubits + qubit, total))
        return matrix

    def bath_state(self, n_qubits: int) -> np.ndarray:
        single = np.diag([np.exp(-self.beta), np.exp(self.beta)])
        single = single / np.trace(single)
        state = np.array([[1.0]])
        for _ in range(n_qubits):
            state = np.kron(state, single)
        return state.astype(complex)


NoiseGenerator = Union[Depolarizing, DampingDephasing, CoherentBath]


def depolarizing_site_action(rho: np.ndarray, site: int) -> np.ndarray:
    """单比特退极化生成元 Tr_site[ρ]⊗I/2 − ρ，结果按原比特顺序排列"""
    rho = np.asarray(rho, dtype=complex)
    n_qubits = int(round(np.log2(rho.shape[0])))
    tensor = rho.reshape([2] * (2 * n_qubits))
    reduced = np.trace(tensor, axis1=site, axis2=n_qubits + site)
    embedded = np.multiply.outer(reduced, np.eye(2) / 2.0)
    # 新增的两个轴在最后，移回 site 对应的行列位置
    embedded = np.moveaxis(embedded, [2 * n_qubits - 2, 2 * n_qubits - 1], [site, n_qubits + site])
    return embedded.reshape(rho.shape) - rho


def generator_action(generator: NoiseGenerator, rho: np.ndarray) -> np.ndarray:
    """耗散部分 𝓛(ρ)（未乘 λ）；热浴模型返回 −i[V, ρ]，ρ 需包含热浴比特"""
    rho = np.asarray(rho, dtype=complex)
    if isinstance(generator, CoherentBath):
        n_qubits = int(round(np.log2(rho.shape[0]))) // 2
        v = generator.coupling(n_qubits)
        return -1j * (v @ rho - rho @ v)
    n_qubits = int(round(np.log2(rho.shape[0])))
    return _dissipator(generator.jump_operators(n_qubits), rho)


def _dissipator(jumps, rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho)
    for weight, op in jumps:
        op_dag = op.conj().T
        op_sq = op_dag @ op
        out += weight * (op @ rho @ op_dag - 0.5 * (op_sq @ rho + rho @ op_sq))
    return out


def _liouvillian(hamiltonian: np.ndarray, jumps) -> np.ndarray:
    # 行优先向量化：vec(AρB) = (A ⊗ Bᵀ) vec(ρ)
    dim = hamiltonian.shape[0]
    eye = np.eye(dim)
    liouv = -1j * (np.kron(hamiltonian, eye) - np.kron(eye, hamiltonian.T))
    for weight, op in jumps:
        op_sq = op.conj().T @ op
        liouv += weight * (
            np.kron(op, op.conj()) - 0.5 * np.kron(op_sq, eye) - 0.5 * np.kron(eye, op_sq.T)
        )
    return liouv


def _rk4_segment(hamiltonian, jumps, rho, duration, dt_max):
    steps = max(1, math.ceil(duration / dt_max - 1e-9))
    dt = duration / steps

    def rhs(state):
        return -1j * (hamiltonian @ state - state @ hamiltonian) + _dissipator(jumps, state)

    for _ in range(steps):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * dt * k1)
        k3 = rhs(rho + 0.5 * dt * k2)
        k4 = rhs(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho, steps


def _evolve_segment(hamiltonian, jumps, rho, duration, dt_max, method):
    if method == "rk4":
        return _rk4_segment(hamiltonian, jumps, rho, duration, dt_max)
    if not jumps:
        propagator = expm(-1j * duration * hamiltonian)
        return propagator @ rho @ propagator.conj().T, 1
    dim = rho.shape[0]
    propagator = expm(duration * _liouvillian(hamiltonian, jumps))
    return (propagator @ rho.reshape(-1)).reshape(dim, dim), 1


def evolve_master_equation(
    schedule: Schedule,
    generator: NoiseGenerator,
    rate: float,
    rho0: Union[DensityMatrix, np.ndarray],
    dt_max: float = 0.01,
    method: str = "rk4",
) -> DensityMatrix:
    """
    求解 dρ/dt = −i[K(t), ρ] + λ𝓛(ρ)

    Args:
        schedule (Schedule): 分段哈密顿量
        generator: 噪声生成元
        rate (float): 噪声速率 λ ≥ 0
        rho0: 系统初态；热浴模型会在内部追加热浴比特，返回前求迹消去
        dt_max (float): rk4 的最大步长
        method (str): "rk4" 定步长四阶龙格库塔，"expm" 分段精确传播子

    Returns:
        DensityMatrix: 末态 ρ_λ(T)

    Raises:
        ValueError: 参数不合法
        IntegrationError: 某一分段后迹漂移超过 1e-6
    """
    if rate < 0:
        raise ValueError(f"噪声速率不能为负: {rate}")
    if method not in INTEGRATION_METHODS:
        raise ValueError(f"未知的积分方法: {method}")
    if dt_max <= 0:
        raise ValueError("步长必须为正")
    entries = rho0.entries if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    n_qubits = schedule.n_qubits
    if entries.shape != (2**n_qubits, 2**n_qubits):
        raise ValueError("初态维度与哈密顿量不一致")

    bath = isinstance(generator, CoherentBath)
    if bath:
        rho = np.kron(entries, generator.bath_state(n_qubits))
        extra = rate * generator.coupling(n_qubits) if rate > 0 else None
        jumps = []
        bath_eye = np.eye(2**n_qubits)
    else:
        rho = np.array(entries)
        extra = None
        jumps = [(rate * w, op) for w, op in generator.jump_operators(n_qubits)] if rate > 0 else []

    total_steps = 0
    for index in range(len(schedule)):
        hamiltonian = schedule.hamiltonian(index)
        if bath:
            hamiltonian = np.kron(hamiltonian, bath_eye)
            if extra is not None:
                hamiltonian = hamiltonian + extra
        rho, steps = _evolve_segment(
            hamiltonian, jumps, rho, schedule.segments[index].duration, dt_max, method
        )
        total_steps += steps
        drift = abs(np.trace(rho).real - 1.0)
        if drift > TRACE_DRIFT_LIMIT:
            raise IntegrationError(f"trace drift {drift:.3e} exceeds {TRACE_DRIFT_LIMIT}", index)
    logger.debug(f"evolved {len(schedule)} segments with {method}, {total_steps} steps")

    if bath:
        rho = partial_trace(rho, range(n_qubits))
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return DensityMatrix(rho)


def noise_rate_from_depolarizing_strength(epsilon: float) -> float:
    """λ = −½·ln(1−ε)"""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"ε 必须位于 (0, 1)，当前为 {epsilon}")
    return -0.5 * math.log1p(-epsilon)


def rescale_schedule(schedule: Schedule, c: float) -> Schedule:
    """
    噪声放大变换：持续时间乘以 c，耦合除以 c

    Raises:
        ValueError: c < 1
    """
    if c < 1.0:
        raise ValueError(f"放大系数必须不小于 1，当前为 {c}")
    segments = [
        (seg.duration * c, [(coupling / c, pauli) for coupling, pauli in seg.terms])
        for seg in schedule.segments
    ]
    return Schedule(schedule.n_qubits, segments)


# ---------------------------------------------------------------- 随机漂移模型


def haar_su2(rng: np.random.Generator) -> np.ndarray:
    """由归一化四元数得到 Haar 随机 SU(2)"""
    a, b, c, d = rng.normal(size=4)
    norm = math.sqrt(a * a + b * b + c * c + d * d)
    a, b, c, d = a / norm, b / norm, c / norm, d / norm
    return np.array([[a + 1j * b, c + 1j * d], [-c + 1j * d, a - 1j * b]], dtype=complex)


def _rotation_matrix(unitary: np.ndarray) -> np.ndarray:
    # R[a, b] = ½ Tr[σ_b U σ_a U†]
    letters = "XYZ"
    rot = np.zeros((3, 3))
    for i, a in enumerate(letters):
        conj = unitary @ _SIGMA[a] @ unitary.conj().T
        for j, b in enumerate(letters):
            rot[i, j] = 0.5 * np.trace(_SIGMA[b] @ conj).real
    return rot


def sample_drift_graph(
    rng: np.random.Generator, n_qubits: int, edge_probability: float
) -> Dict[Tuple[int, int], float]:
    """Erdős–Rényi 随机图与高斯耦合 J_{i,j} ~ N(0, 1)；空图重新采样"""
    pairs = [(i, j) for i in range(n_qubits) for j in range(i + 1, n_qubits)]
    attempts = 0
    while True:
        attempts += 1
        mask = rng.random(len(pairs)) < edge_probability
        if mask.any():
            break
        logger.warning(f"empty drift graph drawn, resampling (attempt {attempts})")
    couplings = rng.normal(size=len(pairs))
    return {pair: float(j) for pair, j, keep in zip(pairs, couplings, mask) if keep}


def build_drift_schedule(
    rng: np.random.Generator,
    n_qubits: int,
    d_steps: int,
    step_time: float,
    edge_probability: float = 0.5,
) -> Schedule:
    """
    随机漂移哈密顿量 K_R = U K_0 U†，K_0 = Σ J_{i,j} X_i Z_j

    K_0 在各步之间不变，每一步重新抽取一组局域 Haar 随机酉变换，
    旋转后的 K_R 在 Pauli 基下展开。

    Raises:
        ValueError: n_qubits < 2 或 d_steps < 1
    """
    if n_qubits < 2:
        raise ValueError("漂移模型至少需要 2 个比特")
    if d_steps < 1:
        raise ValueError("漂移步数必须大于0")
    if step_time <= 0:
        raise ValueError("每步时间必须为正")
    if not 0.0 < edge_probability <= 1.0:
        raise ValueError("连边概率必须位于 (0, 1]")
    graph = sample_drift_graph(rng, n_qubits, edge_probability)
    segments = []
    for _ in range(d_steps):
        rotations = [_rotation_matrix(haar_su2(rng)) for _ in range(n_qubits)]
        coefficients: Dict[str, float] = {}
        for (i, j), coupling in graph.items():
            # X_i → Σ_b R_i[X, b] σ_b，Z_j → Σ_c R_j[Z, c] σ_c
            for b, letter_b in enumerate("XYZ"):
                for c, letter_c in enumerate("XYZ"):
                    value = coupling * rotations[i][0, b] * rotations[j][2, c]
                    letters = ["I"] * n_qubits
                    letters[i] = letter_b
                    letters[j] = letter_c
                    word = "".join(letters)
                    coefficients[word] = coefficients.get(word, 0.0) + value
        terms = [(value, PauliString(word)) for word, value in sorted(coefficients.items()) if abs(value) > 1e-14]
        segments.append((step_time, terms))
    return Schedule(n_qubits, segments)
