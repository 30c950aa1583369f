import functools
import logging
from typing import Sequence, Tuple, Union

import numpy as np

from qem.core.gates import gate_unitary
from qem.core.pauli import PauliString, pauli_matrix

logger = logging.getLogger(__name__)


def _qubit_count(dim: int) -> int:
    n_qubits = int(round(np.log2(dim))) if dim > 0 else 0
    if n_qubits < 1 or 2**n_qubits != dim:
        raise ValueError(f"维度 {dim} 不是 2 的正整数次幂")
    return n_qubits


class DensityMatrix:
    """
    n 比特密度矩阵

    构造时检查厄米性（1e-12）、迹（1e-9）和最小本征值（≥ −1e-9）。
    """

    def __init__(self, entries: np.ndarray, validate: bool = True):
        entries = np.array(entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError("密度矩阵必须是方阵")
        self._n_qubits = _qubit_count(entries.shape[0])
        if validate:
            hermitian_gap = np.max(np.abs(entries - entries.conj().T))
            if hermitian_gap > 1e-12:
                raise ValueError(f"密度矩阵不是厄米矩阵，偏差 {hermitian_gap:.3e}")
            trace = np.trace(entries).real
            if abs(trace - 1.0) > 1e-9:
                raise ValueError(f"密度矩阵的迹为 {trace:.12f}，不等于 1")
            min_eig = np.linalg.eigvalsh(entries).min()
            if min_eig < -1e-9:
                raise ValueError(f"密度矩阵存在负本征值 {min_eig:.3e}")
        entries.setflags(write=False)
        self._entries = entries

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def n_qubits(self) -> int:
        return self._n_qubits

    @property
    def dim(self) -> int:
        return 2**self._n_qubits

    @classmethod
    def from_statevector(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def zero_state(cls, n_qubits: int) -> "DensityMatrix":
        psi = np.zeros(2**n_qubits, dtype=complex)
        psi[0] = 1.0
        return cls.from_statevector(psi)

    @classmethod
    def plus_state(cls, n_qubits: int) -> "DensityMatrix":
        return cls.from_statevector(np.ones(2**n_qubits, dtype=complex))

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        dim = 2**n_qubits
        return cls(np.eye(dim, dtype=complex) / dim)

    def probabilities(self) -> np.ndarray:
        """Z 基测量分布，截去舍入造成的微小负值"""
        probs = np.clip(np.diag(self._entries).real, 0.0, None)
        return probs / probs.sum()

    def purity(self) -> float:
        return float(np.einsum("ij,ji->", self._entries, self._entries).real)

    def __repr__(self) -> str:
        return f"DensityMatrix(n_qubits={self._n_qubits})"


class DiagonalObservable:
    """Z 基对角观测量，权重满足 ‖A‖ ≤ 1"""

    def __init__(self, weights: Sequence[float], atol: float = 1e-12):
        weights = np.array(weights, dtype=float)
        if weights.ndim != 1:
            raise ValueError("对角观测量的权重必须是一维数组")
        self._n_qubits = _qubit_count(weights.size)
        norm = np.max(np.abs(weights))
        if norm > 1.0 + atol:
            raise ValueError(f"观测量范数 {norm:.6f} 超过 1")
        weights.setflags(write=False)
        self._weights = weights

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def n_qubits(self) -> int:
        return self._n_qubits

    @classmethod
    def projector(cls, indices: Sequence[int], n_qubits: int) -> "DiagonalObservable":
        weights = np.zeros(2**n_qubits)
        weights[list(indices)] = 1.0
        return cls(weights)


Observable = Union[PauliString, DiagonalObservable]


def _as_array(rho: Union[DensityMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.entries
    return np.asarray(rho, dtype=complex)


def expectation_value(observable, rho: Union[DensityMatrix, np.ndarray]) -> float:
    """
    观测量期望 Tr[Aρ]

    Args:
        observable: PauliString、DiagonalObservable 或对角权重序列
        rho: 密度矩阵

    Returns:
        float: 期望值，位于 [−1, 1]

    Raises:
        ValueError: 维度不一致或对角观测量范数超过 1
    """
    entries = _as_array(rho)
    if isinstance(observable, (str, PauliString)):
        pauli = observable if isinstance(observable, PauliString) else PauliString(observable)
        if 2**pauli.n_qubits != entries.shape[0]:
            raise ValueError("观测量与量子态的比特数不一致")
        return float(np.einsum("ij,ji->", pauli_matrix(pauli), entries).real)
    if not isinstance(observable, DiagonalObservable):
        observable = DiagonalObservable(observable)
    if observable.weights.size != entries.shape[0]:
        raise ValueError("观测量与量子态的比特数不一致")
    return float(observable.weights @ np.diag(entries).real)


def index_to_bitstring(index: int, n_qubits: int) -> str:
    return format(int(index), f"0{n_qubits}b")


def sample_z_readouts(
    rho: Union[DensityMatrix, np.ndarray], rng: np.random.Generator, shots: int
) -> np.ndarray:
    """Z 基测量 shots 次，返回基矢序号（0 号比特为最高位）"""
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    return rng.choice(rho.dim, size=shots, p=rho.probabilities())


def sample_z_readout(rho: Union[DensityMatrix, np.ndarray], rng: np.random.Generator) -> str:
    """
    对每个比特做一次 Z 基测量

    Returns:
        str: 比特串，例如 "01"
    """
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    index = sample_z_readouts(rho, rng, 1)[0]
    return index_to_bitstring(index, rho.n_qubits)


@functools.lru_cache(maxsize=256)
def _measurement_rotation(letters: str) -> np.ndarray:
    # X 经 H、Y 经 H·S† 转到 Z 基
    factors = []
    for ch in letters:
        if ch == "X":
            factors.append(gate_unitary("H"))
        elif ch == "Y":
            factors.append(gate_unitary("H") @ gate_unitary("SDG"))
        else:
            factors.append(np.eye(2, dtype=complex))
    return functools.reduce(np.kron, factors)


def _parity_signs(letters: str) -> np.ndarray:
    n_qubits = len(letters)
    mask = 0
    for q, ch in enumerate(letters):
        if ch != "I":
            mask |= 1 << (n_qubits - 1 - q)
    return np.array([-1.0 if bin(i & mask).count("1") % 2 else 1.0 for i in range(2**n_qubits)])


def sample_pauli_expectation(
    pauli: PauliString,
    rho: Union[DensityMatrix, np.ndarray],
    rng: np.random.Generator,
    shots: int,
) -> Tuple[float, float]:
    """
    通过基变换加 Z 基测量估计 Pauli 期望

    Returns:
        Tuple[float, float]: (样本均值, 标准误差 M^{-1/2}·样本标准差)
    """
    if shots < 1:
        raise ValueError("测量次数必须大于0")
    entries = _as_array(rho)
    rotation = _measurement_rotation(pauli.letters)
    rotated = DensityMatrix(rotation @ entries @ rotation.conj().T, validate=False)
    outcomes = _parity_signs(pauli.letters)[sample_z_readouts(rotated, rng, shots)]
    mean = float(outcomes.mean())
    spread = float(outcomes.std(ddof=1)) if shots > 1 else 0.0
    return mean, spread / np.sqrt(shots)


def trace_distance(a, b) -> float:
    """迹距离 ½‖a − b‖₁"""
    diff = _as_array(a) - _as_array(b)
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def partial_trace(rho, keep: Sequence[int]) -> np.ndarray:
    """
    保留 keep 中的比特，按升序排列，其余比特求迹

    Returns:
        np.ndarray: 约化密度矩阵
    """
    entries = _as_array(rho)
    n_qubits = _qubit_count(entries.shape[0])
    keep = sorted(set(keep))
    if any(q < 0 or q >= n_qubits for q in keep):
        raise ValueError("保留的比特序号越界")
    tensor = entries.reshape([2] * (2 * n_qubits))
    remaining = n_qubits
    for q in sorted(set(range(n_qubits)) - set(keep), reverse=True):
        tensor = np.trace(tensor, axis1=q, axis2=q + remaining)
        remaining -= 1
    dim = 2 ** len(keep)
    return tensor.reshape(dim, dim)
