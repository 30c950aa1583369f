import functools
import logging
from typing import Iterable, Sequence, Union

import numpy as np

from qem.core.gates import (
    gate_arity,
    gate_unitary,
    is_preparation,
    prep_label,
    prep_state,
)
from qem.core.pauli import pauli_basis, pauli_matrix, pauli_words

logger = logging.getLogger(__name__)


class KrausChannel:
    """
    Kraus 形式的量子信道 O(ρ) = Σ K ρ K†

    构造时检查完备性 Σ K†K = I，只接受保迹信道。
    """

    def __init__(self, kraus_ops: Iterable[np.ndarray], atol: float = 1e-12):
        ops = [np.asarray(k, dtype=complex) for k in kraus_ops]
        if not ops:
            raise ValueError("Kraus 算符列表不能为空")
        dim = ops[0].shape[0]
        for op in ops:
            if op.shape != (dim, dim):
                raise ValueError("Kraus 算符必须是同维方阵")
        n_qubits = int(round(np.log2(dim)))
        if 2**n_qubits != dim:
            raise ValueError(f"维度 {dim} 不是 2 的幂")
        completeness = sum(op.conj().T @ op for op in ops)
        deviation = np.max(np.abs(completeness - np.eye(dim)))
        if deviation > atol:
            raise ValueError(f"Kraus 算符不满足完备性，偏差 {deviation:.3e}")
        self._ops = tuple(ops)
        self._n_qubits = n_qubits

    @property
    def kraus_ops(self):
        return self._ops

    @property
    def n_qubits(self) -> int:
        return self._n_qubits

    @property
    def dim(self) -> int:
        return 2**self._n_qubits

    @classmethod
    def from_unitary(cls, unitary: np.ndarray) -> "KrausChannel":
        return cls([unitary])

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self._ops)

    def compose(self, other: "KrausChannel") -> "KrausChannel":
        """先作用 other，再作用 self"""
        if self.dim != other.dim:
            raise ValueError("信道维度不一致")
        return KrausChannel([a @ b for a in self._ops for b in other._ops], atol=1e-10)

    def tensor(self, other: "KrausChannel") -> "KrausChannel":
        return KrausChannel([np.kron(a, b) for a in self._ops for b in other._ops], atol=1e-10)


class PauliTransferMatrix:
    """
    归一化 Pauli 基 P/√(2^k) 下的实传递矩阵

    保迹信道的第一行为 (1, 0, …, 0)，酉信道的传递矩阵是正交矩阵。
    """

    def __init__(self, k_qubits: int, entries: np.ndarray):
        entries = np.asarray(entries)
        size = 4**k_qubits
        if entries.shape != (size, size):
            raise ValueError(f"{k_qubits} 比特传递矩阵的形状应为 {size}×{size}")
        if np.iscomplexobj(entries):
            if np.max(np.abs(entries.imag), initial=0.0) > 1e-10:
                raise ValueError("Pauli 传递矩阵必须是实矩阵")
            entries = entries.real
        self._k = k_qubits
        self._entries = np.array(entries, dtype=float)
        self._entries.setflags(write=False)

    @property
    def k_qubits(self) -> int:
        return self._k

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @classmethod
    def identity(cls, k_qubits: int) -> "PauliTransferMatrix":
        return cls(k_qubits, np.eye(4**k_qubits))

    def is_trace_preserving(self, atol: float = 1e-12) -> bool:
        first_row = np.zeros(4**self._k)
        first_row[0] = 1.0
        return bool(np.allclose(self._entries[0], first_row, rtol=0.0, atol=atol))

    def compose(self, other: "PauliTransferMatrix") -> "PauliTransferMatrix":
        return compose_ptm(self, other)

    def tensor(self, other: "PauliTransferMatrix") -> "PauliTransferMatrix":
        return PauliTransferMatrix(self._k + other._k, np.kron(self._entries, other._entries))

    def __matmul__(self, other: "PauliTransferMatrix") -> "PauliTransferMatrix":
        return compose_ptm(self, other)

    def __repr__(self) -> str:
        return f"PauliTransferMatrix(k_qubits={self._k})"


def superoperator_from_kraus(channel: KrausChannel) -> np.ndarray:
    """行优先向量化下的超算符 Σ K⊗K*"""
    return sum(np.kron(k, k.conj()) for k in channel.kraus_ops)


def ptm_from_superoperator(superop: np.ndarray, k_qubits: int) -> PauliTransferMatrix:
    dim = 2**k_qubits
    basis = pauli_basis(k_qubits)
    images = np.einsum("xy,jy->jx", superop, basis.reshape(4**k_qubits, dim * dim))
    images = images.reshape(-1, dim, dim)
    entries = np.einsum("iab,jba->ij", basis, images)
    return PauliTransferMatrix(k_qubits, entries)


def ptm_from_kraus(channel: Union[KrausChannel, Sequence[np.ndarray]]) -> PauliTransferMatrix:
    """
    Kraus 信道的 Pauli 传递矩阵

    矩阵元为 (1/2^k)·Tr[P_i Σ K P_j K†]。

    Args:
        channel: KrausChannel 或 Kraus 算符列表

    Returns:
        PauliTransferMatrix: 传递矩阵

    Raises:
        ValueError: 输入不是保迹信道
    """
    if not isinstance(channel, KrausChannel):
        channel = KrausChannel(channel)
    basis = pauli_basis(channel.n_qubits)
    ops = np.array(channel.kraus_ops)
    images = np.einsum("kab,jbc,kdc->jad", ops, basis, ops.conj())
    entries = np.einsum("iab,jba->ij", basis, images)
    return PauliTransferMatrix(channel.n_qubits, entries)


def ptm_from_unitary(unitary: np.ndarray) -> PauliTransferMatrix:
    return ptm_from_kraus(KrausChannel.from_unitary(unitary))


def compose_ptm(a: PauliTransferMatrix, b: PauliTransferMatrix) -> PauliTransferMatrix:
    """
    信道复合：先 b 后 a

    Raises:
        ValueError: 维度不一致
    """
    if a.k_qubits != b.k_qubits:
        raise ValueError(f"传递矩阵维度不一致: {a.k_qubits} vs {b.k_qubits}")
    return PauliTransferMatrix(a.k_qubits, a.entries @ b.entries)


def _check_epsilon(epsilon: float):
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"噪声强度 ε 必须位于 [0, 1)，当前为 {epsilon}")


def depolarizing_channel(k: int, epsilon: float) -> KrausChannel:
    """
    k 比特退极化信道 D_k(ρ) = (1−ε)ρ + ε·Tr(ρ)·I/2^k

    Args:
        k (int): 比特数，1 或 2
        epsilon (float): 噪声强度，位于 [0, 1)

    Returns:
        KrausChannel: 以 Pauli 算符为 Kraus 算符的信道
    """
    if k not in (1, 2):
        raise ValueError(f"退极化信道只支持 1 或 2 个比特，当前为 {k}")
    _check_epsilon(epsilon)
    n_terms = 4**k
    ops = []
    for word in pauli_words(k):
        weight = 1.0 - epsilon + epsilon / n_terms if set(word) == {"I"} else epsilon / n_terms
        ops.append(np.sqrt(weight) * pauli_matrix(word))
    return KrausChannel(ops)


def depolarizing_ptm(k: int, epsilon: float) -> PauliTransferMatrix:
    _check_epsilon(epsilon)
    diag = np.full(4**k, 1.0 - epsilon)
    diag[0] = 1.0
    return PauliTransferMatrix(k, np.diag(diag))


def amplitude_damping_channel(epsilon: float) -> KrausChannel:
    """单比特振幅阻尼信道，|1⟩ 以概率 ε 弛豫到 |0⟩"""
    _check_epsilon(epsilon)
    a0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - epsilon)]], dtype=complex)
    a1 = np.array([[0.0, np.sqrt(epsilon)], [0.0, 0.0]], dtype=complex)
    return KrausChannel([a0, a1])


def state_preparation_channel(label: str) -> KrausChannel:
    """态制备 𝒫_ψ(ρ) = Tr(ρ)|ψ⟩⟨ψ|"""
    target = prep_state(label)
    vals, vecs = np.linalg.eigh(target)
    psi = vecs[:, int(np.argmax(vals))]
    ops = [np.outer(psi, basis_vec) for basis_vec in np.eye(2, dtype=complex)]
    return KrausChannel(ops)


@functools.lru_cache(maxsize=4096)
def ideal_superoperator(token: str) -> np.ndarray:
    """
    无噪操作（门加修饰）的超算符

    记号形如 ``H*P:X``，修饰按顺序作用在门之后。
    """
    parts = token.split("*")
    arity = gate_arity(parts[0])
    superop = np.eye(4**arity, dtype=complex)
    for part in parts:
        if gate_arity(part) != arity:
            raise ValueError(f"修饰 {part} 与门 {parts[0]} 的比特数不一致")
        if is_preparation(part):
            step = superoperator_from_kraus(state_preparation_channel(prep_label(part)))
        else:
            u = gate_unitary(part)
            step = np.kron(u, u.conj())
        superop = step @ superop
    superop.setflags(write=False)
    return superop


@functools.lru_cache(maxsize=64)
def noise_superoperator(kind: str, epsilon: float, k: int) -> np.ndarray:
    """门后附加噪声的超算符：退极化 D_k 或逐比特振幅阻尼 A^{⊗k}"""
    if kind == "none" or epsilon == 0.0:
        superop = np.eye(4**k, dtype=complex)
    elif kind == "depolarizing":
        superop = superoperator_from_kraus(depolarizing_channel(k, epsilon))
    elif kind == "damping":
        channel = amplitude_damping_channel(epsilon)
        for _ in range(k - 1):
            channel = channel.tensor(amplitude_damping_channel(epsilon))
        superop = superoperator_from_kraus(channel)
    else:
        raise ValueError(f"未知的噪声类型: {kind}")
    superop.setflags(write=False)
    return superop


def operation_superoperator(token: str, kind: str = "none", epsilon: float = 0.0) -> np.ndarray:
    arity = gate_arity(token.split("*")[0])
    return noise_superoperator(kind, float(epsilon), arity) @ ideal_superoperator(token)


def operation_ptm(token: str, kind: str = "none", epsilon: float = 0.0) -> PauliTransferMatrix:
    """含噪操作（理想操作后接噪声）的传递矩阵"""
    arity = gate_arity(token.split("*")[0])
    return ptm_from_superoperator(operation_superoperator(token, kind, epsilon), arity)


def random_kraus_channel(rng: np.random.Generator, k: int, n_ops: int = 3) -> KrausChannel:
    """随机保迹信道：随机复矩阵经 Stinespring 等距正交化得到"""
    dim = 2**k
    stacked = rng.normal(size=(n_ops * dim, dim)) + 1j * rng.normal(size=(n_ops * dim, dim))
    q, _ = np.linalg.qr(stacked)
    return KrausChannel([q[i * dim : (i + 1) * dim] for i in range(n_ops)], atol=1e-10)
