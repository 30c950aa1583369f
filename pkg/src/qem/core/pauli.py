import functools
import itertools
from typing import List, Union

import numpy as np

PAULI_LETTERS = "IXYZ"

_SINGLE_QUBIT = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class PauliString:
    """
    N 比特 Pauli 串

    第一个字母作用在 0 号比特上，对应张量积中最高位的因子。
    """

    __slots__ = ("_letters",)

    def __init__(self, letters: str):
        if not isinstance(letters, str) or not letters:
            raise ValueError("Pauli 串不能为空")
        letters = letters.upper()
        bad = set(letters) - set(PAULI_LETTERS)
        if bad:
            raise ValueError(f"非法的 Pauli 字母: {sorted(bad)}")
        self._letters = letters

    @property
    def letters(self) -> str:
        return self._letters

    @property
    def n_qubits(self) -> int:
        return len(self._letters)

    @property
    def weight(self) -> int:
        return sum(1 for ch in self._letters if ch != "I")

    def is_identity(self) -> bool:
        return self.weight == 0

    def index(self) -> int:
        """按 IXYZ 四进制、首字母为最高位计算的序号"""
        value = 0
        for ch in self._letters:
            value = value * 4 + PAULI_LETTERS.index(ch)
        return value

    @classmethod
    def from_index(cls, index: int, n_qubits: int) -> "PauliString":
        if not 0 <= index < 4**n_qubits:
            raise ValueError(f"序号 {index} 超出 {n_qubits} 比特 Pauli 串的范围")
        letters = []
        for _ in range(n_qubits):
            index, digit = divmod(index, 4)
            letters.append(PAULI_LETTERS[digit])
        return cls("".join(reversed(letters)))

    @classmethod
    def single(cls, letter: str, qubit: int, n_qubits: int) -> "PauliString":
        letters = ["I"] * n_qubits
        letters[qubit] = letter
        return cls("".join(letters))

    def __eq__(self, other) -> bool:
        if isinstance(other, PauliString):
            return self._letters == other._letters
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._letters)

    def __lt__(self, other: "PauliString") -> bool:
        return self._letters < other._letters

    def __str__(self) -> str:
        return self._letters

    def __repr__(self) -> str:
        return f"PauliString('{self._letters}')"


@functools.lru_cache(maxsize=4096)
def _pauli_matrix_cached(letters: str) -> np.ndarray:
    matrix = np.array(
        functools.reduce(np.kron, (_SINGLE_QUBIT[ch] for ch in letters))
    )
    matrix.setflags(write=False)
    return matrix


def pauli_matrix(p: Union[PauliString, str]) -> np.ndarray:
    """
    Pauli 串的矩阵表示

    Args:
        p (Union[PauliString, str]): Pauli 串

    Returns:
        np.ndarray: 2^n×2^n 的厄米酉矩阵（只读，调用方需要修改时请复制）
    """
    if not isinstance(p, PauliString):
        p = PauliString(p)
    return _pauli_matrix_cached(p.letters)


def pauli_words(k: int) -> List[str]:
    """按序号顺序列出 k 比特的全部 4^k 个 Pauli 串"""
    return ["".join(w) for w in itertools.product(PAULI_LETTERS, repeat=k)]


@functools.lru_cache(maxsize=8)
def pauli_basis(k: int) -> np.ndarray:
    """
    归一化的 Pauli 基 P/√(2^k)

    Returns:
        np.ndarray: 形状 (4^k, 2^k, 2^k)，顺序与 pauli_words(k) 一致
    """
    if k < 1:
        raise ValueError("比特数必须大于0")
    basis = np.array([pauli_matrix(w) for w in pauli_words(k)]) / np.sqrt(2**k)
    basis.setflags(write=False)
    return basis
