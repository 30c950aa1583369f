import functools

import numpy as np

from qem.core.pauli import pauli_matrix

# 理想门字母表
SINGLE_QUBIT_GATES = ("I", "H", "S", "T")
CLIFFORD_T_GATES = SINGLE_QUBIT_GATES + ("CNOT",)
# 态制备 |+⟩ |−⟩ |0⟩ |1⟩
PREP_STATES = ("+", "-", "0", "1")

PAULI_PREFIX = "P:"
PHASE_PREFIX = "PHASE:"
PREP_PREFIX = "PREP:"

_S = np.diag([1, 1j]).astype(complex)

_FIXED_GATES = {
    "I": np.eye(2, dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "S": _S,
    "SDG": _S.conj().T,
    "T": np.diag([1, np.exp(1j * np.pi / 4)]).astype(complex),
    "X": pauli_matrix("X"),
    "Y": pauli_matrix("Y"),
    "Z": pauli_matrix("Z"),
    # 控制位为第一个比特
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
}

# PHASE 字母：0 → I，+ → S，- → S†
_PHASE_LETTERS = {"0": "I", "+": "S", "-": "SDG"}

_PREP_VECTORS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
}


def is_preparation(token: str) -> bool:
    return token.startswith(PREP_PREFIX)


def gate_arity(token: str) -> int:
    """
    门记号作用的比特数

    Raises:
        ValueError: 未知的门记号
    """
    if token in _FIXED_GATES:
        return 2 if token == "CNOT" else 1
    if token.startswith(PAULI_PREFIX):
        word = token[len(PAULI_PREFIX) :]
        if word and set(word) <= set("IXYZ"):
            return len(word)
    elif token.startswith(PHASE_PREFIX):
        word = token[len(PHASE_PREFIX) :]
        if word and set(word) <= set(_PHASE_LETTERS):
            return len(word)
    elif is_preparation(token):
        if token[len(PREP_PREFIX) :] in PREP_STATES:
            return 1
    raise ValueError(f"未知的门: {token}")


@functools.lru_cache(maxsize=1024)
def gate_unitary(token: str) -> np.ndarray:
    """
    门记号对应的酉矩阵

    支持 Clifford+T 门 I、H、S、T、CNOT，辅助门 SDG，
    Pauli 插入 ``P:<word>`` 以及相位修饰 ``PHASE:<word>``（0/+/- 对应 I/S/S†）。

    Args:
        token (str): 门记号

    Returns:
        np.ndarray: 只读的酉矩阵

    Raises:
        ValueError: 未知门或态制备（态制备不是酉操作）
    """
    gate_arity(token)
    if token in _FIXED_GATES:
        matrix = np.array(_FIXED_GATES[token])
    elif token.startswith(PAULI_PREFIX):
        matrix = np.array(pauli_matrix(token[len(PAULI_PREFIX) :]))
    elif token.startswith(PHASE_PREFIX):
        factors = [_FIXED_GATES[_PHASE_LETTERS[ch]] for ch in token[len(PHASE_PREFIX) :]]
        matrix = functools.reduce(np.kron, factors).copy()
    else:
        raise ValueError(f"态制备 {token} 没有酉矩阵表示")
    matrix.setflags(write=False)
    return matrix


def prep_state(label: str) -> np.ndarray:
    """态制备目标 |ψ⟩⟨ψ| 的密度矩阵"""
    if label not in _PREP_VECTORS:
        raise ValueError(f"未知的制备态: {label}")
    vec = _PREP_VECTORS[label]
    return np.outer(vec, vec.conj())


def prep_label(token: str) -> str:
    gate_arity(token)
    if not is_preparation(token):
        raise ValueError(f"{token} 不是态制备")
    return token[len(PREP_PREFIX) :]
