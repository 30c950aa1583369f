import logging
import re
from collections import namedtuple
from typing import Dict, Iterable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from qem.core.channels import operation_superoperator
from qem.core.gates import CLIFFORD_T_GATES, gate_arity, is_preparation
from qem.core.state import DensityMatrix

logger = logging.getLogger(__name__)

NOISE_KINDS = ("none", "depolarizing", "damping")

_QUBITS_HINT = re.compile(r"qubits\s*[:=]\s*(\d+)")


class PlacedGate(namedtuple("PlacedGate", ["gate", "qubits", "dressing"])):
    """放置在具体比特上的门，dressing 为门后依次作用的修饰（Pauli 插入或相位门）"""

    __slots__ = ()

    def __new__(cls, gate: str, qubits: Iterable[int], dressing: Iterable[str] = ()):
        return super().__new__(cls, gate, tuple(int(q) for q in qubits), tuple(dressing))

    @property
    def token(self) -> str:
        return "*".join((self.gate,) + self.dressing)

    @property
    def arity(self) -> int:
        return gate_arity(self.gate)

    def is_ideal(self) -> bool:
        return not self.dressing and self.gate in CLIFFORD_T_GATES

    @classmethod
    def from_token(cls, token: str, qubits: Iterable[int]) -> "PlacedGate":
        gate, *dressing = token.split("*")
        return cls(gate, qubits, dressing)


class CircuitNoise(namedtuple("CircuitNoise", ["kind", "epsilon"])):
    """每个操作之后附加的噪声：退极化 D_k 或逐比特振幅阻尼"""

    __slots__ = ()

    def __new__(cls, kind: str = "none", epsilon: float = 0.0):
        if kind not in NOISE_KINDS:
            raise ValueError(f"未知的噪声类型: {kind}")
        epsilon = float(epsilon)
        if not 0.0 <= epsilon < 1.0:
            raise ValueError(f"噪声强度 ε 必须位于 [0, 1)，当前为 {epsilon}")
        return super().__new__(cls, kind, epsilon)


NOISELESS = CircuitNoise()


def _check_gate(placed: PlacedGate, n_qubits: int):
    arity = gate_arity(placed.gate)
    if len(placed.qubits) != arity:
        raise ValueError(f"门 {placed.gate} 需要 {arity} 个比特，实际给出 {len(placed.qubits)} 个")
    if len(set(placed.qubits)) != len(placed.qubits):
        raise ValueError(f"门 {placed.token} 的比特序号重复: {placed.qubits}")
    if any(q < 0 or q >= n_qubits for q in placed.qubits):
        raise ValueError(f"门 {placed.token} 的比特序号越界: {placed.qubits}")
    for part in placed.dressing:
        if gate_arity(part) != arity:
            raise ValueError(f"修饰 {part} 与门 {placed.gate} 的比特数不一致")


class Circuit:
    """
    分层量子线路

    每层中各门的作用比特互不相交，深度即层数。
    """

    def __init__(self, n_qubits: int, layers: Iterable[Iterable[Union[PlacedGate, tuple]]]):
        if n_qubits < 1:
            raise ValueError("比特数必须大于0")
        checked = []
        for depth, layer in enumerate(layers):
            gates = tuple(g if isinstance(g, PlacedGate) else PlacedGate(*g) for g in layer)
            used = set()
            for placed in gates:
                _check_gate(placed, n_qubits)
                if used & set(placed.qubits):
                    raise ValueError(f"第 {depth} 层的门作用在重叠的比特上")
                used.update(placed.qubits)
            checked.append(gates)
        self._n_qubits = n_qubits
        self._layers = tuple(checked)

    @property
    def n_qubits(self) -> int:
        return self._n_qubits

    @property
    def layers(self) -> Tuple[Tuple[PlacedGate, ...], ...]:
        return self._layers

    @property
    def depth(self) -> int:
        return len(self._layers)

    def positions(self) -> Iterator[Tuple[Tuple[int, int], PlacedGate]]:
        for layer_index, layer in enumerate(self._layers):
            for gate_index, placed in enumerate(layer):
                yield (layer_index, gate_index), placed

    def gate_counts(self) -> Tuple[int, int]:
        """(单比特操作数 L1, 两比特操作数 L2)"""
        singles = sum(1 for _, g in self.positions() if g.arity == 1)
        doubles = sum(1 for _, g in self.positions() if g.arity == 2)
        return singles, doubles

    def replace(self, replacements: Dict[Tuple[int, int], PlacedGate]) -> "Circuit":
        """按位置 (层, 序号) 替换门，返回新线路"""
        if not replacements:
            return self
        layers = [list(layer) for layer in self._layers]
        for (layer_index, gate_index), placed in replacements.items():
            layers[layer_index][gate_index] = placed
        return Circuit(self._n_qubits, layers)

    def __eq__(self, other) -> bool:
        if isinstance(other, Circuit):
            return self._n_qubits == other._n_qubits and self._layers == other._layers
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self._n_qubits, self._layers))

    def __str__(self) -> str:
        return format_circuit(self)

    def __repr__(self) -> str:
        return f"Circuit(n_qubits={self._n_qubits}, depth={self.depth})"


def format_circuit(circuit: Circuit, header: bool = True) -> str:
    """
    线路的文本格式：每行一层，门之间以 `` | `` 分隔，例如 ``H 0 | T 1 | CNOT 2 3``
    """
    lines = [f"# qubits: {circuit.n_qubits}"] if header else []
    for layer in circuit.layers:
        lines.append(
            " | ".join(f"{g.token} {' '.join(str(q) for q in g.qubits)}" for g in layer)
        )
    return "\n".join(lines) + "\n"


def parse_circuit(text: str, n_qubits: Optional[int] = None) -> Circuit:
    """
    解析线路文本

    ``#`` 之后为注释；注释中的 ``qubits: N`` 给出比特数，否则取最大比特序号加一。

    Raises:
        ValueError: 语法错误或门不合法
    """
    layers = []
    hinted = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        body, _, comment = raw.partition("#")
        match = _QUBITS_HINT.search(comment)
        if match and hinted is None:
            hinted = int(match.group(1))
        body = body.strip()
        if not body:
            continue
        layer = []
        for chunk in body.split("|"):
            fields = chunk.split()
            if len(fields) < 2:
                raise ValueError(f"第 {line_no} 行格式错误: '{chunk.strip()}'")
            try:
                qubits = [int(f) for f in fields[1:]]
            except ValueError:
                raise ValueError(f"第 {line_no} 行的比特序号不是整数: '{chunk.strip()}'")
            layer.append(PlacedGate.from_token(fields[0], qubits))
        layers.append(layer)
    if n_qubits is None:
        n_qubits = hinted
    if n_qubits is None:
        n_qubits = 1 + max((q for layer in layers for g in layer for q in g.qubits), default=0)
    return Circuit(n_qubits, layers)


def _apply_local(tensor: np.ndarray, superop: np.ndarray, qubits: Sequence[int], n_qubits: int):
    k = len(qubits)
    local = superop.reshape([2] * (4 * k))
    axes = list(qubits) + [n_qubits + q for q in qubits]
    out = np.tensordot(local, tensor, axes=(list(range(2 * k, 4 * k)), axes))
    return np.moveaxis(out, list(range(2 * k)), axes)


def apply_circuit(
    circuit: Circuit,
    noise: Optional[CircuitNoise] = None,
    rho0: Union[DensityMatrix, np.ndarray, None] = None,
) -> DensityMatrix:
    """
    逐层作用线路，每个操作之后附加噪声

    Args:
        circuit (Circuit): 线路
        noise (CircuitNoise, optional): 噪声，None 表示无噪声
        rho0: 初态，默认 |0…0⟩

    Returns:
        DensityMatrix: 末态

    Raises:
        ValueError: 线路与初态的比特数不一致
    """
    noise = noise or NOISELESS
    if rho0 is None:
        rho0 = DensityMatrix.zero_state(circuit.n_qubits)
    entries = rho0.entries if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    n_qubits = circuit.n_qubits
    if entries.shape != (2**n_qubits, 2**n_qubits):
        raise ValueError(f"初态维度 {entries.shape} 与 {n_qubits} 比特线路不一致")
    tensor = entries.reshape([2] * (2 * n_qubits))
    for _, placed in circuit.positions():
        superop = operation_superoperator(placed.token, noise.kind, noise.epsilon)
        tensor = _apply_local(tensor, superop, placed.qubits, n_qubits)
    dim = 2**n_qubits
    final = tensor.reshape(dim, dim)
    return DensityMatrix(0.5 * (final + final.conj().T))


def contains_preparation(circuit: Circuit) -> bool:
    return any(is_preparation(part) for _, g in circuit.positions() for part in (g.gate,) + g.dressing)
