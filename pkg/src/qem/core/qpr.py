import functools
import itertools
import logging
import math
from collections import namedtuple
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog

from qem.core.channels import (
    PauliTransferMatrix,
    amplitude_damping_channel,
    depolarizing_channel,
    operation_ptm,
    state_preparation_channel,
)
from qem.core.circuit import Circuit, PlacedGate, contains_preparation
from qem.core.errors import NumericalError, QprShapeError
from qem.core.gates import CLIFFORD_T_GATES, SINGLE_QUBIT_GATES, gate_arity
from qem.core.model import BasisEntry, QprInfeasible, QprTerm, SampledCircuit
from qem.core.pauli import pauli_words
from qem.utils.file_util import to_json
from qem.utils.simplex import solve_l1_equality

logger = logging.getLogger(__name__)

__all__ = [
    "depolarizing_channel",
    "amplitude_damping_channel",
    "state_preparation_channel",
    "NoisyBasis",
    "GateQPR",
    "CnotMergePlan",
    "QprSlot",
    "CircuitQPR",
    "build_depolarizing_basis",
    "build_damping_basis",
    "solve_qpr_lp",
    "depolarizing_gate_qpr_analytic",
    "damping_gate_qpr_analytic",
    "compose_circuit_qpr",
    "export_qpr_text",
    "solve_gate_qprs",
]

QPR_NOISE_KINDS = ("depolarizing", "damping")
LP_BACKENDS = ("simplex", "scipy")
RECONSTRUCTION_TOL = 1e-9

PREP_TOKENS = ("PREP:+", "PREP:-", "PREP:0", "PREP:1")
PREP_FAMILY = "PREP"

_PHASE_NAMES = {"0": "", "+": "S·", "-": "S⁻¹·"}


class NoisyBasis:
    """
    含噪操作集合 Ω

    entries 以操作记号为键；families 把理想门映射到可用于分解它的记号。
    """

    def __init__(self, kind: str, epsilon: float, entries: Iterable[BasisEntry], families: Mapping[str, Sequence[str]]):
        self.kind = kind
        self.epsilon = epsilon
        self._entries: Dict[str, BasisEntry] = {e.token: e for e in entries}
        self._families = {gate: tuple(tokens) for gate, tokens in families.items()}

    def family(self, gate: str) -> List[BasisEntry]:
        if gate not in self._families:
            raise ValueError(f"含噪基中没有门 {gate} 的操作族")
        return [self._entries[t] for t in self._families[gate]]

    def preparations(self) -> List[BasisEntry]:
        return self.family(PREP_FAMILY) if PREP_FAMILY in self._families else []

    def candidates(self, gate: str) -> List[BasisEntry]:
        """分解门 gate 时的候选操作：同族操作，单比特门再加上含噪态制备"""
        entries = self.family(gate)
        if gate_arity(gate) == 1:
            entries = entries + self.preparations()
        return entries

    def __getitem__(self, token: str) -> BasisEntry:
        return self._entries[token]

    def __contains__(self, token: str) -> bool:
        return token in self._entries

    def __iter__(self):
        return iter(self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)


def _entry(token: str, label: str, kind: str, epsilon: float) -> BasisEntry:
    arity = gate_arity(token.split("*")[0])
    return BasisEntry(token, label, operation_ptm(token, kind, epsilon), arity)


def build_depolarizing_basis(epsilon: float, gates: Sequence[str] = CLIFFORD_T_GATES) -> NoisyBasis:
    """Ω = {D_k·P·U}，P 取遍 {I,X,Y,Z}^⊗k"""
    entries, families = [], {}
    for gate in gates:
        k = gate_arity(gate)
        tokens = []
        for word in pauli_words(k):
            token = gate if set(word) == {"I"} else f"{gate}*P:{word}"
            entries.append(_entry(token, f"D{k}·{word}·{gate}", "depolarizing", epsilon))
            tokens.append(token)
        families[gate] = tokens
    return NoisyBasis("depolarizing", epsilon, entries, families)


def build_damping_basis(epsilon: float, gates: Sequence[str] = CLIFFORD_T_GATES) -> NoisyBasis:
    """
    振幅阻尼下的含噪基

    单比特门 U：A𝒰、A𝒮𝒰、A𝒮⁻¹𝒰；CNOT：A_cA_t𝒮_c^y𝒮_t^z·CNOT（y,z ∈ {0,±1}，共 9 个）；
    以及 4 个含噪态制备 A𝒫_ψ。
    """
    entries, families = [], {}
    for gate in gates:
        k = gate_arity(gate)
        tokens = []
        for letters in itertools.product("0+-", repeat=k):
            word = "".join(letters)
            token = gate if set(word) == {"0"} else f"{gate}*PHASE:{word}"
            label = "A·" + "⊗".join(_PHASE_NAMES[ch] or "I·" for ch in word) + gate
            entries.append(_entry(token, label, "damping", epsilon))
            tokens.append(token)
        families[gate] = tokens
    for token in PREP_TOKENS:
        entries.append(_entry(token, f"A·P|{token[-1]}⟩", "damping", epsilon))
    families[PREP_FAMILY] = PREP_TOKENS
    return NoisyBasis("damping", epsilon, entries, families)


class GateQPR:
    """
    理想操作的准概率分解 Σ η_α O_α

    γ = Σ|η_α|，P(α) = |η_α|/γ，σ(α) = sign(η_α)。
    """

    feasible = True

    def __init__(self, target: str, terms: Iterable[Union[QprTerm, Tuple[str, float]]], prune: float = 1e-13):
        kept = [QprTerm(token, float(eta)) for token, eta in terms if abs(eta) > prune]
        if not kept:
            raise ValueError("准概率分解至少需要一个非零项")
        self.target = target
        self.terms = tuple(kept)
        self.gamma = math.fsum(abs(t.eta) for t in kept)
        probs = np.array([abs(t.eta) for t in kept]) / self.gamma
        probs.setflags(write=False)
        self._probabilities = probs
        self._cumulative = np.cumsum(probs)
        self._signs = tuple(1 if t.eta >= 0 else -1 for t in kept)

    @property
    def probabilities(self) -> np.ndarray:
        return self._probabilities

    @property
    def signs(self) -> Tuple[int, ...]:
        return self._signs

    def sample_index(self, rng: np.random.Generator) -> int:
        index = int(np.searchsorted(self._cumulative, rng.random() * self._cumulative[-1], side="right"))
        return min(index, len(self.terms) - 1)

    def reconstruct(self, ptm_of: Callable[[str], PauliTransferMatrix]) -> np.ndarray:
        return sum(t.eta * ptm_of(t.token).entries for t in self.terms)

    def reconstruction_residual(
        self, target: PauliTransferMatrix, ptm_of: Callable[[str], PauliTransferMatrix]
    ) -> float:
        return float(np.max(np.abs(self.reconstruct(ptm_of) - target.entries)))

    def to_dict(self, labels: Optional[Mapping[str, str]] = None) -> dict:
        labels = labels or {}
        return {
            "target": self.target,
            "gamma": self.gamma,
            "terms": [
                {
                    "token": t.token,
                    "label": labels.get(t.token, t.token),
                    "eta": t.eta,
                    "probability": float(p),
                    "sign": s,
                }
                for t, p, s in zip(self.terms, self._probabilities, self._signs)
            ],
        }

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"GateQPR(target={self.target}, terms={len(self.terms)}, gamma={self.gamma:.12g})"


def solve_qpr_lp(
    target: PauliTransferMatrix,
    candidates: Sequence[BasisEntry],
    backend: str = "simplex",
    target_label: str = "target",
) -> Union[GateQPR, QprInfeasible]:
    """
    L1 最小化线性规划：min Σ|η_α|，s.t. Σ η_α·PTM(O_α) = PTM(target)

    Args:
        target (PauliTransferMatrix): 理想操作的传递矩阵
        candidates: 候选含噪操作
        backend (str): "simplex" 为内置两阶段单纯形法，"scipy" 为 HiGHS 对照
        target_label (str): 结果中记录的目标名称

    Returns:
        GateQPR 或 QprInfeasible

    Raises:
        ValueError: 候选为空或维度不一致
        NumericalError: 求解器异常终止
    """
    if not candidates:
        raise ValueError("候选操作不能为空")
    if backend not in LP_BACKENDS:
        raise ValueError(f"未知的线性规划后端: {backend}")
    for entry in candidates:
        if entry.ptm.k_qubits != target.k_qubits:
            raise ValueError(f"候选操作 {entry.token} 与目标的比特数不一致")
    columns = np.column_stack([e.ptm.entries.reshape(-1) for e in candidates])
    rhs = target.entries.reshape(-1)

    if backend == "simplex":
        result = solve_l1_equality(columns, rhs)
        if result.status == "infeasible":
            logger.info(f"QPR LP for {target_label} is infeasible (phase-one residual {result.infeasibility:.3e})")
            return QprInfeasible(target_label, result.infeasibility, "no quasi-probability representation over the candidate set")
        if result.status != "optimal":
            raise NumericalError(f"simplex terminated with status {result.status}")
        eta = result.x
    else:
        m = columns.shape[1]
        result = linprog(
            np.ones(2 * m),
            A_eq=np.hstack([columns, -columns]),
            b_eq=rhs,
            bounds=(0, None),
            method="highs",
        )
        if result.status == 2:
            logger.info(f"QPR LP for {target_label} is infeasible (scipy)")
            return QprInfeasible(target_label, float("nan"), result.message)
        if result.status != 0:
            raise NumericalError(f"linprog failed: {result.message}")
        eta = result.x[:m] - result.x[m:]

    residual = float(np.max(np.abs(columns @ eta - rhs)))
    if residual > RECONSTRUCTION_TOL:
        logger.warning(f"QPR reconstruction residual {residual:.3e} for {target_label}")
    return GateQPR(target_label, zip((e.token for e in candidates), eta))


def depolarizing_gate_qpr_analytic(gate: str, epsilon: float) -> GateQPR:
    """
    退极化噪声下的最优分解

    单比特门：η_1 = 1 + 3ε/(4(1−ε))，三个 Pauli 项 −ε/(4(1−ε))；
    CNOT：η_1 = 1 + 15ε/(16(1−ε))，15 个 Pauli 项 −ε/(16(1−ε))。
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"噪声强度 ε 必须位于 [0, 1)，当前为 {epsilon}")
    k = gate_arity(gate)
    n_terms = 4**k
    off = -epsilon / (n_terms * (1.0 - epsilon))
    terms = []
    for word in pauli_words(k):
        if set(word) == {"I"}:
            terms.append((gate, 1.0 + (n_terms - 1) * epsilon / (n_terms * (1.0 - epsilon))))
        else:
            terms.append((f"{gate}*P:{word}", off))
    return GateQPR(gate, terms)


# 单比特 A⁻¹ 分解的四个因子：(相位字母, η, 是否为 𝒫_{|0⟩})
_DampingFactor = namedtuple("_DampingFactor", ["phase", "eta", "reset"])


def _damping_factors(epsilon: float) -> List[_DampingFactor]:
    s = math.sqrt(1.0 - epsilon)
    side = (1.0 - s) / (2.0 * (1.0 - epsilon))
    return [
        _DampingFactor("0", 1.0 / s, False),
        _DampingFactor("+", side, False),
        _DampingFactor("-", side, False),
        _DampingFactor("0", -epsilon / (1.0 - epsilon), True),
    ]


def _plus_prep_terms(epsilon: float) -> List[Tuple[str, float]]:
    s = math.sqrt(1.0 - epsilon)
    u = (1.0 - 2.0 * epsilon) / (1.0 - epsilon)
    return [
        ("PREP:+", 0.5 * (1.0 / s + u)),
        ("PREP:-", -0.5 * (1.0 / s - u)),
        ("PREP:1", epsilon / (1.0 - epsilon)),
    ]


# CNOT 分解项：η_a·η_b，reset_* 表示该比特上的 𝒫_{|0⟩} 需并入下一层的门
CnotTerm = namedtuple("CnotTerm", ["token", "eta", "reset_control", "reset_target"])


class CnotMergePlan:
    """振幅阻尼 CNOT 分解：A⁻¹⊗A⁻¹ 的张量平方，𝒫_{|0⟩} 因子以合并标记延后处理"""

    def __init__(self, epsilon: float):
        terms = []
        for a, b in itertools.product(_damping_factors(epsilon), repeat=2):
            word = a.phase + b.phase
            token = "CNOT" if word == "00" else f"CNOT*PHASE:{word}"
            terms.append(CnotTerm(token, a.eta * b.eta, a.reset, b.reset))
        self.epsilon = epsilon
        self.terms = tuple(terms)

    @property
    def gamma(self) -> float:
        return math.fsum(abs(t.eta) for t in self.terms)

    def to_dict(self) -> dict:
        return {
            "target": "CNOT",
            "gamma": self.gamma,
            "terms": [
                {
                    "token": t.token,
                    "eta": t.eta,
                    "sign": 1 if t.eta >= 0 else -1,
                    "reset_control": t.reset_control,
                    "reset_target": t.reset_target,
                }
                for t in self.terms
            ],
        }


def damping_gate_qpr_analytic(kind: str, epsilon: float, gate: str = "I") -> Union[GateQPR, CnotMergePlan]:
    """
    振幅阻尼噪声下的解析分解

    Args:
        kind (str): single_qubit | plus_prep | cnot
        epsilon (float): 阻尼强度
        gate (str): single_qubit 时的理想门

    Returns:
        single_qubit、plus_prep 返回 GateQPR；cnot 返回 CnotMergePlan
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"噪声强度 ε 必须位于 [0, 1)，当前为 {epsilon}")
    if kind == "single_qubit":
        if gate not in SINGLE_QUBIT_GATES:
            raise ValueError(f"{gate} 不是单比特 Clifford+T 门")
        terms = []
        for factor in _damping_factors(epsilon):
            if factor.reset:
                terms.append(("PREP:0", factor.eta))
            else:
                token = gate if factor.phase == "0" else f"{gate}*PHASE:{factor.phase}"
                terms.append((token, factor.eta))
        return GateQPR(gate, terms)
    if kind == "plus_prep":
        return GateQPR("PREP:+", _plus_prep_terms(epsilon))
    if kind == "cnot":
        return CnotMergePlan(epsilon)
    raise ValueError(f"未知的分解类型: {kind}")


def reset_follower_qpr(gate: str, epsilon: float) -> GateQPR:
    """
    𝒫_{|0⟩} 并入下一层门 G 后的分解

    I、S、T 吸收 𝒫_{|0⟩} 得到 𝒫_{|0⟩}；H 得到 𝒫_{|+⟩}，用含噪制备分解。

    Raises:
        QprShapeError: 没有合并规则的门
    """
    if gate in ("I", "S", "T"):
        return GateQPR(f"{gate}·P0", [("PREP:0", 1.0)])
    if gate == "H":
        return GateQPR("H·P0", _plus_prep_terms(epsilon))
    logger.warning(f"no merge rule for reset followed by {gate}")
    raise QprShapeError(f"𝒫_|0⟩ 无法并入门 {gate}")


# ---------------------------------------------------------------- 线路级分解

Position = Tuple[int, int]


class QprSlot:
    """单个位置上独立采样的门分解"""

    def __init__(self, position: Position, placed: PlacedGate, qpr: GateQPR):
        self.position = position
        self.placed = placed
        self.qpr = qpr
        self.gamma = qpr.gamma

    @property
    def branch_count(self) -> int:
        return len(self.qpr)

    def _replacement(self, term: QprTerm) -> Dict[Position, PlacedGate]:
        if term.token == self.placed.token:
            return {}
        return {self.position: PlacedGate.from_token(term.token, self.placed.qubits)}

    def sample(self, rng: np.random.Generator):
        index = self.qpr.sample_index(rng)
        term = self.qpr.terms[index]
        return self._replacement(term), self.qpr.signs[index], float(self.qpr.probabilities[index])

    def branches(self):
        for term in self.qpr.terms:
            yield self._replacement(term), term.eta


class _DampingGroup:
    """CNOT 与其后两个单比特门组成的分组，处理 𝒫_{|0⟩} 的合并"""

    def __init__(
        self,
        cnot: Tuple[Position, PlacedGate],
        control: Tuple[Position, PlacedGate],
        target: Tuple[Position, PlacedGate],
        plan: CnotMergePlan,
        single_qprs: Mapping[str, GateQPR],
    ):
        self.cnot, self.control, self.target = cnot, control, target
        epsilon = plan.epsilon
        options = []
        for term in plan.terms:
            fc = reset_follower_qpr(control[1].gate, epsilon) if term.reset_control else single_qprs[control[1].gate]
            ft = reset_follower_qpr(target[1].gate, epsilon) if term.reset_target else single_qprs[target[1].gate]
            options.append((term, fc, ft))
        weights = np.array([abs(term.eta) * fc.gamma * ft.gamma for term, fc, ft in options])
        self.options = options
        self.gamma = math.fsum(weights)
        self._cumulative = np.cumsum(weights / self.gamma)

    @property
    def branch_count(self) -> int:
        return sum(len(fc) * len(ft) for _, fc, ft in self.options)

    def _replacements(self, term: CnotTerm, fc_term: QprTerm, ft_term: QprTerm) -> Dict[Position, PlacedGate]:
        out = {}
        for (position, placed), token in (
            (self.cnot, term.token),
            (self.control, fc_term.token),
            (self.target, ft_term.token),
        ):
            if token != placed.token:
                out[position] = PlacedGate.from_token(token, placed.qubits)
        return out

    def sample(self, rng: np.random.Generator):
        index = int(np.searchsorted(self._cumulative, rng.random() * self._cumulative[-1], side="right"))
        index = min(index, len(self.options) - 1)
        term, fc, ft = self.options[index]
        ic, it = fc.sample_index(rng), ft.sample_index(rng)
        sign = (1 if term.eta >= 0 else -1) * fc.signs[ic] * ft.signs[it]
        probability = abs(term.eta * fc.terms[ic].eta * ft.terms[it].eta) / self.gamma
        return self._replacements(term, fc.terms[ic], ft.terms[it]), sign, probability

    def branches(self):
        for term, fc, ft in self.options:
            for c_term in fc.terms:
                for t_term in ft.terms:
                    yield self._replacements(term, c_term, t_term), term.eta * c_term.eta * t_term.eta


class CircuitQPR:
    """
    线路级乘积分解

    由互不重叠的分块组成：退极化下每个位置一块；振幅阻尼下每个 CNOT
    与其后的两个单比特门组成一块，其余单比特门各自一块。γ_β 为各块 γ 之积。
    """

    def __init__(self, circuit: Circuit, kind: str, epsilon: float, blocks: Sequence):
        self.circuit = circuit
        self.kind = kind
        self.epsilon = epsilon
        self.blocks = tuple(blocks)
        self.gamma = math.prod(b.gamma for b in self.blocks)

    @property
    def branch_count(self) -> int:
        return math.prod(b.branch_count for b in self.blocks)

    def first_order_overhead(self) -> float:
        """一阶近似：退极化 1+ε(3L₁/2+15L₂/8)，振幅阻尼 1+ε(2L₁+4L₂)"""
        singles, doubles = self.circuit.gate_counts()
        if self.kind == "depolarizing":
            return 1.0 + self.epsilon * (1.5 * singles + 15.0 / 8.0 * doubles)
        return 1.0 + self.epsilon * (2.0 * singles + 4.0 * doubles)

    def sample(self, rng: np.random.Generator) -> SampledCircuit:
        replacements: Dict[Position, PlacedGate] = {}
        sign, probability = 1, 1.0
        for block in self.blocks:
            reps, block_sign, block_prob = block.sample(rng)
            replacements.update(reps)
            sign *= block_sign
            probability *= block_prob
        return SampledCircuit(self.circuit.replace(replacements), sign, probability)

    def branches(self) -> Iterator[Tuple[Circuit, float]]:
        """遍历全部支撑线路，给出 (线路, η 之积)"""
        per_block = [list(b.branches()) for b in self.blocks]
        for combo in itertools.product(*per_block):
            replacements: Dict[Position, PlacedGate] = {}
            weight = 1.0
            for reps, eta in combo:
                replacements.update(reps)
                weight *= eta
            yield self.circuit.replace(replacements), weight

    def __repr__(self) -> str:
        return f"CircuitQPR(kind={self.kind}, epsilon={self.epsilon}, blocks={len(self.blocks)}, gamma={self.gamma:.6g})"


@functools.lru_cache(maxsize=256)
def _analytic_qpr(kind: str, gate: str, epsilon: float) -> GateQPR:
    if kind == "depolarizing":
        return depolarizing_gate_qpr_analytic(gate, epsilon)
    return damping_gate_qpr_analytic("single_qubit", epsilon, gate)


def compose_circuit_qpr(
    circuit: Circuit,
    kind: str,
    epsilon: float,
    gate_qprs: Optional[Mapping[str, GateQPR]] = None,
) -> CircuitQPR:
    """
    由逐门分解组成线路分解

    Args:
        circuit (Circuit): 理想 Clifford+T 线路
        kind (str): depolarizing | damping
        epsilon (float): 噪声强度
        gate_qprs (Mapping, optional): 覆盖默认解析分解的逐门分解

    Returns:
        CircuitQPR: 线路分解

    Raises:
        ValueError: 线路含非理想门
        QprShapeError: 振幅阻尼下某个 CNOT 之后不是两个单比特门
    """
    if kind not in QPR_NOISE_KINDS:
        raise ValueError(f"未知的噪声类型: {kind}")
    if contains_preparation(circuit) or any(not g.is_ideal() for _, g in circuit.positions()):
        raise ValueError("线路分解只接受理想 Clifford+T 门")
    gate_qprs = dict(gate_qprs or {})

    def qpr_for(gate: str) -> GateQPR:
        if gate not in gate_qprs:
            gate_qprs[gate] = _analytic_qpr(kind, gate, float(epsilon))
        return gate_qprs[gate]

    if kind == "depolarizing":
        blocks = [QprSlot(pos, g, qpr_for(g.gate)) for pos, g in circuit.positions()]
        return CircuitQPR(circuit, kind, epsilon, blocks)

    plan = CnotMergePlan(float(epsilon))
    layers = circuit.layers
    claimed = set()
    blocks = []
    for (layer_index, gate_index), placed in circuit.positions():
        if placed.gate != "CNOT":
            continue
        if layer_index + 1 >= circuit.depth:
            raise QprShapeError(f"第 {layer_index} 层的 CNOT 之后没有单比特门")
        by_qubit = {g.qubits[0]: (j, g) for j, g in enumerate(layers[layer_index + 1]) if g.arity == 1}
        followers = []
        for qubit in placed.qubits:
            if qubit not in by_qubit:
                raise QprShapeError(f"第 {layer_index} 层 CNOT 在比特 {qubit} 上之后不是单比特门")
            j, follower = by_qubit[qubit]
            followers.append(((layer_index + 1, j), follower))
            claimed.add((layer_index + 1, j))
        singles = {f.gate: qpr_for(f.gate) for _, f in followers}
        blocks.append(
            _DampingGroup(((layer_index, gate_index), placed), followers[0], followers[1], plan, singles)
        )
    for position, placed in circuit.positions():
        if placed.arity == 1 and position not in claimed:
            blocks.append(QprSlot(position, placed, qpr_for(placed.gate)))
    return CircuitQPR(circuit, kind, epsilon, blocks)


def export_qpr_text(qpr, labels: Optional[Mapping[str, str]] = None) -> str:
    """导出为 JSON 文本：目标、各项 (label, η, probability, sign) 与 γ"""
    if isinstance(qpr, QprInfeasible):
        return to_json({"target": qpr.target, "feasible": False, "residual": qpr.residual, "message": qpr.message})
    if isinstance(qpr, GateQPR):
        return to_json(qpr.to_dict(labels))
    return to_json(qpr.to_dict())


def solve_gate_qprs(
    kind: str,
    epsilon: float,
    backend: str = "analytic",
    gates: Sequence[str] = CLIFFORD_T_GATES,
) -> Dict[str, GateQPR]:
    """
    求出线路中各种门的分解，供 compose_circuit_qpr 使用

    backend 为 "analytic" 时使用解析公式，否则对每个门解线性规划；
    振幅阻尼下的 CNOT 总是由 CnotMergePlan 处理，不在此求解。

    Raises:
        NumericalError: 线性规划无可行解
    """
    result = {}
    for gate in gates:
        if kind == "damping" and gate == "CNOT":
            continue
        if backend == "analytic":
            result[gate] = _analytic_qpr(kind, gate, float(epsilon))
            continue
        basis = (build_depolarizing_basis if kind == "depolarizing" else build_damping_basis)(epsilon, (gate,))
        solved = solve_qpr_lp(operation_ptm(gate), basis.candidates(gate), backend, target_label=gate)
        if isinstance(solved, QprInfeasible):
            raise NumericalError(f"门 {gate} 在 {kind} 噪声下没有可行的准概率分解")
        result[gate] = solved
    logger.debug(f"solved {len(result)} gate QPRs ({kind}, eps={epsilon}, backend={backend})")
    return result
