import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from dynaconf import Validator

from qem.core.circuit import Circuit, CircuitNoise, PlacedGate, apply_circuit
from qem.core.dynamics import (
    CoherentBath,
    DampingDephasing,
    Depolarizing,
    build_drift_schedule,
    evolve_master_equation,
    noise_rate_from_depolarizing_strength,
)
from qem.core.errors import ConfigError
from qem.core.gates import SINGLE_QUBIT_GATES
from qem.core.model import MedianProjector
from qem.core.pauli import PauliString
from qem.core.pec import run_pec, run_pec_grouped, run_unmitigated
from qem.core.qpr import compose_circuit_qpr, solve_gate_qprs
from qem.core.state import DensityMatrix, DiagonalObservable, expectation_value
from qem.core.zne import extrapolate, make_node_sequence, richardson_coefficients, run_zne_protocol
from qem.utils.file_util import ResultWriter
from qem.utils.rng_util import StreamFactory, ordered_map
from qem.utils.time_util import Stopwatch

logger = logging.getLogger(__name__)

ZNE_MODELS = ("depolarizing", "damping_dephasing", "non_markovian")
PEC_ESTIMATORS = ("grouped", "flat")
INITIAL_STATES = ("plus", "zero")
FIRST_LAYERS = ("single", "cnot")
QPR_BACKENDS = ("analytic", "simplex", "scipy")

FIG1_NODE_COLUMNS = [
    "model",
    "instance",
    "epsilon",
    "lambda",
    "node_index",
    "c_j",
    "estimate",
    "n",
    "extrapolated",
    "exact",
    "abs_error",
]
FIG1_RUN_COLUMNS = ["model", "instance", "epsilon", "lambda", "n", "extrapolated", "exact", "abs_error", "gamma_n"]
FIG2_COLUMNS = ["circuit_id", "mitigated", "unmitigated", "exact", "delta", "delta0", "gamma", "M"]
FIG2_HIST_COLUMNS = ["bin_left", "bin_right", "bin_center", "delta_count", "delta0_count"]
FIG2_HIST_BINS = 20

COMMON_VALIDATORS = [
    Validator("seed", must_exist=True, is_type_of=int, gte=0),
    Validator("workers", default=1, is_type_of=int, gte=1),
    Validator("output", must_exist=True, is_type_of=str),
    Validator("gnuplot", default=True, is_type_of=bool),
]

ZNE_VALIDATORS = [
    Validator("zne.n_qubits", must_exist=True, is_type_of=int, gte=2, lte=8),
    Validator("zne.drift_steps", must_exist=True, is_type_of=int, gte=1),
    Validator("zne.step_time", must_exist=True, is_type_of=(int, float), gt=0),
    Validator("zne.edge_probability", default=0.5, is_type_of=(int, float), gt=0, lte=1),
    Validator("zne.epsilon_min", must_exist=True, is_type_of=float, gt=0, lt=1),
    Validator("zne.epsilon_max", must_exist=True, is_type_of=float, gt=0, lt=1),
    Validator("zne.epsilon_points", must_exist=True, is_type_of=int, gte=1),
    Validator("zne.models", must_exist=True, is_type_of=list, condition=lambda v: set(v) <= set(ZNE_MODELS) and len(v) > 0),
    Validator("zne.max_order", must_exist=True, is_type_of=int, gte=0, lte=6),
    Validator("zne.instances", must_exist=True, is_type_of=int, gte=1),
    Validator("zne.node_kind", default="random_partition", is_in=["random_partition", "bulirsch_stoer", "harmonic"]),
    Validator("zne.c_max", default=4.0, is_type_of=(int, float), gt=1),
    Validator("zne.min_separation", default=0.05, is_type_of=(int, float), gte=0),
    Validator("zne.damping_rate", default=1.5, is_type_of=(int, float), gte=0),
    Validator("zne.dephasing_rate", default=1.0, is_type_of=(int, float), gte=0),
    Validator("zne.beta", default=1.0, is_type_of=(int, float), gt=0),
    Validator("zne.method", default="expm", is_in=["expm", "rk4"]),
    Validator("zne.dt_max", default=0.01, is_type_of=float, gt=0),
]

PEC_VALIDATORS = [
    Validator("pec.n_qubits", must_exist=True, is_type_of=int, gte=2, lte=10),
    Validator("pec.depth", must_exist=True, is_type_of=int, gte=1),
    Validator("pec.epsilon", must_exist=True, is_type_of=(int, float), gte=0, lt=1),
    Validator("pec.noise", must_exist=True, is_in=["depolarizing", "damping"]),
    Validator("pec.runs", must_exist=True, is_type_of=int, gte=1),
    Validator("pec.estimator", default="grouped", is_in=list(PEC_ESTIMATORS)),
    Validator("pec.groups", default=1, is_type_of=int, gte=1),
    Validator("pec.pilot_runs", default=8, is_type_of=int, gte=2),
    Validator("pec.circuits", must_exist=True, is_type_of=int, gte=1, lte=500),
    Validator("pec.initial_state", default="plus", is_in=list(INITIAL_STATES)),
    Validator("pec.first_layer", default="auto", is_in=["auto", *FIRST_LAYERS]),
    Validator("qpr.backend", default="analytic", is_in=list(QPR_BACKENDS)),
]


@dataclass(frozen=True)
class ZneSettings:
    n_qubits: int = 4
    drift_steps: int = 6
    step_time: float = 2.0
    edge_probability: float = 0.5
    epsilons: Tuple[float, ...] = tuple(np.geomspace(1e-3, 1e-2, 10))
    models: Tuple[str, ...] = ZNE_MODELS
    max_order: int = 3
    instances: int = 20
    node_kind: str = "random_partition"
    c_max: float = 4.0
    min_separation: float = 0.05
    damping_rate: float = 1.5
    dephasing_rate: float = 1.0
    beta: float = 1.0
    method: str = "expm"
    dt_max: float = 0.01

    def __post_init__(self):
        if not self.epsilons or any(not 0 < e < 1 for e in self.epsilons):
            raise ConfigError("ε 网格必须位于 (0, 1)")
        unknown = set(self.models) - set(ZNE_MODELS)
        if unknown:
            raise ConfigError(f"未知的噪声模型: {sorted(unknown)}")


@dataclass(frozen=True)
class PecSettings:
    n_qubits: int = 6
    depth: int = 20
    epsilon: float = 0.01
    noise: str = "depolarizing"
    runs: int = 4000
    estimator: str = "grouped"
    groups: int = 1300
    pilot_runs: int = 2
    circuits: int = 100
    initial_state: str = "plus"
    first_layer: str = "auto"
    backend: str = "analytic"

    def __post_init__(self):
        if self.first_layer == "auto":
            # 振幅阻尼且深度为偶数时首层取 CNOT，保证末层为单比特门
            resolved = "cnot" if self.noise == "damping" and self.depth % 2 == 0 else "single"
            object.__setattr__(self, "first_layer", resolved)
        if self.first_layer not in FIRST_LAYERS:
            raise ConfigError(f"未知的首层类型: {self.first_layer}")
        if self.n_qubits % 2:
            raise ConfigError("线路比特数必须为偶数")
        if self.estimator == "grouped" and self.runs - self.groups * self.pilot_runs < self.groups:
            raise ConfigError(
                f"预算 M={self.runs} 不足以支持 K={self.groups} 组、每组 {self.pilot_runs} 次试探读出"
            )
        if self.noise == "damping" and self.depth > 1 and _last_layer_is_cnot(self.depth, self.first_layer):
            raise ConfigError("振幅阻尼下线路的最后一层不能是 CNOT，请调整 depth 或 first_layer")


@dataclass(frozen=True)
class ExperimentConfig:
    """一次实验的全部参数，运行前已完成校验"""

    kind: str
    seed: int
    output: str
    workers: int = 1
    gnuplot: bool = True
    zne: Optional[ZneSettings] = None
    pec: Optional[PecSettings] = None

    @classmethod
    def from_settings(cls, settings, kind: str, seed: Optional[int] = None) -> "ExperimentConfig":
        """
        由 dynaconf 配置构造实验参数

        Args:
            settings: Dynaconf 实例
            kind (str): zne | pec
            seed (int, optional): 命令行覆盖的主种子

        Raises:
            dynaconf.ValidationError: 配置项类型或取值不合法
            ConfigError: 配置项之间不一致
        """
        if seed is not None:
            settings.set("seed", seed)
        settings.validators.register(*COMMON_VALIDATORS)
        if kind == "zne":
            settings.validators.register(*ZNE_VALIDATORS)
            settings.validators.validate(only=["seed", "workers", "output", "gnuplot", "zne"])
            z = settings.zne
            if z.epsilon_min > z.epsilon_max:
                raise ConfigError("epsilon_min 不能大于 epsilon_max")
            zne = ZneSettings(
                n_qubits=z.n_qubits,
                drift_steps=z.drift_steps,
                step_time=float(z.step_time),
                edge_probability=float(z.edge_probability),
                epsilons=tuple(float(e) for e in np.geomspace(z.epsilon_min, z.epsilon_max, z.epsilon_points)),
                models=tuple(z.models),
                max_order=z.max_order,
                instances=z.instances,
                node_kind=z.node_kind,
                c_max=float(z.c_max),
                min_separation=float(z.min_separation),
                damping_rate=float(z.damping_rate),
                dephasing_rate=float(z.dephasing_rate),
                beta=float(z.beta),
                method=z.method,
                dt_max=float(z.dt_max),
            )
            return cls("zne", settings.seed, settings.output, settings.workers, settings.gnuplot, zne=zne)
        if kind == "pec":
            settings.validators.register(*PEC_VALIDATORS)
            settings.validators.validate(only=["seed", "workers", "output", "gnuplot", "pec", "qpr"])
            p = settings.pec
            pec = PecSettings(
                n_qubits=p.n_qubits,
                depth=p.depth,
                epsilon=float(p.epsilon),
                noise=p.noise,
                runs=p.runs,
                estimator=p.estimator,
                groups=p.groups,
                pilot_runs=p.pilot_runs,
                circuits=p.circuits,
                initial_state=p.initial_state,
                first_layer=p.first_layer,
                backend=settings.qpr.backend,
            )
            return cls("pec", settings.seed, settings.output, settings.workers, settings.gnuplot, pec=pec)
        raise ConfigError(f"未知的实验类型: {kind}")


# ---------------------------------------------------------------- 线路与观测量


def _last_layer_is_cnot(depth: int, first_layer: str) -> bool:
    last = depth - 1
    return (last % 2 == 1) if first_layer == "single" else (last % 2 == 0)


def gen_clifford_t_circuit(rng: np.random.Generator, n: int, d: int, first_layer: str = "single") -> Circuit:
    """
    交替层随机 Clifford+T 线路

    单比特层为 {I,H,S,T} 的张量积；CNOT 层把比特随机配成 n/2 对，每对随机决定控制与目标。
    first_layer 决定第一层的类型。

    Raises:
        ValueError: n 为奇数、d < 1 或 first_layer 未知
    """
    if n < 2 or n % 2:
        raise ValueError(f"比特数必须为正偶数，当前为 {n}")
    if d < 1:
        raise ValueError("线路深度必须大于0")
    if first_layer not in FIRST_LAYERS:
        raise ValueError(f"未知的首层类型: {first_layer}")
    offset = 0 if first_layer == "single" else 1
    layers = []
    for layer in range(d):
        if (layer + offset) % 2 == 0:
            choices = rng.integers(len(SINGLE_QUBIT_GATES), size=n)
            layers.append([PlacedGate(SINGLE_QUBIT_GATES[c], (q,)) for q, c in enumerate(choices)])
        else:
            perm = rng.permutation(n)
            layers.append([PlacedGate("CNOT", (int(perm[2 * k]), int(perm[2 * k + 1]))) for k in range(n // 2)])
    return Circuit(n, layers)


def median_projector(ideal_state: DensityMatrix) -> MedianProjector:
    """
    理想末态中概率最大的 2^{n−1} 个基矢上的投影

    概率四舍五入到 12 位后比较，相同时序号小者优先，所以 E* ≥ 1/2。
    """
    probs = np.diag(ideal_state.entries).real
    dim = probs.size
    order = np.lexsort((np.arange(dim), -np.round(probs, 12)))
    indices = tuple(sorted(int(i) for i in order[: dim // 2]))
    observable = DiagonalObservable.projector(indices, ideal_state.n_qubits)
    return MedianProjector(indices, observable, float(probs[list(indices)].sum()))


def random_pauli_observable(rng: np.random.Generator, n: int) -> PauliString:
    if n < 1:
        raise ValueError("比特数必须大于0")
    return PauliString.from_index(int(rng.integers(1, 4**n)), n)


# ---------------------------------------------------------------- 外推误差标度实验


def _noise_generator(model: str, zne: ZneSettings):
    if model == "depolarizing":
        return Depolarizing()
    if model == "damping_dephasing":
        return DampingDephasing(zne.damping_rate, zne.dephasing_rate)
    return CoherentBath(zne.beta)


def _fig1_instance(zne: ZneSettings, streams: StreamFactory, instance: int):
    rng = streams.stream(0, instance)
    schedule = build_drift_schedule(rng, zne.n_qubits, zne.drift_steps, zne.step_time, zne.edge_probability)
    observable = random_pauli_observable(rng, zne.n_qubits)
    nodes = make_node_sequence(
        zne.node_kind,
        zne.max_order,
        {"c_max": zne.c_max, "min_separation": zne.min_separation},
        rng=rng,
    )
    plans = [richardson_coefficients(nodes.prefix(n)) for n in range(zne.max_order + 1)]
    rho0 = DensityMatrix.zero_state(zne.n_qubits)
    node_rows, run_rows = [], []
    for model in zne.models:
        generator = _noise_generator(model, zne)
        exact = expectation_value(
            observable,
            evolve_master_equation(schedule, generator, 0.0, rho0, dt_max=zne.dt_max, method=zne.method),
        )
        for epsilon in zne.epsilons:
            rate = noise_rate_from_depolarizing_strength(epsilon)
            result = run_zne_protocol(
                schedule, generator, rate, observable, nodes, rho0, method=zne.method, dt_max=zne.dt_max
            )
            for plan in plans:
                n = plan.order
                value = extrapolate(plan, result.estimates[: n + 1])
                error = abs(value - exact)
                common = {"model": model, "instance": instance, "epsilon": epsilon, "lambda": rate}
                run_rows.append(
                    dict(common, n=n, extrapolated=value, exact=exact, abs_error=error, gamma_n=plan.stability)
                )
                for j, c in enumerate(plan.nodes.values):
                    node_rows.append(
                        dict(
                            common,
                            node_index=j,
                            c_j=c,
                            estimate=result.estimates[j],
                            n=n,
                            extrapolated=value,
                            exact=exact,
                            abs_error=error,
                        )
                    )
    logger.info(f"fig1 instance {instance} done ({observable}, nodes {[round(c, 4) for c in nodes.values]})")
    return node_rows, run_rows


def loglog_slopes(summary: pd.DataFrame) -> pd.DataFrame:
    """对每个模型与阶数拟合 log ΔE 关于 log ε 的斜率"""
    rows = []
    for (model, n), part in summary.groupby(["model", "n"], sort=False):
        part = part[part["abs_error"] > 0]
        if len(part) < 2:
            continue
        slope, _ = np.polyfit(np.log(part["epsilon"]), np.log(part["abs_error"]), 1)
        rows.append({"model": model, "n": int(n), "slope": float(slope)})
    return pd.DataFrame(rows, columns=["model", "n", "slope"])


def run_fig1_experiment(config: ExperimentConfig) -> Dict[str, pd.DataFrame]:
    """
    零噪声外推的误差随噪声强度的变化

    每个实例随机生成漂移调度、Pauli 观测量与节点序列，在三种噪声模型与 ε 网格上
    计算 n = 0…max_order 阶外推的误差 ΔE = |E* − Ê^n|，E* 取 λ=0 的演化。

    Returns:
        Dict[str, pd.DataFrame]: nodes、runs、summary、slopes 四张表
    """
    zne = config.zne
    if zne is None:
        raise ConfigError("缺少 zne 配置")
    streams = StreamFactory(config.seed)
    writer = ResultWriter(config.output, config.gnuplot)
    logger.info(
        f"fig1: N={zne.n_qubits} d={zne.drift_steps} t={zne.step_time} models={list(zne.models)} "
        f"eps=[{zne.epsilons[0]:.1e}, {zne.epsilons[-1]:.1e}] x{len(zne.epsilons)} instances={zne.instances}"
    )
    with Stopwatch("fig1") as watch:
        results = ordered_map(lambda i: _fig1_instance(zne, streams, i), range(zne.instances), config.workers)
    nodes = pd.DataFrame([row for node_rows, _ in results for row in node_rows], columns=FIG1_NODE_COLUMNS)
    runs = pd.DataFrame([row for _, run_rows in results for row in run_rows], columns=FIG1_RUN_COLUMNS)
    summary = (
        runs.groupby(["model", "epsilon", "n"], sort=False)["abs_error"].median().reset_index()
    )
    slopes = loglog_slopes(summary)
    for row in slopes.itertuples():
        logger.info(f"fig1 slope model={row.model} n={row.n}: {row.slope:.3f} (expected {row.n + 1})")

    writer.write_table("fig1_nodes", nodes, FIG1_NODE_COLUMNS)
    writer.write_table("fig1_runs", runs, FIG1_RUN_COLUMNS)
    writer.write_table("fig1_summary", summary)
    writer.write_table("fig1_slopes", slopes)
    wide = summary.pivot_table(index="epsilon", columns=["model", "n"], values="abs_error")
    wide.columns = [f"{model}_n{n}" for model, n in wide.columns]
    writer.write_table("fig1_plot", wide.reset_index())
    writer.write_gnuplot("fig1", "fig1_plot", "epsilon", list(wide.columns), logscale="xy", title="median |E* - E^n|")
    writer.write_metadata({"experiment": "fig1", "seed": config.seed, "zne": zne.__dict__}, watch.started, watch.finished)
    return {"nodes": nodes, "runs": runs, "summary": summary, "slopes": slopes}


# ---------------------------------------------------------------- 随机线路误差消除实验


def _initial_state(kind: str, n_qubits: int) -> DensityMatrix:
    return DensityMatrix.plus_state(n_qubits) if kind == "plus" else DensityMatrix.zero_state(n_qubits)


def _fig2_circuit(pec, gate_qprs, streams: StreamFactory, index: int) -> dict:
    circuit = gen_clifford_t_circuit(streams.stream(0, index), pec.n_qubits, pec.depth, pec.first_layer)
    rho0 = _initial_state(pec.initial_state, pec.n_qubits)
    projector = median_projector(apply_circuit(circuit, None, rho0))
    plan = compose_circuit_qpr(circuit, pec.noise, pec.epsilon, gate_qprs)
    noise = CircuitNoise(pec.noise, pec.epsilon)
    mitigation_streams = streams.child(1, index)
    if pec.estimator == "grouped":
        mitigated = run_pec_grouped(
            plan, noise, projector.observable, pec.runs, pec.groups, pec.pilot_runs, mitigation_streams, rho0
        )
    else:
        mitigated = run_pec(plan, noise, projector.observable, pec.runs, mitigation_streams, rho0)
    baseline = run_unmitigated(circuit, noise, projector.observable, pec.runs, streams.child(2, index), rho0)
    exact = projector.ideal_value
    row = {
        "circuit_id": index,
        "mitigated": mitigated.value,
        "unmitigated": baseline.value,
        "exact": exact,
        "delta": abs(mitigated.value - exact),
        "delta0": abs(baseline.value - exact),
        "gamma": plan.gamma,
        "M": pec.runs,
    }
    logger.info(
        f"fig2 circuit {index}: gamma={plan.gamma:.4f} delta={row['delta']:.4f} delta0={row['delta0']:.4f}"
    )
    return row


def error_histogram(delta, delta0, bins: int = FIG2_HIST_BINS) -> pd.DataFrame:
    """
    δ 与 δ₀ 在同一组等宽分箱上的计数

    Args:
        delta: 消除噪声后的误差
        delta0: 直接运行的误差
        bins (int): 分箱数

    Returns:
        pd.DataFrame: 列为 FIG2_HIST_COLUMNS，每个分箱一行
    """
    delta = np.asarray(delta, dtype=float)
    delta0 = np.asarray(delta0, dtype=float)
    edges = np.histogram_bin_edges(np.concatenate([delta, delta0]), bins=bins)
    return pd.DataFrame(
        {
            "bin_left": edges[:-1],
            "bin_right": edges[1:],
            "bin_center": 0.5 * (edges[:-1] + edges[1:]),
            "delta_count": np.histogram(delta, bins=edges)[0],
            "delta0_count": np.histogram(delta0, bins=edges)[0],
        },
        columns=FIG2_HIST_COLUMNS,
    )


def run_fig2_experiment(config: ExperimentConfig) -> pd.DataFrame:
    """
    随机 Clifford+T 线路上的概率误差消除

    每条线路以中位数投影为观测量，比较消除噪声后的估计 δ 与直接运行的估计 δ₀。

    Returns:
        pd.DataFrame: 每条线路一行
    """
    pec = config.pec
    if pec is None:
        raise ConfigError("缺少 pec 配置")
    streams = StreamFactory(config.seed)
    writer = ResultWriter(config.output, config.gnuplot)
    gate_qprs = solve_gate_qprs(pec.noise, pec.epsilon, pec.backend)
    logger.info(
        f"fig2: n={pec.n_qubits} d={pec.depth} eps={pec.epsilon} noise={pec.noise} M={pec.runs} "
        f"estimator={pec.estimator} circuits={pec.circuits}"
    )
    with Stopwatch("fig2") as watch:
        rows = ordered_map(lambda i: _fig2_circuit(pec, gate_qprs, streams, i), range(pec.circuits), config.workers)
    table = pd.DataFrame(rows, columns=FIG2_COLUMNS)
    skewed = float((table["exact"] - 0.5 > 0.05).mean())
    logger.info(
        f"fig2 medians: delta={table['delta'].median():.4f} delta0={table['delta0'].median():.4f} "
        f"gamma={table['gamma'].median():.4f}; E*-1/2 > 0.05 for {skewed:.0%} of circuits"
    )
    bound = table["gamma"].median() / math.sqrt(pec.runs)
    logger.info(f"fig2 precision bound gamma/sqrt(M) = {bound:.4f}")

    writer.write_table("fig2", table, FIG2_COLUMNS)
    sorted_errors = pd.DataFrame(
        {
            "rank": np.arange(1, len(table) + 1),
            "delta": np.sort(table["delta"].to_numpy()),
            "delta0": np.sort(table["delta0"].to_numpy()),
        }
    )
    writer.write_table("fig2_sorted", sorted_errors)
    writer.write_gnuplot("fig2", "fig2_sorted", "rank", ["delta", "delta0"], title="sorted |E - E*|")
    writer.write_table("fig2_hist", error_histogram(table["delta"], table["delta0"]), FIG2_HIST_COLUMNS)
    writer.write_gnuplot(
        "fig2_hist", "fig2_hist", "bin_center", ["delta_count", "delta0_count"], title="histogram of |E - E*|"
    )
    writer.write_metadata(
        {"experiment": "fig2", "seed": config.seed, "pec": pec.__dict__}, watch.started, watch.finished
    )
    return table


def run_experiment(config: ExperimentConfig):
    if config.kind == "zne":
        return run_fig1_experiment(config)
    return run_fig2_experiment(config)
