import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from dynaconf import Dynaconf, ValidationError

from qem.core.channels import operation_ptm
from qem.core.circuit import format_circuit
from qem.core.errors import ConfigError, NumericalError
from qem.core.experiments import FIRST_LAYERS, ExperimentConfig, gen_clifford_t_circuit, run_experiment
from qem.core.gates import CLIFFORD_T_GATES
from qem.core.qpr import (
    build_damping_basis,
    build_depolarizing_basis,
    damping_gate_qpr_analytic,
    depolarizing_gate_qpr_analytic,
    export_qpr_text,
    solve_qpr_lp,
)
from qem.utils.rng_util import make_stream

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

# circuit gen 使用的随机流索引
CIRCUIT_GEN_STREAM = 4


def get_config_path(relative_path: str) -> Path:
    """优先使用当前目录下的 config，找不到时回退到项目根目录"""
    local = Path.cwd() / "config" / relative_path
    if local.exists():
        return local
    return Path(__file__).resolve().parents[2] / "config" / relative_path


class AppContext:

    def __init__(self):
        self.app_name = "量子误差缓解实验室"
        self.settings = None
        self.env = None


APP_CTX = AppContext()


def init_config(user_file: Optional[str] = None):
    settings_files = [str(get_config_path("default.yaml"))]
    if user_file:
        path = Path(user_file)
        if not path.exists():
            raise ConfigError(f"配置文件不存在: {user_file}")
        settings_files.append(str(path.resolve()))
    APP_CTX.settings = Dynaconf(
        settings_files=settings_files,
        envvar_prefix="QEM",  # 环境变量前缀。设置`QEM_SEED=7`，使用`settings.SEED`
        environments=True,  # 是否使用多环境
        env_switcher="QEM_ENV",  # 用于切换模式的环境变量名称 QEM_ENV=production
        merge_enabled=True,  # 用户配置与默认配置逐层合并
    )
    APP_CTX.env = os.getenv("QEM_ENV")


def clear_logger():
    # 清理已有 handlers
    root_logger = logging.getLogger()
    for h in list(root_logger.handlers):
        root_logger.removeHandler(h)


def init_logger():
    clear_logger()

    logging.basicConfig(
        format="%(asctime)s %(name)s:%(levelname)s: %(message)s",
        datefmt="%y-%m-%d %H:%M:%S",
    )
    logging.getLogger().setLevel(APP_CTX.settings.get("logger.level", "INFO"))


def print_app_config():
    logging.info("----------- Start application %s -----------", APP_CTX.app_name)
    logging.info("---- ENV: %s ", APP_CTX.env)


def init_app(user_file: Optional[str] = None):
    init_config(user_file)
    init_logger()
    print_app_config()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qem", description="零噪声外推与概率误差消除实验")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (("zne", "零噪声外推误差随噪声强度的标度实验"), ("pec", "随机 Clifford+T 线路上的概率误差消除实验")):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", help="YAML 配置文件，与 config/default.yaml 合并")
        sub.add_argument("--seed", type=int, help="覆盖配置中的主种子")
        sub.add_argument("--output", help="覆盖配置中的输出目录")

    qpr = commands.add_parser("qpr", help="单门准概率分解").add_subparsers(dest="qpr_command", required=True)
    solve = qpr.add_parser("solve", help="求解单个门的最优分解并输出 JSON")
    solve.add_argument("--gate", required=True, choices=CLIFFORD_T_GATES)
    solve.add_argument("--noise", required=True, choices=["depolarizing", "damping"])
    solve.add_argument("--epsilon", required=True, type=float)
    solve.add_argument("--backend", default="simplex", choices=["simplex", "scipy", "analytic"])
    solve.add_argument("--no-prep", action="store_true", help="不把含噪态制备加入候选操作")

    circuit = commands.add_parser("circuit", help="随机 Clifford+T 线路").add_subparsers(
        dest="circuit_command", required=True
    )
    gen = circuit.add_parser("gen", help="生成线路并以文本格式输出")
    gen.add_argument("--n", required=True, type=int)
    gen.add_argument("--depth", required=True, type=int)
    gen.add_argument("--seed", required=True, type=int)
    gen.add_argument("--first-layer", default="single", choices=FIRST_LAYERS)
    return parser


def qpr_solve(gate: str, noise: str, epsilon: float, backend: str = "simplex", with_prep: bool = True) -> str:
    """
    求解单门分解，返回 JSON 文本

    振幅阻尼下的 CNOT 在门族内没有可行解，输出的是带 𝒫_{|0⟩} 合并标记的解析分解。
    """
    if not 0.0 <= epsilon < 1.0:
        raise ConfigError(f"噪声强度 ε 必须位于 [0, 1)，当前为 {epsilon}")
    if noise == "damping" and gate == "CNOT":
        return export_qpr_text(damping_gate_qpr_analytic("cnot", epsilon))
    if backend == "analytic":
        if noise == "depolarizing":
            return export_qpr_text(depolarizing_gate_qpr_analytic(gate, epsilon))
        return export_qpr_text(damping_gate_qpr_analytic("single_qubit", epsilon, gate))
    basis = (build_depolarizing_basis if noise == "depolarizing" else build_damping_basis)(epsilon, (gate,))
    candidates = basis.candidates(gate) if with_prep else basis.family(gate)
    result = solve_qpr_lp(operation_ptm(gate), candidates, backend, target_label=gate)
    return export_qpr_text(result, {entry.token: entry.label for entry in candidates})


def run_command(args: argparse.Namespace) -> int:
    if args.command in ("zne", "pec"):
        init_app(args.config)
        if args.output:
            APP_CTX.settings.set("output", args.output)
        config = ExperimentConfig.from_settings(APP_CTX.settings, args.command, args.seed)
        run_experiment(config)
        return EXIT_OK

    init_app()
    if args.command == "qpr":
        print(qpr_solve(args.gate, args.noise, args.epsilon, args.backend, not args.no_prep))
    else:
        rng = make_stream(args.seed, CIRCUIT_GEN_STREAM, 0)
        print(format_circuit(gen_clifford_t_circuit(rng, args.n, args.depth, args.first_layer)))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run_command(args)
    except (ValidationError, ConfigError) as e:
        logging.error(f"configuration error: {e}")
        return EXIT_CONFIG
    except NumericalError as e:
        logging.error(f"numerical failure: {e}")
        return EXIT_NUMERICAL
    except Exception:
        logging.exception("unexpected failure")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
