from collections import namedtuple

# 哈密顿量分段：持续时间与 (耦合系数, PauliString) 项
Segment = namedtuple("Segment", ["duration", "terms"])

# 外推结果
ZneResult = namedtuple(
    "ZneResult",
    ["extrapolated", "estimates", "errors", "plan", "rate"],
)

# 展开式诊断量：拟合系数 a_k、余项界 R_{n+1}、l_{n+1}、δ*、δ_j
ExpansionDiagnostics = namedtuple(
    "ExpansionDiagnostics",
    [
        "coefficients",
        "residual",
        "remainder_bound",
        "l_next",
        "delta_star",
        "node_errors",
    ],
    defaults=(None, None, 0.0, ()),
)

# 含噪基中的一个操作
BasisEntry = namedtuple("BasisEntry", ["token", "label", "ptm", "k"])

# 准概率项：操作记号与系数 η
QprTerm = namedtuple("QprTerm", ["token", "eta"])

# 线性规划无可行解
QprInfeasible = namedtuple("QprInfeasible", ["target", "residual", "message"])

# 采样得到的含噪线路
SampledCircuit = namedtuple("SampledCircuit", ["circuit", "sign", "probability"])

# 概率误差消除估计
PecEstimate = namedtuple(
    "PecEstimate",
    ["value", "gamma", "runs", "groups", "allocation", "standard_error"],
)

# 中位数投影观测量
MedianProjector = namedtuple(
    "MedianProjector", ["indices", "observable", "ideal_value"]
)
