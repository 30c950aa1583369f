class QemError(Exception):
    """实验室自定义异常的基类"""


class ConfigError(QemError, ValueError):
    """配置项缺失或取值不合法"""


class NumericalError(QemError, ArithmeticError):
    """数值计算失败（病态方程、积分漂移等）"""


class SingularSystemError(NumericalError):
    """Richardson 方程组接近奇异"""


class IntegrationError(NumericalError):
    """主方程积分的迹漂移超出容差"""

    def __init__(self, message: str, segment_index: int):
        super().__init__(f"{message} (segment {segment_index})")
        self.segment_index = segment_index


class QprShapeError(QemError, ValueError):
    """线路结构不满足振幅阻尼准概率分解的前提"""
