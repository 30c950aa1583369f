import logging
from typing import List

import numpy as np

logger = logging.getLogger(__name__)


class SequenceGenerator:
    """噪声放大节点序列生成器，序列均从 c_0 = 1 开始严格递增"""

    @staticmethod
    def bulirsch_stoer(n: int, base: float = 2.0) -> List[float]:
        """
        指数序列 c_j = base^j

        Args:
            n (int): 外推阶数，生成 n+1 个节点
            base (float): 公比，必须大于 1

        Returns:
            List[float]: 节点序列
        """
        if n < 0:
            raise ValueError("阶数不能为负")
        if base <= 1.0:
            raise ValueError("公比必须大于1")
        return [float(base**j) for j in range(n + 1)]

    @staticmethod
    def harmonic(n: int, eta: float = 1.0, q: float = 1.0) -> List[float]:
        """
        调和序列 c_j = ((j+η)/η)^q

        Args:
            n (int): 外推阶数
            eta (float): 偏移 η > 0
            q (float): 幂次 q > 0

        Returns:
            List[float]: 节点序列
        """
        if n < 0:
            raise ValueError("阶数不能为负")
        if eta <= 0 or q <= 0:
            raise ValueError("η 与 q 必须为正")
        return [float(((j + eta) / eta) ** q) for j in range(n + 1)]

    @staticmethod
    def random_partition(
        n: int,
        rng: np.random.Generator,
        c_max: float = 4.0,
        min_separation: float = 0.05,
        max_resamples: int = 100,
    ) -> List[float]:
        """
        在 (1, c_max] 中随机取 n 个点，排序后接在 1 之后

        Args:
            n (int): 外推阶数
            rng (np.random.Generator): 随机数流
            c_max (float): 区间右端点
            min_separation (float): 相邻节点的最小间距
            max_resamples (int): 最大重采样次数

        Returns:
            List[float]: 节点序列

        Raises:
            ValueError: 重采样次数用尽仍不满足间距要求
        """
        if n < 0:
            raise ValueError("阶数不能为负")
        if c_max <= 1.0:
            raise ValueError("c_max 必须大于1")
        for attempt in range(max_resamples + 1):
            # c_max − U[0, c_max−1) 落在 (1, c_max]
            points = np.sort(c_max - rng.uniform(0.0, c_max - 1.0, size=n))
            nodes = [1.0] + [float(p) for p in points]
            if SequenceGenerator.min_gap(nodes) >= min_separation:
                if attempt:
                    logger.warning(f"random partition accepted after {attempt} resamples")
                return nodes
        raise ValueError(
            f"{max_resamples} 次重采样后仍无法满足最小间距 {min_separation}"
        )

    @staticmethod
    def min_gap(nodes: List[float]) -> float:
        if len(nodes) < 2:
            return float("inf")
        return float(np.min(np.diff(nodes)))


# 使用示例
if __name__ == "__main__":
    print("节点序列生成器示例:")
    print("=" * 60)
    print(f"   Bulirsch-Stoer n=3: {SequenceGenerator.bulirsch_stoer(3)}")
    print(f"   调和序列 n=3: {SequenceGenerator.harmonic(3)}")
    demo_rng = np.random.default_rng(7)
    print(f"   随机划分 n=3: {SequenceGenerator.random_partition(3, demo_rng)}")
