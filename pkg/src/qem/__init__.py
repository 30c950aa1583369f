"""量子误差缓解实验室：零噪声外推与概率误差消除。"""

__version__ = "0.1.0"
