import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Union

import numpy as np

logger = logging.getLogger(__name__)


class StreamFactory:
    """
    计数器式可拆分随机数流

    同一主种子与同一索引元组总是得到相同的 Philox 流，不同索引的流互相独立，
    与并行方式和调用顺序无关。
    """

    def __init__(self, master_seed: int, prefix: tuple = ()):
        if master_seed < 0:
            raise ValueError("主种子不能为负")
        self.master_seed = int(master_seed)
        self.prefix = tuple(int(i) for i in prefix)

    def stream(self, *index: int) -> np.random.Generator:
        spawn_key = self.prefix + tuple(int(i) for i in index)
        if any(i < 0 for i in spawn_key):
            raise ValueError(f"流索引不能为负: {spawn_key}")
        sequence = np.random.SeedSequence(self.master_seed, spawn_key=spawn_key)
        return np.random.Generator(np.random.Philox(sequence))

    def child(self, *prefix: int) -> "StreamFactory":
        return StreamFactory(self.master_seed, self.prefix + tuple(prefix))

    def __repr__(self) -> str:
        return f"StreamFactory(seed={self.master_seed}, prefix={self.prefix})"


def make_stream(master_seed: int, *index: int) -> np.random.Generator:
    return StreamFactory(master_seed).stream(*index)


def as_stream_factory(seed: Union[int, StreamFactory, np.random.Generator, None]) -> StreamFactory:
    if isinstance(seed, StreamFactory):
        return seed
    if isinstance(seed, np.random.Generator):
        return StreamFactory(int(seed.integers(2**63)))
    if seed is None:
        # 未指定种子时从系统熵取一个，并记录下来以便复现
        seed = int(np.random.SeedSequence().entropy % (2**63))
        logger.info(f"no seed given, using entropy seed {seed}")
    return StreamFactory(int(seed))


def ordered_map(func: Callable, items: Iterable, workers: Optional[int] = 1) -> List:
    """
    保序映射，workers > 1 时使用线程池

    结果顺序与输入一致，每个任务的随机流应由任务索引决定。
    """
    items = list(items)
    if not workers or workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
