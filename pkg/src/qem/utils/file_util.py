import json
import logging
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from qem.utils.time_util import TimestampConverter

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"无法序列化类型 {type(value).__name__}")


def to_json(data, indent: int = 2) -> str:
    """序列化为 JSON 文本，保留中文，numpy 标量与数组转为内置类型"""
    return json.dumps(data, indent=indent, ensure_ascii=False, default=_json_default)


def ensure_directory(path: PathLike) -> Path:
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


class ResultWriter:
    """
    实验结果输出目录

    每张结果表写成 CSV（首行为列名），可选地为数值表附带一个 gnuplot 绘图脚本；
    运行参数与起止时间写入 metadata.json。
    """

    def __init__(self, output_dir: PathLike, gnuplot: bool = True):
        """
        Args:
            output_dir: 输出目录，不存在时创建
            gnuplot (bool): 是否生成 gnuplot 脚本
        """
        self.output_dir = ensure_directory(output_dir)
        self.gnuplot = gnuplot

    def write_table(self, name: str, rows: Union[pd.DataFrame, Iterable[Mapping]], columns: Optional[Sequence[str]] = None) -> Path:
        """
        写出一张 CSV 表

        Args:
            name (str): 文件名（不含扩展名）
            rows: DataFrame 或字典序列
            columns (Sequence[str], optional): 列顺序

        Returns:
            Path: 写出的文件路径
        """
        frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=columns)
        if columns is not None:
            frame = frame.loc[:, list(columns)]
        path = self.output_dir / f"{name}.csv"
        frame.to_csv(path, index=False, float_format="%.12g")
        logger.info(f"wrote {len(frame)} rows to {path}")
        return path

    def write_gnuplot(self, name: str, csv_name: str, x: str, series: Sequence[str], logscale: str = "", title: str = "") -> Optional[Path]:
        """
        生成对 CSV 列作图的 gnuplot 脚本，未开启时返回 None
        """
        if not self.gnuplot:
            return None
        header = pd.read_csv(self.output_dir / f"{csv_name}.csv", nrows=0).columns.tolist()
        x_col = header.index(x) + 1
        plots = [
            f"'{csv_name}.csv' using {x_col}:{header.index(s) + 1} with linespoints title '{s}'"
            for s in series
        ]
        lines = [
            "set datafile separator ','",
            "set key autotitle columnhead",
            "set terminal pngcairo size 900,600",
            f"set output '{name}.png'",
            f"set xlabel '{x}'",
        ]
        if title:
            lines.append(f"set title '{title}'")
        if logscale:
            lines.append(f"set logscale {logscale}")
        lines.append("plot " + ", \\\n     ".join(plots))
        path = self.output_dir / f"{name}.gp"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.debug(f"wrote gnuplot script {path}")
        return path

    def write_metadata(self, metadata: Mapping, started: float, finished: float) -> Path:
        payload = dict(metadata)
        payload["started"] = TimestampConverter.format_timestamp(started, "iso", timezone="UTC")
        payload["finished"] = TimestampConverter.format_timestamp(finished, "iso", timezone="UTC")
        path = self.output_dir / "metadata.json"
        path.write_text(to_json(payload), encoding="utf-8")
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.output_dir / name
        path.write_text(text, encoding="utf-8")
        return path
