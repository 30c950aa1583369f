import datetime
import logging
import time
from typing import Optional, Union

from dateutil import tz

logger = logging.getLogger(__name__)


class TimestampConverter:
    """时间戳转换工具类"""

    @staticmethod
    def timestamp_to_datetime(timestamp: Union[int, float], timezone: Optional[str] = None) -> datetime.datetime:
        """
        将秒级时间戳转换为 datetime 对象

        Args:
            timestamp (Union[int, float]): 时间戳
            timezone (str, optional): 时区，如 "UTC", "Asia/Shanghai"；为空时使用本地时区

        Returns:
            datetime.datetime: 带时区信息的 datetime
        """
        dt = datetime.datetime.fromtimestamp(float(timestamp), tz=tz.tzlocal())
        if timezone:
            tz_info = tz.gettz(timezone)
            if tz_info:
                dt = dt.astimezone(tz_info)
            else:
                logger.warning(f"unknown timezone '{timezone}', using local time")
        return dt

    @staticmethod
    def format_timestamp(timestamp: Union[int, float], format_style: str = "standard", timezone: Optional[str] = None) -> str:
        """
        Args:
            timestamp (Union[int, float]): 时间戳
            format_style (str): "standard" | "short" | "iso" | "compact"
            timezone (str, optional): 时区

        Returns:
            str: 格式化后的时间字符串
        """
        dt = TimestampConverter.timestamp_to_datetime(timestamp, timezone)
        if format_style == "short":
            return dt.strftime("%Y-%m-%d")
        elif format_style == "iso":
            return dt.isoformat()
        elif format_style == "compact":
            # 用作输出目录名
            return dt.strftime("%Y%m%d-%H%M%S")
        return dt.strftime("%Y-%m-%d %H:%M:%S")


class TimeDurationFormatter:
    """时长格式化工具类"""

    @staticmethod
    def seconds_to_hms(total_seconds: float):
        if not isinstance(total_seconds, (int, float)):
            raise ValueError("输入必须是数字类型")
        total_seconds = max(float(total_seconds), 0.0)
        hours = int(total_seconds // 3600)
        minutes = int((total_seconds % 3600) // 60)
        seconds = total_seconds % 60
        return hours, minutes, seconds

    @staticmethod
    def format_duration(total_seconds: float, style: str = "colon") -> str:
        """
        将秒数格式化为可读的时长字符串

        Args:
            total_seconds (float): 总秒数
            style (str): "colon" 为 HH:MM:SS.s，"text_short" 为 Xh Ym Z.Zs

        Returns:
            str: 时长字符串
        """
        hours, minutes, seconds = TimeDurationFormatter.seconds_to_hms(total_seconds)
        if style == "text_short":
            parts = []
            if hours > 0:
                parts.append(f"{hours}h")
            if minutes > 0:
                parts.append(f"{minutes}m")
            parts.append(f"{seconds:.1f}s")
            return " ".join(parts)
        return f"{hours:02d}:{minutes:02d}:{seconds:04.1f}"


class Stopwatch:
    """
    计时器，配合 with 使用

    Example:
        with Stopwatch("fig1") as watch:
            ...
        watch.elapsed
    """

    def __init__(self, label: str = ""):
        self.label = label
        self.started = None
        self.finished = None

    def __enter__(self) -> "Stopwatch":
        self.started = time.time()
        self._perf = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.finished = time.time()
        self.elapsed = time.perf_counter() - self._perf
        logger.info(f"{self.label or 'task'} finished in {TimeDurationFormatter.format_duration(self.elapsed, 'text_short')}")
        return False


if __name__ == "__main__":
    now = time.time()
    print(f"本地时间: {TimestampConverter.format_timestamp(now)}")
    print(f"UTC时间: {TimestampConverter.format_timestamp(now, 'iso', 'UTC')}")
    print(f"时长: {TimeDurationFormatter.format_duration(3725.5)}")
