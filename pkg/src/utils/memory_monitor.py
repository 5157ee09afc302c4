"""
内存监控工具

k 网格上的 H(k) 堆叠与无序系综的谱矩阵是主要的内存占用；
分配前用 check_allocation 估算，运行期间由后台线程采样进程 RSS。
"""
import gc
import logging
import threading
from typing import Optional

import psutil

logger = logging.getLogger(__name__)

COMPLEX_BYTES = 16  # complex128


def dense_stack_bytes(count: int, dim: int, itemsize: int = COMPLEX_BYTES) -> int:
    """count 个 dim×dim 稠密矩阵的字节数"""
    return int(count) * int(dim) ** 2 * itemsize


class MemoryMonitor:
    """进程内存采样与分配估算"""

    def __init__(self, warning_threshold: float = 80.0, critical_threshold: float = 90.0,
                 allocation_fraction: float = 0.5):
        self.warning_threshold = warning_threshold  # 系统使用率 (%)
        self.critical_threshold = critical_threshold
        # 单次分配超过可用内存的该比例时告警
        self.allocation_fraction = allocation_fraction
        self.peak_rss = 0
        self.level = 'ok'
        self._stop_event = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def sample(self) -> dict:
        memory = psutil.virtual_memory()
        rss = psutil.Process().memory_info().rss
        self.peak_rss = max(self.peak_rss, rss)
        return {'available': memory.available, 'percentage': memory.percent, 'process_rss': rss}

    def check_memory(self) -> str:
        """采样一次，返回 ok / warning / critical；级别变化时记录日志"""
        info = self.sample()
        percent = info['percentage']
        if percent >= self.critical_threshold:
            level = 'critical'
        elif percent >= self.warning_threshold:
            level = 'warning'
        else:
            level = 'ok'

        if level != self.level:
            if level == 'critical':
                logger.critical(f"内存使用率 {percent:.1f}%，进程占用 {info['process_rss'] / 1024**2:.0f}MB")
                gc.collect()
            elif level == 'warning':
                logger.warning(f"内存使用率较高: {percent:.1f}%")
            else:
                logger.info(f"内存使用率恢复: {percent:.1f}%")
        self.level = level
        return level

    def check_allocation(self, label: str, nbytes: int) -> bool:
        """估算的分配量是否在可用内存的 allocation_fraction 以内"""
        available = psutil.virtual_memory().available
        if nbytes > self.allocation_fraction * available:
            logger.warning(
                f"{label}: 预计分配 {nbytes / 1024**2:.0f}MB，"
                f"可用 {available / 1024**2:.0f}MB，考虑减少 k 点或样本数"
            )
            return False
        return True

    def start_monitoring(self, interval: float = 5.0) -> None:
        if self._thread and self._thread.is_alive():
            return
        self._stop_event.clear()
        self._thread = threading.Thread(target=self._loop, args=(interval,), daemon=True)
        self._thread.start()
        logger.debug(f"内存监控已启动，间隔 {interval}秒")

    def stop_monitoring(self) -> None:
        self._stop_event.set()
        if self._thread:
            self._thread.join(timeout=5)
            self._thread = None

    def _loop(self, interval: float) -> None:
        while not self._stop_event.is_set():
            try:
                self.check_memory()
            except Exception as e:
                logger.error(f"内存监控异常: {e}")
            self._stop_event.wait(interval)


# 全局内存监控实例
memory_monitor = MemoryMonitor()


def init_memory_monitor(interval: float = 5.0) -> None:
    """重置峰值并启动后台采样"""
    memory_monitor.peak_rss = 0
    memory_monitor.level = 'ok'
    memory_monitor.start_monitoring(interval)


def get_memory_status() -> str:
    info = memory_monitor.sample()
    return (f"内存使用率: {info['percentage']:.1f}%, "
            f"进程占用: {info['process_rss'] / 1024**2:.0f}MB, "
            f"峰值: {memory_monitor.peak_rss / 1024**2:.0f}MB")
