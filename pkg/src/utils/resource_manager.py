"""
资源管理器
用于在 k 点、无序样本与频率分块之间分配线程，线程数受 BOSOTOP_THREADS 限制
"""
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Iterable, List, Optional, TypeVar

from config import Config

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


class ResourceManager:
    """资源管理器，负责线程上限与操作统计"""

    def __init__(self, max_workers: Optional[int] = None):
        self._max_workers = max_workers
        self._lock = threading.Lock()

        # 操作统计
        self._concurrent_operations = 0
        self._total_operations = 0
        self._error_operations = 0

    @property
    def max_workers(self) -> int:
        return self._max_workers or Config.get_threads()

    def set_max_workers(self, max_workers: Optional[int]) -> None:
        """覆盖线程上限（None 表示回到环境变量）"""
        self._max_workers = max_workers

    def acquire_operation_slot(self) -> None:
        with self._lock:
            self._concurrent_operations += 1
            self._total_operations += 1

    def release_operation_slot(self, success: bool = True) -> None:
        with self._lock:
            if self._concurrent_operations > 0:
                self._concurrent_operations -= 1
            if not success:
                self._error_operations += 1

    def map_ordered(self, func: Callable[[T], R], items: Iterable[T],
                    operation_name: str = "unknown") -> List[R]:
        """并行执行相互独立的任务，结果按输入顺序返回

        任一任务抛出异常时，按输入顺序中第一个失败的异常重新抛出。
        """
        items = list(items)
        workers = min(self.max_workers, max(1, len(items)))

        def run(item: T) -> R:
            with OperationContext(operation_name, self):
                return func(item)

        if workers == 1:
            return [run(item) for item in items]

        logger.debug(f"{operation_name}: {len(items)} 个任务, {workers} 个线程")
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(run, item) for item in items]
            # 按提交顺序收集，归约顺序与线程数无关
            return [future.result() for future in futures]

    def get_stats(self) -> Dict[str, Any]:
        """获取资源使用统计"""
        return {
            'concurrent_operations': self._concurrent_operations,
            'max_workers': self.max_workers,
            'total_operations': self._total_operations,
            'error_operations': self._error_operations,
        }


# 全局资源管理器实例
resource_manager = ResourceManager()


class OperationContext:
    """操作上下文管理器，自动维护计数"""

    def __init__(self, operation_name: str = "unknown", manager: Optional[ResourceManager] = None):
        self.operation_name = operation_name
        self.manager = manager or resource_manager
        self.success = True

    def __enter__(self):
        self.manager.acquire_operation_slot()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.success = exc_type is None
        self.manager.release_operation_slot(self.success)
        if exc_type is not None:
            logger.debug(f"操作 {self.operation_name} 执行失败: {exc_val}")


def get_resource_status() -> str:
    """获取资源状态字符串"""
    stats = resource_manager.get_stats()
    return (f"线程上限: {stats['max_workers']}, "
            f"总操作数: {stats['total_operations']}, "
            f"错误数: {stats['error_operations']}")
