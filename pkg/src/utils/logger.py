"""日志配置：控制台 + 轮转文件，另有 experiment / error 两个独立记录器"""
import logging
import logging.handlers
import os
import sys
from typing import Optional

from config import Config

MB = 1024 * 1024

ROOT_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
EXPERIMENT_FORMAT = '%(asctime)s - RUN:%(run_id)s - EXPERIMENT:%(experiment)s - %(message)s'
ERROR_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'


class RunContextFilter(logging.Filter):
    """缺少 run_id / experiment 字段的记录补上占位符"""

    def filter(self, record: logging.LogRecord) -> bool:
        for key in ('run_id', 'experiment'):
            if not hasattr(record, key):
                setattr(record, key, '-')
        return True


def _resolve_level(level: Optional[str]) -> int:
    value = logging.getLevelName((level or Config.LOG_LEVEL).upper())
    return value if isinstance(value, int) else logging.INFO


class LabLogger:
    """实验日志管理器（单例）"""

    _instance = None
    _initialized = False

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(LabLogger, cls).__new__(cls)
        return cls._instance

    def setup(self, logs_dir: Optional[str] = None, level: Optional[str] = None) -> None:
        """首次调用安装处理器；之后的调用只调整级别"""
        if LabLogger._initialized:
            self.set_level(level)
            return
        self.logs_dir = logs_dir or Config.LOGS_DIR
        os.makedirs(self.logs_dir, exist_ok=True)

        root = logging.getLogger()
        for handler in list(root.handlers):
            root.removeHandler(handler)
        # stdout 只输出结果路径
        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(logging.Formatter(ROOT_FORMAT))
        root.addHandler(console)
        root.addHandler(self._rotating(os.path.basename(Config.LOG_FILE), 10 * MB, 5, ROOT_FORMAT))

        experiment = logging.getLogger('experiment')
        experiment.setLevel(logging.INFO)
        handler = self._rotating('experiment.log', 5 * MB, 3, EXPERIMENT_FORMAT)
        handler.addFilter(RunContextFilter())
        experiment.addHandler(handler)
        experiment.propagate = False

        error = logging.getLogger('error')
        error.setLevel(logging.ERROR)
        error.addHandler(self._rotating('error.log', 5 * MB, 3, ERROR_FORMAT))
        error.propagate = False

        LabLogger._initialized = True
        self.set_level(level)

    def _rotating(self, filename: str, max_bytes: int, backups: int, fmt: str) -> logging.Handler:
        handler = logging.handlers.RotatingFileHandler(
            os.path.join(self.logs_dir, filename), maxBytes=max_bytes, backupCount=backups, encoding='utf-8'
        )
        handler.setFormatter(logging.Formatter(fmt))
        return handler

    @staticmethod
    def set_level(level: Optional[str]) -> None:
        """根记录器与其处理器的级别（--log-level / LOG_LEVEL）"""
        resolved = _resolve_level(level)
        root = logging.getLogger()
        root.setLevel(resolved)
        for handler in root.handlers:
            handler.setLevel(resolved)

    @staticmethod
    def log_experiment(run_id: str, experiment: str, details: str = ""):
        logging.getLogger('experiment').info(details, extra={'run_id': run_id, 'experiment': experiment})

    @staticmethod
    def log_error(error: BaseException, context: str = ""):
        logging.getLogger('error').error(f"{context}: {error}", exc_info=error)


# 全局日志管理器实例
lab_logger = LabLogger()
