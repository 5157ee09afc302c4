import functools
import logging
import sys
import time
import uuid
from typing import Callable

from src.utils.error_handler import EXIT_OK, ErrorHandler, LabError
from src.utils.logger import lab_logger

logger = logging.getLogger(__name__)


def handle_errors(func: Callable[..., int]) -> Callable[..., int]:
    """
    装饰器：统一错误处理，把异常映射为退出码并向 stderr 输出诊断
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs) -> int:
        try:
            result = func(*args, **kwargs)
            return EXIT_OK if result is None else result
        except LabError as e:
            logger.error(f"运行失败: {e.message}")
            lab_logger.log_error(e, func.__name__)
            print(ErrorHandler.get_user_message(e), file=sys.stderr)
            return e.exit_code
        except Exception as e:
            logger.exception(f"未预期的错误: {e}")
            lab_logger.log_error(e, func.__name__)
            print(ErrorHandler.get_user_message(e), file=sys.stderr)
            return ErrorHandler.exit_code_for(e)

    return wrapper


def log_experiment(action: str):
    """
    装饰器：记录一次实验运行（run_id、耗时、结果）
    """
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            run_id = uuid.uuid4().hex[:8]
            started = time.perf_counter()
            lab_logger.log_experiment(run_id, action, "开始")
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                lab_logger.log_experiment(run_id, action, f"失败: {e}")
                raise
            lab_logger.log_experiment(run_id, action, f"完成，用时 {time.perf_counter() - started:.2f}s")
            return result

        return wrapper
    return decorator
