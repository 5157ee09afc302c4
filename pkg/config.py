import os
import logging
from dataclasses import dataclass, fields, replace
from typing import Any, Dict, List, Optional

# 日志配置
logging.basicConfig(
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    level=logging.INFO
)
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Tolerances:
    """数值容差集合（全部为绝对值，tol_pd / tol_gap 相对于 ‖H‖）"""
    tol_herm: float = 1e-10
    tol_pd: float = 1e-12
    tol_pu: float = 1e-10
    tol_eig: float = 1e-10
    tol_cross: float = 1e-8
    tol_sym: float = 1e-9
    tol_wind: float = 1e-6
    tol_gap: float = 1e-8
    tol_env: float = 1e-3
    tol_spec: float = 1e-8
    threshold_ratio: float = 2.0

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> Dict[str, float]:
        """转换为字典"""
        return {name: getattr(self, name) for name in self.field_names()}


class Config:
    """应用配置类"""

    # 并发配置
    THREADS = os.getenv('BOSOTOP_THREADS', '')

    # 日志级别
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')

    # 数据目录
    DATA_DIR = os.getenv('BOSOTOP_DATA_DIR', os.path.join(os.path.dirname(__file__), 'data'))
    OUTPUT_DIR = os.path.join(DATA_DIR, 'runs')
    PRESETS_DIR = os.path.join(os.path.dirname(__file__), 'presets')

    # 日志配置
    LOGS_DIR = os.path.join(DATA_DIR, 'logs')
    LOG_FILE = os.path.join(LOGS_DIR, 'bosotop.log')

    # 模型与实验默认值
    DEFAULT_K_POINTS = 200
    DEFAULT_KAPPA_FACTOR = 0.006      # κ = 0.006·t1
    DEFAULT_OMEGA_POINTS = 4000
    DEFAULT_OMEGA_MARGIN = 20.0       # 以 κ 为单位
    DEFAULT_SAMPLES = 100
    DEFAULT_DISORDER_FACTORS = (0.0, 0.1, 0.2, 0.3)
    DEFAULT_SEED = 0

    DEFAULT_TOLERANCES = Tolerances()

    @classmethod
    def get_threads(cls) -> int:
        """获取并行线程上限"""
        if not cls.THREADS:
            return max(1, os.cpu_count() or 1)
        try:
            return max(1, int(cls.THREADS))
        except ValueError as e:
            logger.error(f"BOSOTOP_THREADS 格式错误: {e}")
            return 1

    @classmethod
    def tolerances(cls, overrides: Optional[Dict[str, Any]] = None) -> Tolerances:
        """获取容差，可按键覆盖；未知键抛出 ConfigSchemaError"""
        if not overrides:
            return cls.DEFAULT_TOLERANCES

        from src.utils.error_handler import ConfigSchemaError

        unknown = sorted(set(overrides) - set(Tolerances.field_names()))
        if unknown:
            raise ConfigSchemaError(f"未知的容差键: {', '.join(unknown)}")
        values = {}
        for key, value in overrides.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
                raise ConfigSchemaError(f"容差 {key} 必须为正数")
            values[key] = float(value)
        return replace(cls.DEFAULT_TOLERANCES, **values)

    @classmethod
    def validate_config(cls) -> bool:
        """验证配置是否有效"""
        if cls.THREADS:
            try:
                if int(cls.THREADS) < 1:
                    logger.error("BOSOTOP_THREADS 必须 ≥ 1")
                    return False
            except ValueError:
                logger.error(f"BOSOTOP_THREADS 不是整数: {cls.THREADS}")
                return False

        if logging.getLevelName(cls.LOG_LEVEL.upper()) not in (
            logging.DEBUG, logging.INFO, logging.WARNING, logging.ERROR, logging.CRITICAL
        ):
            logger.error(f"无效的日志级别: {cls.LOG_LEVEL}")
            return False

        # 检查数据目录与日志目录
        for directory in (cls.DATA_DIR, cls.LOGS_DIR):
            if not os.path.exists(directory):
                try:
                    os.makedirs(directory, exist_ok=True)
                    logger.info(f"创建目录: {directory}")
                except Exception as e:
                    logger.error(f"创建目录失败: {e}")
                    return False

        logger.info("配置验证通过")
        return True
