import logging
from typing import Optional

from src.utils.logger import lab_logger

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


class LabError(Exception):
    """数值实验基础异常类"""
    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, user_message: Optional[str] = None):
        self.message = message
        self.user_message = user_message or "运行失败，请检查配置与参数"
        super().__init__(self.message)


# ---------- 校验类错误（退出码 1） ----------

class ValidationError(LabError):
    """输入校验失败"""
    exit_code = EXIT_VALIDATION

    def __init__(self, detail: str):
        super().__init__(f"校验失败: {detail}", "输入无效，请检查配置")


class ConfigSchemaError(ValidationError):
    """配置文件不符合严格模式"""

    def __init__(self, detail: str):
        super().__init__(f"配置无效: {detail}")


class StructuralValidationError(ValidationError):
    """BdG 结构约束（厄米性、配对约束等）被破坏"""

    def __init__(self, detail: str, k: Optional[float] = None):
        self.k = k
        where = f" (k={k:.6f})" if k is not None else ""
        super().__init__(f"{detail}{where}")


class PreconditionError(ValidationError):
    """操作前置条件不满足"""


class SymmetryValidationError(ValidationError):
    """对称操作本身不合法（非幺正、非对合等）"""


class NotPositiveDefiniteError(ValidationError):
    """矩阵非正定"""

    def __init__(self, min_eig: float):
        self.min_eig = min_eig
        super().__init__(
            f"H 非正定 (最小本征值 {min_eig:.3e})，请先调用 regularize_semidefinite"
        )


# ---------- 数值分辨类错误（退出码 2） ----------

class NumericalResolutionError(LabError):
    """数值分辨不足或交叉校验失败"""
    exit_code = EXIT_NUMERICAL

    def __init__(self, detail: str, user_message: Optional[str] = None):
        super().__init__(
            f"数值分辨失败: {detail}",
            user_message or "数值精度不足，请加密网格或调整参数"
        )


class GapClosedError(NumericalResolutionError):
    """能隙闭合"""

    def __init__(self, detail: str, k: Optional[float] = None):
        self.k = k
        where = f" (k={k:.6f})" if k is not None else ""
        super().__init__(f"能隙闭合: {detail}{where}", "能隙闭合，拓扑数无定义；可先正则化或远离临界点")


class BandCrossingError(NumericalResolutionError):
    """能带交叉"""

    def __init__(self, detail: str):
        super().__init__(f"能带交叉: {detail}")


class ResolutionError(NumericalResolutionError):
    """谱峰无法分辨"""

    def __init__(self, detail: str):
        super().__init__(detail, "共振峰无法分辨，请减小 κ 或增大 L")


class DelocalizedEdgeError(NumericalResolutionError):
    """边缘模不衰减"""

    def __init__(self, product: float):
        super().__init__(f"边缘模振幅乘积 {product:.3e} ≥ 1，边缘模去局域化")


class CrossCheckError(NumericalResolutionError):
    """两条独立计算路径不一致"""

    def __init__(self, what: str, deviation: float, tolerance: float):
        self.deviation = deviation
        super().__init__(f"{what} 交叉校验偏差 {deviation:.3e} > {tolerance:.1e}")


class ErrorHandler:
    """错误处理器"""

    @staticmethod
    def exit_code_for(error: BaseException) -> int:
        """获取异常对应的退出码"""
        if isinstance(error, LabError):
            return error.exit_code
        return EXIT_VALIDATION

    @staticmethod
    def get_user_message(error: BaseException) -> str:
        """获取用户友好的错误消息"""
        if isinstance(error, LabError):
            return f"{error.user_message}\n{error.message}"
        return f"运行失败: {error}"

    @staticmethod
    def handle_config_error(source: str, error: Exception) -> None:
        """处理配置读取错误"""
        lab_logger.log_error(error, f"Config source: {source}")
        logger.error(f"读取配置失败: {source}, 错误: {error}")
        raise ConfigSchemaError(f"{source}: {error}") from error

    @staticmethod
    def handle_linalg_error(operation: str, error: Exception) -> None:
        """处理 LAPACK 层面的失败"""
        lab_logger.log_error(error, f"Linear algebra: {operation}")
        logger.error(f"线性代数运算失败: {operation}, 错误: {error}")
        raise NumericalResolutionError(f"{operation}: {error}") from error
