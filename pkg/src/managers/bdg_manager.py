"""BdG 矩阵的组装、动力学矩阵与正交分量变换"""
import logging
import math
from typing import Callable, Dict, Optional, Sequence, Union

import numpy as np

from config import Config, Tolerances
from src.models.bdg import BlochBdg, PauliLikeMetrics, PrototypeModel, RealSpaceBdg, uniform_k_grid
from src.utils.error_handler import ConfigSchemaError, StructuralValidationError, ValidationError
from src.utils.memory_monitor import dense_stack_bytes, memory_monitor

logger = logging.getLogger(__name__)

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=complex)

MatrixFunc = Callable[[float], np.ndarray]


class BdgManager:
    """BdG 组装与变换"""

    @staticmethod
    def assemble_bdg(bloch: BlochBdg, k: float, tol: Optional[Tolerances] = None) -> np.ndarray:
        """H(k) = [[K(k), M(k)], [M*(−k), Kᵀ(−k)]]"""
        return BdgManager.assemble_at(bloch, bloch.index_of(k), tol)

    @staticmethod
    def assemble_at(bloch: BlochBdg, i: int, tol: Optional[Tolerances] = None) -> np.ndarray:
        """按网格下标组装 H(k_i)"""
        tol = tol or Config.tolerances()
        j = bloch.minus_index(i)
        K, M = bloch.K_of_k[i], bloch.M_of_k[i]
        k = float(bloch.k_grid[i])
        if np.max(np.abs(K - K.conj().T)) > tol.tol_herm:
            raise StructuralValidationError("K(k) 非厄米", k=k)
        if np.max(np.abs(bloch.M_of_k[j] - M.T)) > tol.tol_herm:
            raise StructuralValidationError("配对约束 M(−k)=Mᵀ(k) 被破坏", k=k)
        H = np.block([[K, M], [bloch.M_of_k[j].conj(), bloch.K_of_k[j].T]])
        return H

    @staticmethod
    def assemble_grid(bloch: BlochBdg, tol: Optional[Tolerances] = None) -> np.ndarray:
        """全部网格点的 H(k)，形状 (N_k, 2Ñ, 2Ñ)"""
        memory_monitor.check_allocation("H(k) 网格", dense_stack_bytes(bloch.n_k, 2 * bloch.n_modes))
        return np.stack([BdgManager.assemble_at(bloch, i, tol) for i in range(bloch.n_k)])

    @staticmethod
    def assemble_real_space(bdg: RealSpaceBdg, tol: Optional[Tolerances] = None) -> np.ndarray:
        """H = [[K, M], [M*, Kᵀ]]"""
        tol = tol or Config.tolerances()
        bdg.validate(tol.tol_herm)
        return np.block([[bdg.K_mat, bdg.M_mat], [bdg.M_mat.conj(), bdg.K_mat.T]])

    @staticmethod
    def dynamical_matrix(H: np.ndarray) -> np.ndarray:
        """H_τ = τ3 H"""
        H = BdgManager._check_square_even(H)
        metrics = PauliLikeMetrics.for_modes(H.shape[0] // 2)
        return metrics.tau3 @ H

    @staticmethod
    def dynamical_grid(H_grid: np.ndarray) -> np.ndarray:
        return np.stack([BdgManager.dynamical_matrix(H) for H in H_grid])

    @staticmethod
    def quadrature_form(H: np.ndarray) -> np.ndarray:
        """R = G H G†"""
        H = BdgManager._check_square_even(H)
        G = PauliLikeMetrics.for_modes(H.shape[0] // 2).G
        return G @ H @ G.conj().T

    @staticmethod
    def from_quadrature(R: np.ndarray) -> np.ndarray:
        """H = G† R G"""
        R = BdgManager._check_square_even(R)
        G = PauliLikeMetrics.for_modes(R.shape[0] // 2).G
        return G.conj().T @ R @ G

    @staticmethod
    def _check_square_even(H: np.ndarray) -> np.ndarray:
        H = np.asarray(H, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] % 2:
            raise ValidationError(f"需要 2Ñ×2Ñ 方阵，实际形状 {H.shape}")
        return H

    @staticmethod
    def build_bloch(n_modes: int, k_points: int, K_func: MatrixFunc, M_func: MatrixFunc,
                    label: str = "custom", tol: Optional[Tolerances] = None) -> BlochBdg:
        """在均匀网格上采样 K(k), M(k)"""
        tol = tol or Config.tolerances()
        if k_points < 1:
            raise ValidationError("k_points 必须 ≥ 1")
        grid = uniform_k_grid(k_points)
        K = np.stack([np.asarray(K_func(k), dtype=complex).reshape(n_modes, n_modes) for k in grid])
        M = np.stack([np.asarray(M_func(k), dtype=complex).reshape(n_modes, n_modes) for k in grid])
        bloch = BlochBdg(n_modes=n_modes, k_grid=grid, K_of_k=K, M_of_k=M, label=label)
        bloch.validate(tol.tol_herm)
        return bloch

    @staticmethod
    def build_prototype_bloch(mu: float, t1: float, t2: float, xi_abs: float = 0.0,
                              xi_phase: float = 0.0, k_points: int = Config.DEFAULT_K_POINTS) -> BlochBdg:
        """K(k) = μI + (t1 + t2 cos k)σ1 + t2 sin k σ2，M = ξσ3"""
        if t1 < 0 or t2 < 0 or xi_abs < 0:
            raise ValidationError("跃迁与 |ξ| 不能为负")
        if mu <= 0:
            raise ValidationError("μ 必须 > 0")
        mu_tilde_sq = mu ** 2 - xi_abs ** 2
        if mu_tilde_sq < (t1 + t2) ** 2:
            logger.warning(
                f"热力学稳定性条件 √(μ²−|ξ|²) ≥ t1+t2 不满足: "
                f"μ={mu}, |ξ|={xi_abs}, t1+t2={t1 + t2}"
            )
        xi = xi_abs * complex(math.cos(xi_phase), math.sin(xi_phase))

        def K_func(k: float) -> np.ndarray:
            return mu * SIGMA_0 + (t1 + t2 * math.cos(k)) * SIGMA_1 + t2 * math.sin(k) * SIGMA_2

        def M_func(k: float) -> np.ndarray:
            return xi * SIGMA_3

        return BdgManager.build_bloch(2, k_points, K_func, M_func, label="prototype")

    @staticmethod
    def build_from_model(model: PrototypeModel) -> BlochBdg:
        return BdgManager.build_prototype_bloch(
            model.mu, model.t1, model.t2, model.xi_abs, model.xi_phase, model.k_points
        )

    @staticmethod
    def build_from_blocks(K_blocks: Dict[int, np.ndarray], M_blocks: Dict[int, np.ndarray],
                          k_points: int = Config.DEFAULT_K_POINTS,
                          tol: Optional[Tolerances] = None) -> BlochBdg:
        """K(k) = Σ_R K_R e^{ikR}，M(k) = Σ_R M_R e^{ikR}"""
        if not K_blocks:
            raise ConfigSchemaError("K_blocks 不能为空")
        n_modes = next(iter(K_blocks.values())).shape[0]
        for blocks in (K_blocks, M_blocks):
            for R, block in blocks.items():
                if block.shape != (n_modes, n_modes):
                    raise ConfigSchemaError(f"R={R} 的块形状应为 {(n_modes, n_modes)}")

        def fourier(blocks: Dict[int, np.ndarray]) -> MatrixFunc:
            def evaluate(k: float) -> np.ndarray:
                total = np.zeros((n_modes, n_modes), dtype=complex)
                for R, block in blocks.items():
                    total += block * np.exp(1j * k * R)
                return total
            return evaluate

        return BdgManager.build_bloch(n_modes, k_points, fourier(K_blocks), fourier(M_blocks), tol=tol)

    @staticmethod
    def parse_complex_matrix(data: Union[Sequence, float], name: str = "matrix") -> np.ndarray:
        """解析 [[re, im], ...] 嵌套数组；实数元素也可直接给出"""
        try:
            rows = list(data)
        except TypeError as e:
            raise ConfigSchemaError(f"{name} 必须是二维数组") from e
        parsed = []
        for row in rows:
            if not isinstance(row, (list, tuple)):
                raise ConfigSchemaError(f"{name} 必须是二维数组")
            parsed_row = []
            for entry in row:
                if isinstance(entry, (list, tuple)):
                    if len(entry) != 2:
                        raise ConfigSchemaError(f"{name} 的复数元素必须为 [re, im]")
                    parsed_row.append(complex(float(entry[0]), float(entry[1])))
                elif isinstance(entry, (int, float)) and not isinstance(entry, bool):
                    parsed_row.append(complex(float(entry), 0.0))
                else:
                    raise ConfigSchemaError(f"{name} 含有无法解析的元素: {entry!r}")
            parsed.append(parsed_row)
        matrix = np.array(parsed, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ConfigSchemaError(f"{name} 必须是方阵，实际形状 {matrix.shape}")
        return matrix
