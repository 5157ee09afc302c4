"""Nambu 形式下二次玻色哈密顿量的数据模型"""
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np

from config import Config
from src.utils.error_handler import StructuralValidationError


def _frozen(array, dtype=complex) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


class Boundary(Enum):
    """边界条件"""
    OPEN = "open"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class PauliLikeMetrics:
    """Nambu 空间中的 τ 矩阵与正交分量变换 G"""
    n_modes: int
    tau1: np.ndarray
    tau2: np.ndarray
    tau3: np.ndarray
    G: np.ndarray

    @property
    def symplectic_form(self) -> np.ndarray:
        """iτ2 = [[0, I], [−I, 0]]（x…, p… 排序）"""
        return (1j * self.tau2).real

    @classmethod
    def for_modes(cls, n_modes: int) -> 'PauliLikeMetrics':
        return _metrics(int(n_modes))


@lru_cache(maxsize=64)
def _metrics(n: int) -> PauliLikeMetrics:
    eye = np.eye(n)
    zero = np.zeros((n, n))
    tau3 = np.block([[eye, zero], [zero, -eye]]).astype(complex)
    tau2 = np.block([[zero, -1j * eye], [1j * eye, zero]])
    tau1 = 1j * tau3 @ tau2
    G = np.block([[eye, eye], [-1j * eye, 1j * eye]]) / math.sqrt(2.0)
    return PauliLikeMetrics(
        n_modes=n,
        tau1=_frozen(tau1),
        tau2=_frozen(tau2),
        tau3=_frozen(tau3),
        G=_frozen(G),
    )


def uniform_k_grid(k_points: int) -> np.ndarray:
    """[0, 2π) 上的均匀网格，−k_i 对应下标 (N−i) mod N"""
    return 2.0 * np.pi * np.arange(k_points) / k_points


@dataclass(frozen=True)
class BlochBdg:
    """动量空间 BdG：K(k), M(k) 存为 (N_k, Ñ, Ñ) 数组"""
    n_modes: int
    k_grid: np.ndarray
    K_of_k: np.ndarray
    M_of_k: np.ndarray
    regularization: float = 0.0
    label: str = "custom"

    def __post_init__(self):
        k_grid = _frozen(self.k_grid, dtype=float)
        K = _frozen(self.K_of_k)
        M = _frozen(self.M_of_k)
        n_k = k_grid.shape[0]
        if n_k < 1:
            raise StructuralValidationError("k 网格为空")
        expected = (n_k, self.n_modes, self.n_modes)
        if K.shape != expected or M.shape != expected:
            raise StructuralValidationError(
                f"K/M 形状应为 {expected}，实际 {K.shape} / {M.shape}"
            )
        if not np.allclose(k_grid, uniform_k_grid(n_k), rtol=0.0, atol=1e-12):
            raise StructuralValidationError("k 网格必须是 [0, 2π) 上的均匀网格，以保证 ±k 配对")
        object.__setattr__(self, 'k_grid', k_grid)
        object.__setattr__(self, 'K_of_k', K)
        object.__setattr__(self, 'M_of_k', M)

    @property
    def n_k(self) -> int:
        return self.k_grid.shape[0]

    def minus_index(self, i: int) -> int:
        """−k_i 在网格中的下标"""
        return (-i) % self.n_k

    def index_of(self, k: float) -> int:
        """动量值对应的网格下标"""
        folded = float(k) % (2.0 * np.pi)
        i = int(round(folded * self.n_k / (2.0 * np.pi))) % self.n_k
        delta = abs(folded - self.k_grid[i])
        delta = min(delta, 2.0 * np.pi - delta)
        if delta > 1e-9:
            raise StructuralValidationError("动量不在网格上", k=float(k))
        return i

    def validate(self, tol_herm: float) -> None:
        """检查 K 厄米与配对约束 M(−k) = Mᵀ(k)"""
        for i in range(self.n_k):
            K = self.K_of_k[i]
            if np.max(np.abs(K - K.conj().T)) > tol_herm:
                raise StructuralValidationError("K(k) 非厄米", k=float(self.k_grid[i]))
            M_minus = self.M_of_k[self.minus_index(i)]
            if np.max(np.abs(M_minus - self.M_of_k[i].T)) > tol_herm:
                raise StructuralValidationError("配对约束 M(−k)=Mᵀ(k) 被破坏", k=float(self.k_grid[i]))

    def regularized(self, delta: float) -> 'BlochBdg':
        """H(k) → H(k) + ΔI，Δ 记录在 regularization 中"""
        eye = np.eye(self.n_modes)
        return BlochBdg(
            n_modes=self.n_modes,
            k_grid=self.k_grid,
            K_of_k=self.K_of_k + delta * eye[None, :, :],
            M_of_k=self.M_of_k,
            regularization=self.regularization + delta,
            label=self.label,
        )


@dataclass(frozen=True)
class RealSpaceBdg:
    """实空间 BdG：K 厄米、M 对称"""
    n_sites: int
    K_mat: np.ndarray
    M_mat: np.ndarray
    boundary: Optional[Boundary] = None
    sites_per_cell: int = 2

    def __post_init__(self):
        K = _frozen(self.K_mat)
        M = _frozen(self.M_mat)
        if K.shape != (self.n_sites, self.n_sites) or M.shape != K.shape:
            raise StructuralValidationError(f"K/M 形状应为 {(self.n_sites, self.n_sites)}")
        object.__setattr__(self, 'K_mat', K)
        object.__setattr__(self, 'M_mat', M)

    def validate(self, tol_herm: float) -> None:
        if np.max(np.abs(self.K_mat - self.K_mat.conj().T)) > tol_herm:
            raise StructuralValidationError("K 非厄米")
        if np.max(np.abs(self.M_mat - self.M_mat.T)) > tol_herm:
            raise StructuralValidationError("M 非对称")


@dataclass(frozen=True)
class PrototypeModel:
    """原型链参数：μ, t1, t2, |ξ|, arg ξ"""
    mu: float
    t1: float
    t2: float
    xi_abs: float = 0.0
    xi_phase: float = 0.0
    k_points: int = Config.DEFAULT_K_POINTS

    @property
    def xi(self) -> complex:
        return self.xi_abs * complex(math.cos(self.xi_phase), math.sin(self.xi_phase))

    @property
    def mu_tilde(self) -> float:
        """√(μ² − |ξ|²)"""
        return math.sqrt(self.mu ** 2 - self.xi_abs ** 2)

    @property
    def squeeze_r(self) -> float:
        """r = ¼ ln((μ−|ξ|)/(μ+|ξ|))，非正"""
        return 0.25 * math.log((self.mu - self.xi_abs) / (self.mu + self.xi_abs))

    @property
    def cosh_2r(self) -> float:
        return self.mu / self.mu_tilde

    @classmethod
    def from_dict(cls, data: dict) -> 'PrototypeModel':
        """从字典创建实例"""
        return cls(
            mu=float(data['mu']),
            t1=float(data['t1']),
            t2=float(data['t2']),
            xi_abs=float(data.get('xi_abs', 0.0)),
            xi_phase=float(data.get('xi_phase', 0.0)),
            k_points=int(data.get('k_points', Config.DEFAULT_K_POINTS)),
        )

    def to_dict(self) -> dict:
        """转换为字典"""
        return {
            'model': 'prototype',
            'mu': self.mu,
            't1': self.t1,
            't2': self.t2,
            'xi_abs': self.xi_abs,
            'xi_phase': self.xi_phase,
            'k_points': self.k_points,
        }


@dataclass(frozen=True)
class RegularizedMatrix:
    """H + ΔI 及其 Δ 来源记录"""
    matrix: np.ndarray
    delta: float
    min_eigenvalue: float = field(default=0.0)
