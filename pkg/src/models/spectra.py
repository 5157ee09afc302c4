"""对角化结果模型：Bogoliubov 本征基、压缩分解与形变报告"""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np


class StabilityKind(Enum):
    """稳定性分类"""
    THERMO_AND_DYNAMICAL = "ThermoAndDynamical"
    DYNAMICAL_ONLY = "DynamicalOnly"
    LANDAU_UNSTABLE = "LandauUnstable"
    DYNAMICALLY_UNSTABLE = "DynamicallyUnstable"

    @property
    def is_dynamically_stable(self) -> bool:
        return self is not StabilityKind.DYNAMICALLY_UNSTABLE


@dataclass(frozen=True)
class BogoliubovResult:
    """赝幺正本征基 V 与 Λ = diag(E_plus, E_minus_neg)"""
    V: Optional[np.ndarray]
    E_plus: np.ndarray
    E_minus_neg: np.ndarray
    stability: StabilityKind
    method: str = "cholesky"
    regularization: float = 0.0
    # 动力学不稳定时的复本征值
    raw_eigenvalues: Optional[np.ndarray] = None

    @property
    def n_modes(self) -> int:
        return int(self.E_plus.shape[0])

    @property
    def Lambda(self) -> np.ndarray:
        return np.diag(np.concatenate([self.E_plus, self.E_minus_neg]).astype(complex))

    @property
    def particle_vectors(self) -> np.ndarray:
        """正模（τ3 范数 +1）的列"""
        return self.V[:, :self.n_modes]

    def to_dict(self) -> dict:
        """转换为字典（不含本征向量）"""
        return {
            'E_plus': [float(e) for e in self.E_plus],
            'E_minus_neg': [float(e) for e in self.E_minus_neg],
            'stability': self.stability.value,
            'method': self.method,
            'regularization': self.regularization,
        }


@dataclass(frozen=True)
class SqueezeDecomposition:
    """H_τ = e^W (K̃ ⊕ −K̃ᵀ(−k)) e^{−W}"""
    W: np.ndarray
    exp_W: np.ndarray
    U: np.ndarray
    K_tilde: np.ndarray
    E_plus: np.ndarray
    H_prime_tau: np.ndarray
    cross_check: float = 0.0
    regularization: float = 0.0

    @property
    def n_modes(self) -> int:
        return int(self.K_tilde.shape[0])

    @property
    def exp_minus_W(self) -> np.ndarray:
        n2 = self.exp_W.shape[0]
        tau3 = np.diag(np.r_[np.ones(n2 // 2), -np.ones(n2 // 2)])
        # e^{−W} = τ3 e^{W} τ3
        return tau3 @ self.exp_W @ tau3

    @property
    def gap_center(self) -> float:
        """ε = Tr K̃ / Ñ"""
        return float(np.trace(self.K_tilde).real / self.n_modes)

    @property
    def hole_block(self) -> np.ndarray:
        """−K̃ᵀ(−k)"""
        n = self.n_modes
        return self.H_prime_tau[n:, n:]


@dataclass
class DeformationReport:
    """沿 λ 的谱与能隙"""
    lambdas: List[float]
    spectra: List[np.ndarray]
    gaps: List[float]
    max_spectral_deviation: float = 0.0
    endpoint_residuals: List[float] = field(default_factory=list)

    @property
    def min_gap(self) -> float:
        return float(min(self.gaps)) if self.gaps else float('nan')

    def to_dict(self) -> dict:
        return {
            'lambdas': [float(x) for x in self.lambdas],
            'gaps': [float(g) for g in self.gaps],
            'min_gap': self.min_gap,
            'max_spectral_deviation': float(self.max_spectral_deviation),
            'endpoint_residuals': [float(r) for r in self.endpoint_residuals],
        }
