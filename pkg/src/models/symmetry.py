"""对称操作与对称性检查报告"""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np


class SymmetryKind(Enum):
    TIME_REVERSAL = "TimeReversal"
    PARTICLE_HOLE = "ParticleHole"
    CHIRAL = "Chiral"
    SUBLATTICE = "Sublattice"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class SymmetryOperator:
    """候选内禀对称：反幺正算符以 (幺正矩阵, 共轭标记) 表示，共轭先作用"""
    O: np.ndarray
    antiunitary: bool
    eta: int
    eps_k: int
    kind: SymmetryKind = SymmetryKind.CUSTOM
    name: str = ""

    def __post_init__(self):
        mat = np.array(self.O, dtype=complex, copy=True)
        mat.setflags(write=False)
        object.__setattr__(self, 'O', mat)

    @property
    def dim(self) -> int:
        return int(self.O.shape[0])

    def apply(self, mat: np.ndarray) -> np.ndarray:
        """O·conj?(A)·O⁻¹"""
        arg = mat.conj() if self.antiunitary else mat
        return self.O @ arg @ self.O.conj().T

    @classmethod
    def from_dict(cls, data: dict, matrix: np.ndarray) -> 'SymmetryOperator':
        """由配置字典与已解析的矩阵创建"""
        return cls(
            O=matrix,
            antiunitary=bool(data.get('antiunitary', False)),
            eta=int(data.get('eta', 1)),
            eps_k=int(data.get('eps_k', 1)),
            kind=SymmetryKind(data.get('kind', SymmetryKind.CUSTOM.value)),
            name=str(data.get('name', '')),
        )


@dataclass
class SymmetryReport:
    """逐 k 残差"""
    name: str
    kind: SymmetryKind
    residual: float
    residuals_per_k: List[float]
    holds: bool
    tolerance: float

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'kind': self.kind.value,
            'residual': float(self.residual),
            'residuals_per_k': [float(r) for r in self.residuals_per_k],
            'holds': self.holds,
            'tolerance': self.tolerance,
        }


@dataclass
class SublatticeReport:
    """隐藏子格对称检查结果"""
    epsilon: float
    S_tilde: np.ndarray
    residual: float
    holds: bool
    epsilon_spread: float = 0.0
    spectrum_residual: float = 0.0
    residuals_per_k: List[float] = field(default_factory=list)
    diagnostic: str = ""

    def to_dict(self) -> dict:
        return {
            'epsilon': float(self.epsilon),
            'epsilon_spread': float(self.epsilon_spread),
            'residual': float(self.residual),
            'spectrum_residual': float(self.spectrum_residual),
            'holds': self.holds,
            'residuals_per_k': [float(r) for r in self.residuals_per_k],
            'diagnostic': self.diagnostic,
        }


@dataclass
class PreservationReport:
    """压缩映射对对称性的保持"""
    name: str
    kind: SymmetryKind
    W_residual: float
    reduced_residual: float
    holds: bool
    residuals_per_k: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'kind': self.kind.value,
            'W_residual': float(self.W_residual),
            'reduced_residual': float(self.reduced_residual),
            'holds': self.holds,
        }


@dataclass
class SlsConstruction:
    """子格对称 BdG 族及其解析压缩解"""
    bloch: 'object'
    W_predicted: np.ndarray
    K_tilde_predicted: np.ndarray
    epsilon: float
    max_deviation: float
    squeeze_parameter: complex = 0.0
    extra: Optional[dict] = None
