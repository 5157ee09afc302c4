"""实空间原型链、边缘模与无序系综"""
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from src.models.bdg import Boundary, PrototypeModel
from src.utils.error_handler import StructuralValidationError


class EdgeSide(Enum):
    LEFT = "Left"
    RIGHT = "Right"


class DisorderKind(Enum):
    HOPPING = "hopping"
    ONSITE = "onsite"


@dataclass(frozen=True)
class ChainSpec:
    """L 个原胞的链；t_intra 长 L，t_inter 长 L−1 (开边界) 或 L (周期)"""
    L: int
    mu: float
    t_intra: Tuple[float, ...]
    t_inter: Tuple[float, ...]
    xi_abs: float = 0.0
    xi_phase: float = 0.0
    boundary: Boundary = Boundary.OPEN
    onsite_offsets: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 't_intra', tuple(float(t) for t in self.t_intra))
        object.__setattr__(self, 't_inter', tuple(float(t) for t in self.t_inter))
        offsets = tuple(float(x) for x in self.onsite_offsets) or (0.0,) * (2 * self.L)
        object.__setattr__(self, 'onsite_offsets', offsets)

    @classmethod
    def clean(cls, model: PrototypeModel, L: int, boundary: Boundary = Boundary.OPEN) -> 'ChainSpec':
        """无序为零的原型链"""
        n_inter = L if boundary is Boundary.PERIODIC else L - 1
        return cls(
            L=L,
            mu=model.mu,
            t_intra=(model.t1,) * L,
            t_inter=(model.t2,) * n_inter,
            xi_abs=model.xi_abs,
            xi_phase=model.xi_phase,
            boundary=boundary,
        )

    @property
    def xi(self) -> complex:
        return self.xi_abs * np.exp(1j * self.xi_phase)

    @property
    def mu_tilde(self) -> float:
        return float(np.sqrt(self.mu ** 2 - self.xi_abs ** 2))

    @property
    def squeeze_r(self) -> float:
        return float(0.25 * np.log((self.mu - self.xi_abs) / (self.mu + self.xi_abs)))

    @property
    def has_onsite_disorder(self) -> bool:
        return any(x != 0.0 for x in self.onsite_offsets)

    def with_couplings(self, t_intra, t_inter) -> 'ChainSpec':
        return replace(self, t_intra=tuple(t_intra), t_inter=tuple(t_inter))

    def with_offsets(self, offsets) -> 'ChainSpec':
        return replace(self, onsite_offsets=tuple(offsets))

    def validate(self) -> None:
        """检查长度与耦合符号"""
        if self.L < 1:
            raise StructuralValidationError("L 必须 ≥ 1")
        if self.boundary is Boundary.PERIODIC and self.L < 2:
            raise StructuralValidationError("周期边界要求 L ≥ 2（L=1 时环绕键与胞内键连接同一对格点）")
        n_inter = self.L if self.boundary is Boundary.PERIODIC else self.L - 1
        if len(self.t_intra) != self.L:
            raise StructuralValidationError(f"t_intra 长度应为 {self.L}")
        if len(self.t_inter) != n_inter:
            raise StructuralValidationError(f"t_inter 长度应为 {n_inter}")
        if len(self.onsite_offsets) != 2 * self.L:
            raise StructuralValidationError(f"onsite_offsets 长度应为 {2 * self.L}")
        if any(t <= 0 for t in self.t_intra + self.t_inter):
            raise StructuralValidationError("所有跃迁必须 > 0")
        if self.mu <= 0:
            raise StructuralValidationError("μ 必须 > 0")
        if self.xi_abs < 0 or self.xi_abs >= self.mu:
            raise StructuralValidationError("需要 0 ≤ |ξ| < μ")


@dataclass
class EdgeMode:
    """边缘激发的解析向量（粒子 / 空穴分量）"""
    side: EdgeSide
    energy: float
    amplitudes_particle: np.ndarray
    amplitudes_hole: np.ndarray
    residual: float
    # 空穴分量不带 δ^{j−1} 包络时的残差
    alt_residual: float = float('nan')
    envelope_ratio: float = float('nan')

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.amplitudes_particle, self.amplitudes_hole])

    def to_dict(self) -> dict:
        return {
            'side': self.side.value,
            'energy': float(self.energy),
            'residual': float(self.residual),
            'alt_residual': float(self.alt_residual),
            'envelope_ratio': float(self.envelope_ratio),
        }


@dataclass
class SweepPoint:
    """obc 扫描中的一个 t2"""
    t2: float
    energies: Optional[np.ndarray]
    midgap: List[float] = field(default_factory=list)
    critical: bool = False
    error: str = ""

    def to_dict(self) -> dict:
        return {
            't2': float(self.t2),
            'n_midgap': None if self.critical or self.energies is None else len(self.midgap),
            'midgap': [float(e) for e in self.midgap],
            'critical': self.critical,
            'error': self.error,
        }


@dataclass
class DisorderEnsemble:
    """某一强度 D 下的无序系综"""
    n_samples: int
    strength: float
    kind: DisorderKind
    seed: int
    mean_spectrum: np.ndarray
    edge_energies: np.ndarray
    spectra: np.ndarray
    edge_flags: np.ndarray
    rejected_draws: int = 0
    sublattice_residuals: Optional[np.ndarray] = None

    @property
    def edge_splittings(self) -> np.ndarray:
        return np.abs(self.edge_energies[:, 1] - self.edge_energies[:, 0])

    def max_edge_deviation(self, center: float) -> float:
        return float(np.max(np.abs(self.edge_energies - center)))

    def to_dict(self, center: float) -> dict:
        summary = {
            'D': float(self.strength),
            'kind': self.kind.value,
            'seed': int(self.seed),
            'n_samples': int(self.n_samples),
            'rejected_draws': int(self.rejected_draws),
            'mean_spectrum': [float(e) for e in self.mean_spectrum],
            'mean_edge_splitting': float(np.mean(self.edge_splittings)),
            'max_edge_deviation': self.max_edge_deviation(center),
            'edge_fraction': float(np.mean(self.edge_flags)),
        }
        if self.sublattice_residuals is not None:
            summary['max_sublattice_residual'] = float(np.max(self.sublattice_residuals))
        return summary
