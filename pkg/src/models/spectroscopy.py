"""关联函数谱与包络报告"""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from src.models.bdg import Boundary


class BandSide(Enum):
    LOWER = "Lower"
    UPPER = "Upper"


class Direction(Enum):
    INCREASING = "Increasing"
    DECREASING = "Decreasing"
    NONE = "None"


class TraceVerdict(Enum):
    TOPOLOGICAL = "Topological"
    TRIVIAL = "Trivial"
    UNDETERMINED = "Undetermined"


@dataclass
class CorrelationTrace:
    """−Im C_j[ω] 与共振位置"""
    omega_grid: np.ndarray
    minus_im_C: np.ndarray
    kappa: float
    j: int
    boundary: Boundary
    mode_energies: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mode_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gap_center: Optional[float] = None

    @property
    def peak_height(self) -> float:
        return float(np.max(self.minus_im_C)) if self.minus_im_C.size else 0.0

    def to_rows(self) -> List[list]:
        return [[float(w), float(c)] for w, c in zip(self.omega_grid, self.minus_im_C)]


@dataclass
class EnvelopeReport:
    """带内共振峰的包络"""
    peak_freqs: List[float]
    peak_heights: List[float]
    band: BandSide
    monotonic: bool
    direction: Direction
    degeneracies: List[int] = field(default_factory=list)

    @property
    def height_ratio(self) -> float:
        if not self.peak_heights or min(self.peak_heights) <= 0:
            return float('inf')
        return max(self.peak_heights) / min(self.peak_heights)

    def to_dict(self) -> dict:
        return {
            'band': self.band.value,
            'monotonic': self.monotonic,
            'direction': self.direction.value,
            'peak_freqs': [float(x) for x in self.peak_freqs],
            'peak_heights': [float(x) for x in self.peak_heights],
            'degeneracies': list(self.degeneracies),
            'height_ratio': float(self.height_ratio),
        }
