"""拓扑不变量结果与 AZ 分类表"""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np


class AZClass(Enum):
    A = "A"
    AIII = "AIII"
    AI = "AI"
    AII = "AII"


class TopologicalGroup(Enum):
    Z = "Z"
    TWO_Z = "2Z"
    Z2 = "Z2"
    ZERO = "0"


@dataclass
class TopologyResult:
    """卷绕数、辛极化与 q(k) 轨迹"""
    winding: int
    polarization: float
    polarization_whole: float
    whole_integer: int
    q_trace: np.ndarray
    k_grid: np.ndarray
    gap_center: float
    gap_min: float
    winding_residual: float = 0.0
    regularization: float = 0.0
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'nu': int(self.winding),
            'P': round(float(self.polarization), 12),
            'P_whole': round(float(self.polarization_whole), 12),
            'm': int(self.whole_integer),
            'gap_center': float(self.gap_center),
            'gap_min': float(self.gap_min),
            'winding_residual': float(self.winding_residual),
            'regularization': float(self.regularization),
            'q_trace': [[float(z.real), float(z.imag)] for z in self.q_trace],
            'notes': list(self.notes),
        }


@dataclass(frozen=True)
class WindingTrace:
    """环路相位累积"""
    value: int
    residual: float
    max_link_phase: float
    closest_approach: float
    closest_index: Optional[int] = None
