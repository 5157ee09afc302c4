"""实验配置模型"""
import copy
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional


class ExperimentKind(Enum):
    """子命令"""
    BANDS = "bands"
    WINDING = "winding"
    POLARIZATION = "polarization"
    CORRELATION = "correlation"
    OBC = "obc"
    DISORDER = "disorder"
    STABILITY = "stability"
    SYMMETRY = "symmetry"
    REDUCE = "reduce"


@dataclass
class ExperimentConfig:
    """完全解析（含默认值）的实验配置；to_dict 的结果即 manifest"""
    experiment: ExperimentKind
    model: Dict[str, Any]
    output_dir: Optional[str] = None
    seed: int = 0
    overrides: Dict[str, float] = field(default_factory=dict)
    params: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        """从字典创建实例（不做严格校验，见 config_schema）"""
        return cls(
            experiment=ExperimentKind(data['experiment']),
            model=copy.deepcopy(data['model']),
            output_dir=data.get('output_dir'),
            seed=int(data.get('seed', 0)),
            overrides=dict(data.get('overrides', {})),
            params=copy.deepcopy(data.get('params', {})),
        )

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典"""
        return {
            'experiment': self.experiment.value,
            'model': copy.deepcopy(self.model),
            'output_dir': self.output_dir,
            'seed': self.seed,
            'overrides': dict(self.overrides),
            'params': copy.deepcopy(self.params),
        }

    @property
    def model_kind(self) -> str:
        return self.model.get('model', 'prototype')
