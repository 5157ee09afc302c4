"""实验配置的严格模式：未知键一律拒绝，缺省值在此补全"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from config import Config, Tolerances
from src.managers.bdg_manager import BdgManager
from src.models.bdg import BlochBdg, PrototypeModel
from src.models.experiment import ExperimentConfig, ExperimentKind
from src.utils.error_handler import ConfigSchemaError, ErrorHandler

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = frozenset({'experiment', 'model', 'output_dir', 'seed', 'overrides', 'params'})

MODEL_KEYS = {
    'prototype': frozenset({'model', 'mu', 't1', 't2', 'xi_abs', 'xi_phase', 'k_points'}),
    'custom': frozenset({'model', 'K_blocks', 'M_blocks', 'k_points', 'S_tilde'}),
}
MODEL_REQUIRED = {
    'prototype': ('mu', 't1', 't2'),
    'custom': ('K_blocks', 'M_blocks'),
}

_LAMBDAS = [round(0.1 * i, 10) for i in range(11)]

# None 表示依赖模型参数的缺省值
PARAM_DEFAULTS: Dict[ExperimentKind, Dict[str, Any]] = {
    ExperimentKind.BANDS: {'regularization': 0.0},
    ExperimentKind.WINDING: {'S_tilde': None, 'regularization': 0.0},
    ExperimentKind.POLARIZATION: {'S_tilde': None, 'regularization': 0.0},
    ExperimentKind.CORRELATION: {
        'L': 30, 'kappa': None, 't2_values': None, 'j': 0,
        'boundary': 'periodic', 'source': 'analytic',
    },
    ExperimentKind.OBC: {'L': 100, 't2_values': None, 'kappa': None, 'j': 0, 'edge_sizes': [20, 30]},
    ExperimentKind.DISORDER: {'L': 50, 'kinds': ['hopping', 'onsite'], 'D_values': None, 'n_samples': 100},
    ExperimentKind.STABILITY: {'regularization': 0.0},
    ExperimentKind.SYMMETRY: {
        'operators': ['PHS'], 'S_tilde': None, 'T_tilde': None,
        'preservation': True, 'inversion_times': [],
    },
    ExperimentKind.REDUCE: {'lambdas': _LAMBDAS, 'k_indices': [0], 'regularization': 0.0},
}

# 只对原型链有意义的实验
PROTOTYPE_ONLY = frozenset({ExperimentKind.CORRELATION, ExperimentKind.OBC, ExperimentKind.DISORDER})

BUILTIN_OPERATORS = ('PHS', 'TRS', 'chiral', 'sublattice')


@dataclass(frozen=True)
class SchemaStatus:
    """配置检查摘要"""
    experiment: str
    model_kind: str
    defaults_filled: Tuple[str, ...]
    overrides: Tuple[str, ...]
    summary: str


@dataclass(frozen=True)
class ModelBundle:
    """由配置构造的模型"""
    bloch: BlochBdg
    prototype: Optional[PrototypeModel]
    S_tilde: Optional[np.ndarray]


def _reject_unknown(data: dict, allowed: frozenset, where: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigSchemaError(f"{where} 含有未知键: {', '.join(unknown)}")


def _number(value: Any, name: str, positive: bool = False, non_negative: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigSchemaError(f"{name} 必须是数值，实际 {value!r}")
    value = float(value)
    if positive and not value > 0:
        raise ConfigSchemaError(f"{name} 必须 > 0")
    if non_negative and value < 0:
        raise ConfigSchemaError(f"{name} 必须 ≥ 0")
    return value


def _integer(value: Any, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigSchemaError(f"{name} 必须是整数，实际 {value!r}")
    if value < minimum:
        raise ConfigSchemaError(f"{name} 必须 ≥ {minimum}")
    return value


def _number_list(value: Any, name: str, **kwargs) -> List[float]:
    if not isinstance(value, list) or not value:
        raise ConfigSchemaError(f"{name} 必须是非空数组")
    return [_number(v, f"{name}[{i}]", **kwargs) for i, v in enumerate(value)]


class ConfigSchema:
    """配置校验与模型构造"""

    @staticmethod
    def load(path: Union[str, Path], experiment: Optional[str] = None) -> Tuple[ExperimentConfig, SchemaStatus]:
        """读取 JSON 配置；experiment 由子命令给出时覆盖缺省"""
        try:
            with open(path, 'r', encoding='utf-8') as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            ErrorHandler.handle_config_error(str(path), e)
        return ConfigSchema.validate(data, experiment)

    @staticmethod
    def validate(data: Any, experiment: Optional[str] = None) -> Tuple[ExperimentConfig, SchemaStatus]:
        """严格校验并补全缺省值"""
        if not isinstance(data, dict):
            raise ConfigSchemaError("配置顶层必须是 JSON 对象")
        _reject_unknown(data, TOP_LEVEL_KEYS, "配置")

        declared = data.get('experiment')
        if experiment and declared and declared != experiment:
            raise ConfigSchemaError(f"配置声明的实验 {declared!r} 与子命令 {experiment!r} 不一致")
        name = experiment or declared
        if not name:
            raise ConfigSchemaError("缺少 experiment")
        try:
            kind = ExperimentKind(name)
        except ValueError as e:
            raise ConfigSchemaError(f"未知实验: {name!r}") from e

        model = ConfigSchema._validate_model(data.get('model'))
        if kind in PROTOTYPE_ONLY and model['model'] != 'prototype':
            raise ConfigSchemaError(f"实验 {kind.value} 只支持 prototype 模型")

        seed = _integer(data.get('seed', Config.DEFAULT_SEED), "seed")
        output_dir = data.get('output_dir')
        if output_dir is not None and not isinstance(output_dir, str):
            raise ConfigSchemaError("output_dir 必须是字符串")

        overrides = data.get('overrides', {})
        if not isinstance(overrides, dict):
            raise ConfigSchemaError("overrides 必须是对象")
        Config.tolerances(overrides)

        params, filled = ConfigSchema._resolve_params(kind, model, data.get('params', {}))
        config = ExperimentConfig(
            experiment=kind, model=model, output_dir=output_dir, seed=seed,
            overrides={k: float(v) for k, v in sorted(overrides.items())}, params=params,
        )
        status = SchemaStatus(
            experiment=kind.value,
            model_kind=model['model'],
            defaults_filled=tuple(filled),
            overrides=tuple(sorted(overrides)),
            summary=f"{kind.value}: 模型 {model['model']}，补全缺省 {len(filled)} 项",
        )
        logger.info(status.summary)
        return config, status

    @staticmethod
    def _validate_model(model: Any) -> Dict[str, Any]:
        if not isinstance(model, dict):
            raise ConfigSchemaError("model 必须是对象")
        model = dict(model)
        kind = model.setdefault('model', 'prototype')
        if kind not in MODEL_KEYS:
            raise ConfigSchemaError(f"未知模型: {kind!r}")
        _reject_unknown(model, MODEL_KEYS[kind], "model")
        for key in MODEL_REQUIRED[kind]:
            if key not in model:
                raise ConfigSchemaError(f"model 缺少 {key}")
        model['k_points'] = _integer(model.get('k_points', Config.DEFAULT_K_POINTS), "k_points", minimum=2)
        if kind == 'prototype':
            model['mu'] = _number(model['mu'], "mu", positive=True)
            model['t1'] = _number(model['t1'], "t1", non_negative=True)
            model['t2'] = _number(model['t2'], "t2", non_negative=True)
            model['xi_abs'] = _number(model.get('xi_abs', 0.0), "xi_abs", non_negative=True)
            model['xi_phase'] = _number(model.get('xi_phase', 0.0), "xi_phase")
        else:
            for key in ('K_blocks', 'M_blocks'):
                if not isinstance(model[key], dict) or not model[key]:
                    raise ConfigSchemaError(f"{key} 必须是以整数位移为键的非空对象")
        return model

    @staticmethod
    def _resolve_params(kind: ExperimentKind, model: Dict[str, Any],
                        params: Any) -> Tuple[Dict[str, Any], List[str]]:
        if not isinstance(params, dict):
            raise ConfigSchemaError("params 必须是对象")
        defaults = PARAM_DEFAULTS[kind]
        _reject_unknown(params, frozenset(defaults), f"params ({kind.value})")
        filled = sorted(set(defaults) - set(params))
        resolved = {**{k: v for k, v in defaults.items()}, **params}
        t1 = model.get('t1', 1.0)

        if 'regularization' in resolved:
            resolved['regularization'] = _number(resolved['regularization'], "regularization", non_negative=True)
        if 'L' in resolved:
            resolved['L'] = _integer(resolved['L'], "L", minimum=1)
        if 'j' in resolved:
            resolved['j'] = _integer(resolved['j'], "j")
            if resolved['j'] >= resolved['L']:
                raise ConfigSchemaError("j 必须小于 L")
        if 'kappa' in resolved:
            kappa = resolved['kappa']
            resolved['kappa'] = Config.DEFAULT_KAPPA_FACTOR * t1 if kappa is None \
                else _number(kappa, "kappa", positive=True)
        if 't2_values' in resolved:
            values = resolved['t2_values']
            if values is None:
                values = [model['t2']] if kind is ExperimentKind.CORRELATION \
                    else [round(0.05 * i * t1, 10) for i in range(1, 41)]
            resolved['t2_values'] = _number_list(values, "t2_values", positive=True)

        if kind is ExperimentKind.CORRELATION:
            if resolved['boundary'] not in ('periodic', 'open'):
                raise ConfigSchemaError("boundary 只能是 periodic 或 open")
            if resolved['source'] not in ('analytic', 'numeric'):
                raise ConfigSchemaError("source 只能是 analytic 或 numeric")
            if resolved['source'] == 'analytic' and resolved['boundary'] == 'open':
                raise ConfigSchemaError("解析关联函数只适用于周期边界")
        elif kind is ExperimentKind.OBC:
            resolved['edge_sizes'] = [_integer(v, "edge_sizes", minimum=2) for v in resolved['edge_sizes']]
        elif kind is ExperimentKind.DISORDER:
            kinds = resolved['kinds']
            if not isinstance(kinds, list) or not kinds or any(k not in ('hopping', 'onsite') for k in kinds):
                raise ConfigSchemaError("kinds 只能包含 hopping 与 onsite")
            D_values = resolved['D_values']
            if D_values is None:
                D_values = [round(f * t1, 12) for f in Config.DEFAULT_DISORDER_FACTORS]
            resolved['D_values'] = _number_list(D_values, "D_values", non_negative=True)
            resolved['n_samples'] = _integer(resolved['n_samples'], "n_samples", minimum=1)
        elif kind is ExperimentKind.SYMMETRY:
            operators = resolved['operators']
            if not isinstance(operators, list):
                raise ConfigSchemaError("operators 必须是数组")
            for op in operators:
                if isinstance(op, str):
                    if op not in BUILTIN_OPERATORS:
                        raise ConfigSchemaError(f"未知内置对称操作: {op!r}")
                elif isinstance(op, dict):
                    _reject_unknown(op, frozenset({'name', 'kind', 'matrix', 'antiunitary', 'eta', 'eps_k'}),
                                    "operators[]")
                    if 'matrix' not in op:
                        raise ConfigSchemaError("自定义对称操作缺少 matrix")
                else:
                    raise ConfigSchemaError("operators 的元素必须是字符串或对象")
            resolved['inversion_times'] = [_number(t, "inversion_times") for t in resolved['inversion_times']]
            resolved['preservation'] = bool(resolved['preservation'])
        elif kind is ExperimentKind.REDUCE:
            resolved['lambdas'] = _number_list(resolved['lambdas'], "lambdas")
            resolved['k_indices'] = [_integer(v, "k_indices") for v in resolved['k_indices']]
        return resolved, filled

    # ---------- 模型构造 ----------

    @staticmethod
    def parse_matrix(data: Any, name: str) -> Optional[np.ndarray]:
        return None if data is None else BdgManager.parse_complex_matrix(data, name)

    @staticmethod
    def build_model(config: ExperimentConfig, tol: Optional[Tolerances] = None) -> ModelBundle:
        """prototype 走闭式构造，custom 由傅里叶分量构造"""
        tol = tol or Config.tolerances()
        model = config.model
        if model['model'] == 'prototype':
            prototype = PrototypeModel.from_dict(model)
            bloch = BdgManager.build_from_model(prototype)
            S_tilde = np.diag([1.0, -1.0]).astype(complex)
        else:
            prototype = None
            K_blocks = ConfigSchema._blocks(model['K_blocks'], "K_blocks")
            M_blocks = ConfigSchema._blocks(model['M_blocks'], "M_blocks")
            bloch = BdgManager.build_from_blocks(K_blocks, M_blocks, model['k_points'], tol)
            S_tilde = ConfigSchema.parse_matrix(model.get('S_tilde'), "S_tilde")
        override = ConfigSchema.parse_matrix(config.params.get('S_tilde'), "S_tilde")
        if override is not None:
            S_tilde = override
        return ModelBundle(bloch=bloch, prototype=prototype, S_tilde=S_tilde)

    @staticmethod
    def _blocks(data: Dict[str, Any], name: str) -> Dict[int, np.ndarray]:
        blocks = {}
        for key, value in data.items():
            try:
                R = int(key)
            except ValueError as e:
                raise ConfigSchemaError(f"{name} 的键必须是整数位移，实际 {key!r}") from e
            blocks[R] = BdgManager.parse_complex_matrix(value, f"{name}[{key}]")
        return blocks
