import csv
import io
import json
import logging
from enum import Enum
from typing import Any, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    """numpy 标量 / 数组 / 枚举转为 JSON 原生类型"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Enum):
        return value.value
    return value


class ResultRepository:
    """确定性的 CSV / JSON 序列化"""

    @staticmethod
    def to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        """浮点数用 repr，保证同输入逐字节一致"""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        return buffer.getvalue()

    @staticmethod
    def to_json(payload: Any) -> str:
        return json.dumps(_plain(payload), sort_keys=True, indent=2, ensure_ascii=False) + '\n'
