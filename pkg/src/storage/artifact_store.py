"""
运行产物的缓冲写入

产物先保存在内存中，运行成功后才一次性落盘并写 manifest.json；
失败的运行不留下任何部分输出。
"""
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Iterable

from src.storage.repository import ResultRepository

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class ArtifactSession:
    """with 块正常退出时提交，异常时丢弃"""

    def __init__(self, output_dir: os.PathLike, manifest: Optional[Dict[str, Any]] = None):
        self.output_dir = Path(output_dir)
        self.manifest = manifest
        self._artifacts: Dict[str, str] = {}
        self.committed = False

    def __enter__(self) -> 'ArtifactSession':
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is None:
            self.commit()
        else:
            logger.info(f"运行失败，丢弃 {len(self._artifacts)} 个未提交产物")
            self._artifacts.clear()
        return False

    @property
    def names(self) -> List[str]:
        return sorted(self._artifacts)

    def add_text(self, name: str, text: str) -> None:
        if name in self._artifacts or name == MANIFEST_NAME:
            raise ValueError(f"产物名重复: {name}")
        self._artifacts[name] = text

    def add_json(self, name: str, payload: Any) -> None:
        self.add_text(name, ResultRepository.to_json(payload))

    def add_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
        self.add_text(name, ResultRepository.to_csv(header, rows))

    def commit(self) -> List[Path]:
        """按文件名顺序写出全部产物与 manifest"""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name in self.names:
            path = self.output_dir / name
            path.write_text(self._artifacts[name], encoding='utf-8')
            written.append(path)
        if self.manifest is not None:
            path = self.output_dir / MANIFEST_NAME
            path.write_text(ResultRepository.to_json(self.manifest), encoding='utf-8')
            written.append(path)
        self.committed = True
        logger.info(f"已写出 {len(written)} 个文件到 {self.output_dir}")
        return written
