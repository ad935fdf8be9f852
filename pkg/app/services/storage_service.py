import json
import logging
import math
import sys
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO

import numpy as np
from pydantic import BaseModel

from app.schemas.run_config import OutputFormat

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """pydantic モデルや numpy 値を JSON に書ける形へ変換 (非有限値は null)"""
    if isinstance(value, BaseModel):
        return to_jsonable(value.model_dump(mode="json"))
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def format_cell(value: Any) -> str:
    """CSV セルの表記 (浮動小数は有効数字17桁)"""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


def tabulate(result: Any) -> tuple:
    """モデル (のリスト) を列名と行に展開"""
    if isinstance(result, list):
        if not result:
            return [], []
        columns = list(to_row_dict(result[0]).keys())
        return columns, [list(to_row_dict(item).values()) for item in result]
    record = to_row_dict(result)
    return list(record.keys()), [list(record.values())]


def to_row_dict(item: Any) -> Dict[str, Any]:
    if isinstance(item, BaseModel):
        item = item.model_dump()
    return {k: v for k, v in item.items() if not isinstance(v, (list, dict, np.ndarray))}


class StorageService:
    """結果の書き出しサービス

    Writes either to the --out path or to stdout. Every output starts with a
    metadata record (tool version, config echo, seed, generator). In CSV this
    is a block of `# key: value` lines, in JSON the "metadata" key.
    """

    def __init__(self, metadata: Dict[str, Any], out: Optional[Path] = None, fmt: OutputFormat = OutputFormat.JSON):
        self.metadata = metadata
        self.out = Path(out) if out is not None else None
        self.format = OutputFormat(fmt)

    def _write(self, text: str, path: Optional[Path] = None) -> None:
        path = path or self.out
        if path is None:
            stream: TextIO = sys.stdout
            stream.write(text)
            stream.flush()
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as f:
            f.write(text)
        logger.info(f"Wrote {path}")

    def render_json(self, result: Any) -> str:
        payload = {"metadata": to_jsonable(self.metadata), "result": to_jsonable(result)}
        return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"

    def render_csv(self, columns: Sequence[str], rows: Sequence[Sequence[Any]], extra: Optional[Dict[str, Any]] = None) -> str:
        lines = [f"# {self.metadata.get('tool', 'swn')} {self.metadata.get('version', '')}".rstrip()]
        for key, value in self.metadata.items():
            if key in ("tool", "version"):
                continue
            lines.append(f"# {key}: {json.dumps(to_jsonable(value), sort_keys=True, ensure_ascii=False)}")
        for key, value in (extra or {}).items():
            lines.append(f"# {key}: {json.dumps(to_jsonable(value), ensure_ascii=False)}")
        lines.append(",".join(columns))
        lines.extend(",".join(format_cell(cell) for cell in row) for row in rows)
        return "\n".join(lines) + "\n"

    def emit(
        self,
        result: Any,
        columns: Optional[Sequence[str]] = None,
        rows: Optional[List[Sequence[Any]]] = None,
        extra: Optional[Dict[str, Any]] = None,
    ) -> None:
        """形式に応じて結果を書き出す

        JSON gets the full result. CSV gets the tabular series (columns/rows,
        or the scalar fields of result when none are given) and the `extra`
        summary values as metadata lines.
        """
        if self.format is OutputFormat.JSON:
            self._write(self.render_json(result))
            return
        if columns is None:
            columns, rows = tabulate(result)
        self._write(self.render_csv(columns, rows or [], extra))

    def write_sidecar(self, payload: Dict[str, Any]) -> Optional[Path]:
        """CSV 出力の隣に JSON の診断ファイルを書く"""
        if self.out is None:
            logger.info(f"Diagnostics: {json.dumps(to_jsonable(payload))}")
            return None
        path = self.out.with_suffix(".json")
        if path == self.out:
            path = self.out.with_name(self.out.name + ".diagnostics.json")
        self._write(self.render_json(payload), path)
        return path
