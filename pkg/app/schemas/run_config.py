import math
from enum import Enum
from pathlib import Path
from typing import Any, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.schemas.ensembles import DictionaryKind

MAX_GRID_POINTS = 10_000_000


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


def _split(value: Any) -> Any:
    """'a,b,c' 形式の文字列をリストに分解"""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    if isinstance(value, (int, float)):
        return [value]
    return value


def parse_grid(spec: str) -> List[float]:
    """'start:stop:step' を両端込みの等間隔グリッドに展開"""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must look like start:stop:step, got {spec!r}")
    start, stop, step = (float(p) for p in parts)
    if not all(math.isfinite(v) for v in (start, stop, step)):
        raise ValueError(f"grid bounds must be finite, got {spec!r}")
    if step <= 0 or stop < start:
        raise ValueError(f"grid needs step > 0 and stop >= start, got {spec!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    if count > MAX_GRID_POINTS:
        raise ValueError(f"grid {spec!r} has {count} points (limit {MAX_GRID_POINTS})")
    return [round(start + i * step, 12) for i in range(count)]


class IrlsOverrides(BaseModel):
    """コマンドラインや設定ファイルからの IRLS 上書き"""
    model_config = ConfigDict(extra="forbid")

    p_schedule: Optional[List[float]] = None
    epsilon_init: Optional[float] = None
    epsilon_decay: Optional[float] = None
    epsilon_min: Optional[float] = None
    max_iters: Optional[int] = None
    convergence_tol: Optional[float] = None
    zero_tol: Optional[float] = None
    energy_tol: Optional[float] = None

    @field_validator("p_schedule", mode="before")
    @classmethod
    def _split_schedule(cls, value: Any) -> Any:
        return _split(value)


class RunConfig(BaseModel):
    """1 回の CLI 実行の設定 (デフォルト < 設定ファイル < フラグ)"""
    model_config = ConfigDict(extra="forbid")

    command: str = Field(..., description="サブコマンド名")
    alpha: Optional[List[float]] = Field(None, description="測定比 (pdf ではカンマ区切りの複数値)")
    kappa: Optional[float] = Field(None, description="スパース率")
    kappa_x: Optional[float] = Field(None, description="データのスパース率")
    snr: Optional[float] = Field(None, description="信号対雑音比")
    n: Optional[int] = Field(None, ge=2, description="原子数")
    n_list: Optional[List[int]] = Field(None, description="原子数のリスト")
    trials: Optional[int] = Field(None, ge=0, description="試行数")
    grid: Optional[str] = Field(None, description="start:stop:step")
    count: Optional[int] = Field(None, ge=1, description="サンプル数")
    points: Optional[int] = Field(None, ge=2, description="QQ テーブルの点数")
    simulate_alphas: Optional[List[float]] = Field(None, description="curve で外挿を重ねる α")
    weighted: bool = Field(False, description="二次フィットを 1/SE で重み付け")
    kind: DictionaryKind = Field(DictionaryKind.GAUSSIAN, description="辞書の種類")
    irls: IrlsOverrides = Field(default_factory=IrlsOverrides)
    export_instance: Optional[Path] = Field(None, description="sparsest のインスタンス CSV 出力先")
    seed: int = Field(..., ge=0, lt=2**64, description="64bit シード")
    jobs: int = Field(1, ge=1, description="ワーカー数 (結果には影響しない)")
    out: Optional[Path] = Field(None, description="出力先 (省略時は標準出力)")
    format: OutputFormat = Field(OutputFormat.JSON, description="csv または json")

    @field_validator("alpha", "n_list", "simulate_alphas", mode="before")
    @classmethod
    def _split_lists(cls, value: Any) -> Any:
        return _split(value)

    @field_validator("grid")
    @classmethod
    def _check_grid(cls, value: Optional[str]) -> Optional[str]:
        if value is not None:
            parse_grid(value)
        return value

    @property
    def grid_values(self) -> List[float]:
        return parse_grid(self.grid) if self.grid else []

    @property
    def single_alpha(self) -> Optional[float]:
        if not self.alpha:
            return None
        return self.alpha[0]

    def echo(self) -> dict:
        """メタデータに書き出す設定

        jobs and out do not change results and are left out, so the echo
        reproduces the file on any machine.
        """
        return self.model_dump(mode="json", exclude_none=True, exclude={"jobs", "out"})
