from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer


class DictionaryKind(str, Enum):
    """辞書のエントリ分布 (どちらも平均0・分散1)"""
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"


class ProblemInstance(BaseModel):
    """WGN 実現値 ω と辞書 D の組"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    m: int = Field(..., ge=1, description="WGN の次元")
    n: int = Field(..., ge=2, description="原子数")
    alpha: float = Field(..., description="m/n")
    kind: DictionaryKind = Field(DictionaryKind.GAUSSIAN, description="辞書の種類")
    seed: int = Field(..., ge=0, description="64bit 再現トークン")
    dictionary: np.ndarray = Field(..., description="m×n 辞書行列")
    omega: np.ndarray = Field(..., description="長さ m の WGN ベクトル")

    @field_serializer("dictionary", "omega")
    def _serialize_array(self, value: np.ndarray) -> list:
        return value.tolist()

    @property
    def scaled_dictionary(self) -> np.ndarray:
        """D/√n"""
        return self.dictionary / np.sqrt(self.n)
