from enum import Enum
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator


class SolverStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    # 途中で Gram 行列が特異に近くなった (最後の有効な反復を返す)
    ILL_CONDITIONED = "ill_conditioned"
    # 有効な反復が一つもない
    FAILED = "failed"


class IrlsParams(BaseModel):
    """IRLS のハイパーパラメータ"""
    p_schedule: List[float] = Field([1.0, 0.5, 0.1], min_length=1, description="ℓp 指数の継続スケジュール (減少列)")
    epsilon_init: float = Field(1.0, gt=0, description="正則化 ε の初期値")
    epsilon_decay: float = Field(10.0, gt=1, description="ε の減衰係数")
    epsilon_min: float = Field(1e-8, gt=0, description="ε の下限")
    max_iters: int = Field(100, ge=1, description="ステージごとの最大反復数")
    convergence_tol: float = Field(1e-8, gt=0, description="反復変化の収束判定")
    zero_tol: float = Field(1e-6, gt=0, lt=1, description="max|z| に対する相対ゼロ閾値")
    energy_tol: float = Field(1e-4, gt=0, lt=1, description="刈り込み後の許容残差エネルギー (‖ω‖²/m に対する相対値)")

    @field_validator("p_schedule")
    @classmethod
    def _check_schedule(cls, value: List[float]) -> List[float]:
        if any(not 0 < p <= 2 for p in value):
            raise ValueError("every p must lie in (0, 2]")
        if any(b > a for a, b in zip(value, value[1:])):
            raise ValueError("p_schedule must be non-increasing")
        return value

    @classmethod
    def from_settings(cls, settings, **overrides) -> "IrlsParams":
        """Settings のデフォルトに上書きを適用"""
        values = {
            "p_schedule": settings.IRLS_P_SCHEDULE,
            "epsilon_init": settings.IRLS_EPSILON_INIT,
            "epsilon_decay": settings.IRLS_EPSILON_DECAY,
            "epsilon_min": settings.IRLS_EPSILON_MIN,
            "max_iters": settings.IRLS_MAX_ITERS,
            "convergence_tol": settings.IRLS_CONVERGENCE_TOL,
            "zero_tol": settings.IRLS_ZERO_TOL,
            "energy_tol": settings.IRLS_ENERGY_TOL,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class SurrogateStep(BaseModel):
    """IRLS の一反復での平滑化 ℓp 代理目的関数値"""
    stage: int
    p: float
    epsilon: float
    value: float


class SparseSolution(BaseModel):
    """候補表現 z と診断情報"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    z: np.ndarray = Field(..., description="長さ n の表現ベクトル")
    support: List[int] = Field(..., description="|z_i| > zero_tol の添字")
    sparsity_fraction: float = Field(..., ge=0, le=1, description="|support|/n")
    energy: float = Field(..., ge=0, description="残差エネルギー")
    iterations: int = Field(0, ge=0, description="反復回数")
    converged: bool = Field(False, description="収束フラグ")
    status: SolverStatus = Field(SolverStatus.CONVERGED, description="終了状態")
    condition: float = Field(float("nan"), description="最後の Gram 条件数推定")
    unpruned_support: int = Field(0, ge=0, description="刈り込み前に zero_tol を超えていた成分数")
    surrogate_trace: List[SurrogateStep] = Field(default_factory=list, description="代理目的関数の履歴")

    @field_serializer("z")
    def _serialize_z(self, value: np.ndarray) -> list:
        return value.tolist()

    def diagnostics(self) -> dict:
        """JSON サイドカー用の診断情報"""
        return {
            "energy": self.energy,
            "iterations": self.iterations,
            "converged": self.converged,
            "status": self.status.value,
            "condition": self.condition,
            "sparsity_fraction": self.sparsity_fraction,
            "support_size": len(self.support),
            "unpruned_support": self.unpruned_support,
        }


class BruteForceResult(BaseModel):
    """全探索による最良 k-サポート"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    support: Tuple[int, ...] = Field(..., description="最良サポート (辞書順最小)")
    energy: float = Field(..., ge=0, description="最小残差エネルギー")
    z_on_support: np.ndarray = Field(..., description="サポート上の最小二乗係数")
    subsets: int = Field(..., ge=1, description="調べた部分集合の数")

    @field_serializer("z_on_support")
    def _serialize_z(self, value: np.ndarray) -> list:
        return value.tolist()
