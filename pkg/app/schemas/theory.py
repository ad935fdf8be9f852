from pydantic import BaseModel, Field


# ---------------
# ThresholdPoint スキーマ
# ---------------
class ThresholdPoint(BaseModel):
    """臨界曲線上の (α, κ, ξ) 点"""
    alpha: float = Field(..., ge=0, le=1, description="測定比 α = m/n")
    kappa: float = Field(..., ge=0, le=1, description="スパース率 κ")
    xi: float = Field(..., ge=0, description="積分下限 ξ")
    kappa_star: float = Field(..., description="この α でのスパース率閾値 κ*_α")
    alpha_star: float = Field(..., description="この κ での測定比閾値 α*_κ")


# ---------------
# ConverseLaw スキーマ
# ---------------
class ConverseLaw(BaseModel):
    """(α, κ) 点での最小エネルギーと最適解の二乗ノルム"""
    alpha: float = Field(..., description="測定比 α")
    kappa: float = Field(..., description="スパース率 κ")
    alpha_star: float = Field(..., description="α*_κ")
    kappa_star: float = Field(..., description="κ*_α")
    achievable: bool = Field(..., description="κ ≥ κ*_α (達成可能領域) かどうか")
    min_energy: float = Field(..., ge=0, description="最小平均二乗残差 E_min")
    opt_sq_norm: float = Field(..., description="最適解の原子あたり二乗ノルム Q (達成可能領域では inf)")
    aux_x: float = Field(..., description="補助パラメータ x = β(Q-q); 反対領域では Q と一致")
