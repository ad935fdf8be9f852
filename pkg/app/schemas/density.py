from pydantic import BaseModel, Field


class MarginalDensity(BaseModel):
    """非ゼロ成分の周辺密度 (両側切断ガウス) のパラメータ"""
    kappa: float = Field(..., gt=0, lt=1, description="スパース率 κ")
    alpha: float = Field(..., gt=0, description="測定比 α (< α*_κ)")
    xi: float = Field(..., gt=0, description="2Q(ξ)=κ の解")
    alpha_star: float = Field(..., description="閾値 α*_κ")
    scale_sq: float = Field(..., gt=0, description="σ² = α/(α*_κ(α*_κ-α))")
    gap: float = Field(..., gt=0, description="密度ゼロ区間の半幅 ξσ")

    @property
    def scale(self) -> float:
        return self.scale_sq ** 0.5

    @property
    def conditional_second_moment(self) -> float:
        """非ゼロ成分の二次モーメント σ²α*_κ/κ"""
        return self.scale_sq * self.alpha_star / self.kappa

    @property
    def entry_second_moment(self) -> float:
        """全成分あたりの二次モーメント α/(α*_κ-α)"""
        return self.alpha / (self.alpha_star - self.alpha)
